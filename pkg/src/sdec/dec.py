"""Joint representation learning and clustering.

Cluster centers live in the encoder's latent space. Soft assignments use a
Student's t kernel:

    q_ij = (1 + ||z_i - mu_j||^2 / nu)^(-(nu+1)/2) / sum_j' (...)

and the fixed training target squares-and-renormalizes them by soft
cluster mass f_j = sum_i q_ij:

    p_ij = (q_ij^2 / f_j) / sum_j' (q_ij'^2 / f_j')

Training alternates between refreshing P on the full dataset and minibatch
steps on  kl(P||Q) + lambda * reconstruction_mse,  backpropagated through
encoder, decoder and the centers themselves with momentum SGD. The KL term
is averaged per item so the loss scale does not depend on the batch size.
P is a constant during backprop; both loss terms use the same minibatch
rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArgumentError,
    DegenerateClusterError,
    DivergenceError,
    ShapeError,
    TransferError,
)
from .evaluation import contingency, m1_accuracy
from .net import Network, RngState, backward, forward, init_optimizer, momentum_update, sgd_step
from .sae import EncoderStack, encode

logger = logging.getLogger(__name__)

Q_FLOOR = 1e-12


@dataclass(frozen=True)
class HyperParams:
    m: int
    nu: float = 1.0
    lambda_: float = 5.0
    iterations: int = 4000
    batch_size: int = 256
    learning_rate: float = 0.001
    momentum: float = 0.9
    target_update_interval: int = 100
    seed: int = 0
    kmeans_restarts: int = 10

    def __post_init__(self):
        if self.m < 2:
            raise ArgumentError("need at least 2 clusters")
        if self.nu <= 0:
            raise ArgumentError("nu must be positive")
        if self.lambda_ < 0:
            raise ArgumentError("lambda must be >= 0")
        # iterations = 0 is the documented KMeans-only degenerate case
        if self.iterations < 0:
            raise ArgumentError("iterations must be >= 0")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.target_update_interval < 1:
            raise ArgumentError("target_update_interval must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ArgumentError(f"momentum {self.momentum} not in [0, 1)")


@dataclass
class ClusterModel:
    """Deployable artifact: trained encoder/decoder plus latent centers."""

    encoder: Network
    decoder: Network
    centers: np.ndarray  # (m, latent)
    nu: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.centers).all():
            raise DivergenceError("cluster centers are not finite")
        if self.centers.shape[1] != self.encoder.output_dim:
            raise ShapeError(
                f"centers dim {self.centers.shape[1]} does not match latent "
                f"{self.encoder.output_dim}"
            )

    @property
    def m(self) -> int:
        return self.centers.shape[0]


@dataclass
class AssignmentMatrix:
    """Soft assignments q (rows normalized), optional targets p, and the
    soft cluster masses f_j (column sums of q)."""

    q: np.ndarray
    p: np.ndarray | None = None
    cluster_mass: np.ndarray | None = None

    def __post_init__(self):
        for name, mat in (("q", self.q), ("p", self.p)):
            if mat is None:
                continue
            if mat.ndim != 2:
                raise ShapeError(f"{name} must be 2-d")
            if np.any(mat <= 0) or np.any(mat > 1):
                raise ArgumentError(f"{name} entries must lie in (0, 1]")
            if not np.allclose(mat.sum(axis=1), 1.0, atol=1e-6):
                raise ArgumentError(f"{name} rows must sum to 1")
        if self.cluster_mass is None:
            self.cluster_mass = self.q.sum(axis=0)
        elif not np.allclose(self.cluster_mass, self.q.sum(axis=0), atol=1e-5):
            raise ArgumentError("cluster_mass must equal the column sums of q")


def compute_assignments(
    z: np.ndarray, centers: np.ndarray, nu: float = 1.0, with_target: bool = False
) -> AssignmentMatrix:
    """Soft-assign ``z`` and optionally attach the sharpened target."""
    q = soft_assign(z, centers, nu)
    p = target_distribution(q) if with_target else None
    return AssignmentMatrix(q=q, p=p)


@dataclass
class RefreshRecord:
    """Telemetry captured at every target-distribution refresh."""

    iteration: int
    kl: float
    recon: float
    total: float
    m1: float | None = None


def _squared_distances(z: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(z * z, axis=1)[:, None]
        - 2.0 * (z @ centers.T)
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def soft_assign(z: np.ndarray, centers: np.ndarray, nu: float = 1.0) -> np.ndarray:
    """Student's t soft assignments; rows sum to 1, every entry positive."""
    if z.ndim != 2 or centers.ndim != 2 or z.shape[1] != centers.shape[1]:
        raise ShapeError(f"latent rows {z.shape} vs centers {centers.shape}")
    if nu <= 0:
        raise ArgumentError("nu must be positive")
    out_dtype = np.result_type(z.dtype, centers.dtype)
    d2 = _squared_distances(z.astype(np.float64), centers.astype(np.float64))
    s = np.power(1.0 + d2 / nu, -(nu + 1.0) / 2.0)
    q = s / s.sum(axis=1, keepdims=True)
    return q.astype(out_dtype)


def target_distribution(q: np.ndarray) -> np.ndarray:
    """Square each assignment, discount by cluster mass, renormalize rows."""
    mass = q.sum(axis=0)
    if np.any(mass <= 0):
        dead = np.nonzero(mass <= 0)[0].tolist()
        raise DegenerateClusterError(f"clusters {dead} have zero soft mass")
    weight = np.square(q) / mass
    return weight / weight.sum(axis=1, keepdims=True)


def dec_losses(
    p: np.ndarray, q: np.ndarray, recon_mse: float, lambda_: float
) -> tuple[float, float]:
    """Per-item KL(P||Q) and the combined objective kl + lambda * recon."""
    if p.shape != q.shape:
        raise ShapeError(f"p {p.shape} vs q {q.shape}")
    clamped = np.maximum(q, Q_FLOOR)
    if np.any((q < Q_FLOOR) & (p > 0)):
        logger.warning("soft assignments underflowed; clamping q at %g", Q_FLOOR)
    contrib = np.zeros(p.shape, dtype=np.float64)
    pos = p > 0
    contrib[pos] = p[pos] * (np.log(p[pos]) - np.log(clamped[pos]))
    kl = float(contrib.sum() / p.shape[0])
    return kl, kl + lambda_ * recon_mse


def kmeans_fit(
    data: np.ndarray, m: int, seed: int, restarts: int = 10
) -> tuple[np.ndarray, np.ndarray, float]:
    """KMeans with kmeans++ seeding and Lloyd iterations.

    Runs ``restarts`` independent fits and keeps the lowest inertia (ties
    go to the earliest restart). Empty clusters are repaired by stealing
    the point farthest from its assigned center.
    """
    n = data.shape[0]
    if m < 1:
        raise ArgumentError("m must be >= 1")
    if n < m:
        raise ArgumentError(f"cannot fit {m} clusters to {n} points")
    if restarts < 1:
        raise ArgumentError("restarts must be >= 1")
    rng = RngState(seed)
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    work = data.astype(np.float64)
    for _ in range(restarts):
        centers = _kmeans_pp_init(work, m, rng)
        centers, assign, inertia = _lloyd(work, centers)
        if best is None or inertia < best[2]:
            best = (centers, assign, inertia)
    centers, assign, inertia = best
    return centers.astype(data.dtype), assign, float(inertia)


def _kmeans_pp_init(data: np.ndarray, m: int, rng: RngState) -> np.ndarray:
    n = data.shape[0]
    first = int(rng.gen.integers(n))
    centers = [data[first]]
    d2 = np.sum(np.square(data - centers[0]), axis=1)
    for _ in range(1, m):
        total = d2.sum()
        if total <= 0:
            # every remaining point coincides with a chosen center
            pick = int(rng.gen.integers(n))
        else:
            pick = int(rng.gen.choice(n, p=d2 / total))
        centers.append(data[pick])
        d2 = np.minimum(d2, np.sum(np.square(data - centers[-1]), axis=1))
    return np.stack(centers)


def _assign_with_repair(
    data: np.ndarray, centers: np.ndarray, m: int
) -> tuple[np.ndarray, bool]:
    """Nearest-center assignment; empty clusters steal the farthest point
    (which also moves that cluster's center onto it)."""
    d2 = _squared_distances(data, centers)
    assign = np.argmin(d2, axis=1)
    counts = np.bincount(assign, minlength=m)
    if np.all(counts > 0):
        return assign, False
    own = d2[np.arange(len(data)), assign].copy()
    for j in range(m):
        if counts[j] > 0:
            continue
        victim = int(np.argmax(own))
        counts[assign[victim]] -= 1
        assign[victim] = j
        counts[j] = 1
        centers[j] = data[victim]
        own[victim] = 0.0
    return assign, True


def _lloyd(
    data: np.ndarray,
    centers: np.ndarray,
    max_iter: int = 300,
    inertia_trace: list | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd iterations to an assignment fixpoint or ``max_iter`` passes."""
    m = centers.shape[0]
    assign = None
    for _ in range(max_iter):
        new_assign, _ = _assign_with_repair(data, centers, m)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(m):
            members = data[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
        if inertia_trace is not None:
            d2 = _squared_distances(data, centers)
            inertia_trace.append(float(d2[np.arange(len(data)), assign].sum()))
    # make the returned labels consistent with the returned centers
    for _ in range(m):
        assign, repaired = _assign_with_repair(data, centers, m)
        if not repaired:
            break
    d2 = _squared_distances(data, centers)
    inertia = float(d2[np.arange(len(data)), assign].sum())
    return centers, assign, inertia


def _tstudent_stats(
    z: np.ndarray, centers: np.ndarray, nu: float
) -> tuple[np.ndarray, np.ndarray]:
    """Soft assignments plus the per-pair kernel denominators 1 + d2/nu."""
    a = 1.0 + _squared_distances(z, centers) / nu
    s = np.power(a, -(nu + 1.0) / 2.0)
    q = s / s.sum(axis=1, keepdims=True)
    return q, a


def kl_grads_wrt_latent(
    z: np.ndarray, centers: np.ndarray, p_rows: np.ndarray, nu: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradients of the per-item-averaged KL(P||Q) wrt z and centers.

    d kl / d z_i = ((nu+1)/nu)/B * sum_j w_ij (mu_j - z_i) with
    w = (q - p) / (1 + d2/nu); the center gradient is its negative sum
    over items.
    """
    q, a = _tstudent_stats(z, centers, nu)
    coef = (nu + 1.0) / nu / z.shape[0]
    w = (q - p_rows) / a
    dz = coef * (w @ centers - w.sum(axis=1, keepdims=True) * z)
    dmu = coef * (w.T @ z - w.sum(axis=0)[:, None] * centers)
    return dz, dmu


def total_loss_and_grads(
    stack: EncoderStack,
    centers: np.ndarray,
    x: np.ndarray,
    target: np.ndarray,
    p_rows: np.ndarray,
    nu: float,
    lambda_: float,
) -> tuple[float, float, float, list, list, np.ndarray]:
    """One clustering-stage objective evaluation with exact gradients.

    Returns (kl, recon, total, encoder grads, decoder grads, center grads)
    for the combined objective; ``p_rows`` is treated as a constant.
    """
    b = x.shape[0]
    z, enc_cache = forward(stack.encoder, x)
    q, _ = _tstudent_stats(z, centers, nu)
    kl, _ = dec_losses(p_rows, q, 0.0, 0.0)

    recon_out, dec_cache = forward(stack.decoder, z)
    diff = recon_out - target
    recon = float(np.sum(np.square(diff), dtype=np.float64) / b)
    total = kl + lambda_ * recon

    dz_kl, dmu = kl_grads_wrt_latent(z, centers, p_rows, nu)
    dec_grads, dz_rec = backward(stack.decoder, dec_cache, 2.0 * diff / b)
    dec_grads = [(lambda_ * dw, lambda_ * db) for dw, db in dec_grads]
    dz = (dz_kl + lambda_ * dz_rec).astype(z.dtype)
    enc_grads, _ = backward(stack.encoder, enc_cache, dz)
    return kl, recon, total, enc_grads, dec_grads, dmu.astype(centers.dtype)


def _reseed_dead_clusters(z: np.ndarray, centers: np.ndarray, q: np.ndarray) -> bool:
    """Move zero-mass centers onto the code of the globally farthest point."""
    mass = q.sum(axis=0)
    dead = np.nonzero(mass <= 0)[0]
    if not len(dead):
        return False
    d2 = _squared_distances(z, centers)
    nearest = d2.min(axis=1)
    for j in dead:
        victim = int(np.argmax(nearest))
        logger.warning("cluster %d lost all soft mass; reseeding to item %d", j, victim)
        centers[j] = z[victim]
        nearest[victim] = 0.0
    return True


def dec_fit(
    stack: EncoderStack,
    inputs: np.ndarray,
    targets: np.ndarray,
    hp: HyperParams,
    gold: list | None = None,
    labels: list | None = None,
    telemetry: list | None = None,
) -> ClusterModel:
    """Fit cluster centers and refine the stack on the joint objective.

    Centers are initialized by KMeans on the encoded inputs. Every
    ``target_update_interval`` iterations the soft assignments are
    recomputed on the full dataset, the target distribution refreshed
    (and held fixed in between) and a telemetry record appended, including
    many-to-one accuracy when ``gold`` labels are supplied.
    """
    n = inputs.shape[0]
    if n < hp.m:
        raise ArgumentError(f"need at least m={hp.m} items, got {n}")
    if targets.shape[0] != n:
        raise ShapeError("inputs and targets disagree on item count")

    z0 = encode(stack, inputs)
    centers, _, _ = kmeans_fit(z0, hp.m, seed=hp.seed, restarts=hp.kmeans_restarts)
    centers = centers.astype(np.float32)

    enc_opt = init_optimizer(stack.encoder, hp.learning_rate, hp.momentum)
    dec_opt = init_optimizer(stack.decoder, hp.learning_rate, hp.momentum)
    center_vel = np.zeros_like(centers)
    rng = RngState(hp.seed + 1)

    p_full: np.ndarray | None = None
    order = np.arange(0)
    cursor = 0
    # overflow shows up as a non-finite total, reported via DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(hp.iterations):
            if it % hp.target_update_interval == 0:
                p_full = _refresh(stack, centers, inputs, targets, hp, it, gold, labels, telemetry)
            if cursor >= len(order):
                order = rng.permutation(n)
                cursor = 0
            idx = order[cursor : cursor + hp.batch_size]
            cursor += hp.batch_size
            kl, recon, total, enc_g, dec_g, dmu = total_loss_and_grads(
                stack, centers, inputs[idx], targets[idx], p_full[idx], hp.nu, hp.lambda_
            )
            if not np.isfinite(total):
                raise DivergenceError(f"clustering stage diverged at iteration {it}")
            sgd_step(stack.encoder, enc_g, enc_opt)
            sgd_step(stack.decoder, dec_g, dec_opt)
            momentum_update(centers, dmu, center_vel, hp.learning_rate, hp.momentum)
    return ClusterModel(
        encoder=stack.encoder, decoder=stack.decoder, centers=centers, nu=hp.nu
    )


def _refresh(
    stack: EncoderStack,
    centers: np.ndarray,
    inputs: np.ndarray,
    targets: np.ndarray,
    hp: HyperParams,
    iteration: int,
    gold: list | None,
    labels: list | None,
    telemetry: list | None,
) -> np.ndarray:
    """Full-dataset Q/P refresh; records telemetry and repairs dead clusters."""
    z = encode(stack, inputs)
    q = soft_assign(z, centers, hp.nu)
    if _reseed_dead_clusters(z, centers, q):
        q = soft_assign(z, centers, hp.nu)
    p = target_distribution(q)
    if telemetry is not None:
        recon_out, _ = forward(stack.decoder, z)
        recon = float(np.sum(np.square(recon_out - targets), dtype=np.float64) / len(z))
        kl, total = dec_losses(p, q, recon, hp.lambda_)
        m1 = None
        if gold is not None:
            m1 = m1_accuracy(contingency(q.argmax(axis=1), gold, m=hp.m, labels=labels))
        telemetry.append(
            RefreshRecord(iteration=iteration, kl=kl, recon=recon, total=total, m1=m1)
        )
    return p


def predict_hard(model: ClusterModel, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hard labels (argmax of q, lowest index wins ties) plus q itself."""
    if data.ndim != 2 or data.shape[1] != model.encoder.input_dim:
        raise ShapeError(
            f"data shape {data.shape} does not match encoder input "
            f"{model.encoder.input_dim}"
        )
    z, _ = forward(model.encoder, data)
    q = soft_assign(z, model.centers, model.nu)
    return q.argmax(axis=1), q


def transfer_apply(model: ClusterModel, foreign: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply a trained model to another dataset without any refitting."""
    if foreign.ndim != 2 or foreign.shape[1] != model.encoder.input_dim:
        dim = foreign.shape[1] if foreign.ndim == 2 else foreign.shape
        raise TransferError(
            f"foreign data has dim {dim}, model expects {model.encoder.input_dim}"
        )
    return predict_hard(model, foreign)
