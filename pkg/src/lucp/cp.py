"""CP decompositions by alternating least squares.

The loss reported everywhere is the squared Frobenius distance
``sum (x - w)^2`` between the tensor and the CP model.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .tensor import (
    fold,
    frobenius_norm,
    k_rank,
    khatri_rao_chain,
    matricize,
    matrix_rank,
    outer_product,
    rank_threshold,
)

log = logging.getLogger(__name__)

PINV_RTOL = 1e-12
RANK_CAP = 16
# a fit whose squared loss drops below this fraction of ||X||^2 is exact
EXACT_FIT = 1e-30


@dataclass(frozen=True)
class AlsConfig:
    max_iters: int = 500
    rel_tol: float = 1e-10
    restarts: int = 20
    seed: int = 0
    init: str = "unfolding-svd"

    def __post_init__(self):
        if self.max_iters < 1 or self.restarts < 1 or self.rel_tol <= 0:
            raise ValueError(f"invalid ALS configuration {self}")
        if self.init not in ("unfolding-svd", "random-gaussian"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class CPDecomposition:
    weights: np.ndarray
    factors: list[np.ndarray]
    shape: tuple[int, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        fs = [np.asarray(f, dtype=float).reshape(np.shape(f)[0], w.size) for f in self.factors]
        shape = tuple(self.shape) or tuple(f.shape[0] for f in fs)
        if len(fs) != len(shape) or any(f.shape != (n, w.size) for f, n in zip(fs, shape)):
            raise ValueError("factor shapes do not match the weights and target shape")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "factors", fs)
        object.__setattr__(self, "shape", tuple(int(s) for s in shape))

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def order(self) -> int:
        return len(self.shape)

    @classmethod
    def zero(cls, shape) -> "CPDecomposition":
        shape = tuple(shape)
        return cls(np.zeros(0), [np.zeros((n, 0)) for n in shape], shape)


@dataclass(frozen=True)
class FitResult:
    cp: CPDecomposition
    loss: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def cp_reconstruct(cp: CPDecomposition) -> np.ndarray:
    if cp.rank == 0:
        return np.zeros(cp.shape)
    first = cp.factors[0] * cp.weights
    if cp.order == 1:
        return first.sum(axis=1)
    rest = khatri_rao_chain(cp.factors[:0:-1])
    return fold(first @ rest.T, 1, cp.shape)


def cp_loss(cp: CPDecomposition, t: np.ndarray) -> float:
    t = np.asarray(t, dtype=float)
    if t.shape != cp.shape:
        raise ValueError(f"shape mismatch: tensor {t.shape} vs decomposition {cp.shape}")
    return float(np.sum((t - cp_reconstruct(cp)) ** 2))


def _lex_cmp(a: np.ndarray, b: np.ndarray, tol: float) -> int:
    for x, y in zip(a, b):
        if abs(x - y) > tol:
            return -1 if x < y else 1
    return 0


def cp_canonicalize(cp: CPDecomposition) -> CPDecomposition:
    """Fix the scaling, sign and permutation freedom of a CP model.

    Columns get unit norm with norms absorbed into the weights, weights are
    made non-negative through the last factor, and for every factor but the
    last the first largest-magnitude entry of each column is made
    non-negative (compensated in the last factor).  Components are then
    sorted by decreasing weight, ties by the first factor's columns.
    """
    if cp.rank == 0:
        return cp
    weights = cp.weights.copy()
    factors = [f.copy() for f in cp.factors]
    last = cp.order - 1
    for f in factors:
        norms = np.linalg.norm(f, axis=0)
        for r, nrm in enumerate(norms):
            if nrm > 0:
                f[:, r] /= nrm
                weights[r] *= nrm
            else:
                f[:, r] = 0.0
                f[0, r] = 1.0
                weights[r] = 0.0
    neg = weights < 0
    weights[neg] *= -1
    factors[last][:, neg] *= -1
    for f in factors[:last]:
        for r in range(cp.rank):
            col = np.abs(f[:, r])
            i = int(np.argmax(col >= col.max() * (1 - 1e-9)))
            if f[i, r] < 0:
                f[:, r] *= -1
                factors[last][:, r] *= -1

    scale = max(1.0, float(weights.max()))

    def cmp(r, s):
        if abs(weights[r] - weights[s]) > 1e-12 * scale:
            return -1 if weights[r] > weights[s] else 1
        return _lex_cmp(factors[0][:, r], factors[0][:, s], 1e-12)

    order = sorted(range(cp.rank), key=functools.cmp_to_key(cmp))
    return CPDecomposition(weights[order], [f[:, order] for f in factors], cp.shape)


# The fitting routines run every restart at once: factor n is stored as an
# array of shape (restarts, n_n, R) and weights as (restarts, R).


def _batched_kr(mats):
    out = mats[0]
    for m in mats[1:]:
        b, p, r = out.shape
        out = (out[:, :, None, :] * m[:, None, :, :]).reshape(b, p * m.shape[1], r)
    return out


def _others_kr(factors, n):
    # A_N kr ... kr A_{n+1} kr A_{n-1} kr ... kr A_1  (n is 0-based)
    return _batched_kr([factors[m] for m in range(len(factors) - 1, -1, -1) if m != n])


def _normalize(a):
    lam = np.sqrt(np.einsum("bnr,bnr->br", a, a))
    return a / np.where(lam > 0, lam, 1.0)[:, None, :], lam


def _gram(a):
    return np.swapaxes(a, 1, 2) @ a


def _psd_pinv(g):
    # pseudo-inverse of symmetric PSD matrices, cutoff PINV_RTOL * largest eigenvalue
    w, q = np.linalg.eigh(g)
    keep = w > PINV_RTOL * w[:, -1:]
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    return (q * inv[:, None, :]) @ np.swapaxes(q, 1, 2)


def _polar(m):
    u, _, vt = np.linalg.svd(m, full_matrices=False)
    return u @ vt


def _sq_loss(last_unfolding, factors, weights):
    n = len(factors) - 1
    fitted = (factors[n] * weights[:, None, :]) @ np.swapaxes(_others_kr(factors, n), 1, 2)
    return np.sum((last_unfolding - fitted) ** 2, axis=(1, 2))


def _init_factors(t, rank, seeds, svd_start: bool, orthogonal: bool):
    rngs = [np.random.default_rng(s) for s in seeds]
    draws = [[rng.standard_normal((n, rank)) for n in t.shape] for rng in rngs]
    factors = []
    for n in range(t.ndim):
        a = np.stack([d[n] for d in draws])
        if svd_start:
            u = np.linalg.svd(matricize(t, n + 1), full_matrices=False)[0]
            k = min(rank, u.shape[1])
            a[0, :, :k] = u[:, :k]
        if orthogonal:
            q, r = np.linalg.qr(a)
            a = q * np.where(np.diagonal(r, axis1=1, axis2=2) < 0, -1.0, 1.0)[:, None, :]
        else:
            a, _ = _normalize(a)
        factors.append(a)
    return factors


def _sweep(unfoldings, factors, weights, grams, orthogonal):
    """One pass over all modes; returns the weights and the last mode's residual loss."""
    nmodes = len(factors)
    for n in range(nmodes):
        kr = _others_kr(factors, n)
        mt = unfoldings[n] @ kr
        if orthogonal:
            # polar factor of the weight-scaled update; bare update while weights vanish
            live = np.any(weights != 0, axis=1)[:, None, None]
            factors[n] = _polar(np.where(live, mt * weights[:, None, :], mt))
            weights = np.einsum("bnr,bnr->br", factors[n], mt)
        else:
            v = np.prod([grams[m] for m in range(nmodes) if m != n], axis=0)
            factors[n], weights = _normalize(mt @ _psd_pinv(v))
            grams[n] = _gram(factors[n])
    fitted = (factors[-1] * weights[:, None, :]) @ np.swapaxes(kr, 1, 2)
    return weights, np.sum((unfoldings[-1] - fitted) ** 2, axis=(1, 2))


def _extrapolate(factors, weights, prev_factors, prev_weights, step, last_unfolding):
    """Line search along the direction of the last sweep; returns trial state and loss."""
    full = [f.copy() for f in factors]
    full[-1] = full[-1] * weights[:, None, :]
    old = [f.copy() for f in prev_factors]
    old[-1] = old[-1] * prev_weights[:, None, :]
    trial = [f + step * (f - o) for f, o in zip(full, old)]
    weights_t = np.ones_like(weights)
    for n in range(len(trial)):
        trial[n], lam = _normalize(trial[n])
        weights_t = weights_t * lam
    return trial, weights_t, _sq_loss(last_unfolding, trial, weights_t)


def _als_run(t, unfoldings, factors, weights, cfg: AlsConfig, orthogonal: bool, target_loss):
    """Iterate all restarts until each meets the stopping rule.

    Plain ALS sweeps are followed by an extrapolation step ``x + s (x - x_prev)``
    with ``s = it^(1/3)``, kept only when it lowers the loss, which shortens
    the slow stretches ("swamps") of ALS without breaking monotonicity.
    Restarts that stop are taken out of the working batch.
    """
    norm2 = float(np.sum(t * t))
    nb = weights.shape[0]
    out_factors = [f.copy() for f in factors]
    out_weights = weights.copy()
    converged = np.zeros(nb, dtype=bool)
    iters = np.zeros(nb, dtype=int)
    history = [[] for _ in range(nb)]
    idx = np.arange(nb)
    grams = [_gram(f) for f in factors]
    prev_loss = np.full(nb, np.inf)
    for it in range(1, cfg.max_iters + 1):
        before = [f.copy() for f in factors]
        before_w = weights.copy()
        weights, loss = _sweep(unfoldings, factors, weights, grams, orthogonal)
        if not orthogonal and it > 2:
            trial, trial_w, trial_loss = _extrapolate(factors, weights, before, before_w,
                                                      it ** (1.0 / 3.0), unfoldings[-1])
            take = trial_loss < loss
            if np.any(take):
                for n in range(len(factors)):
                    factors[n] = np.where(take[:, None, None], trial[n], factors[n])
                    grams[n] = _gram(factors[n])
                weights = np.where(take[:, None], trial_w, weights)
                loss = np.where(take, trial_loss, loss)
        for j, b in enumerate(idx):
            history[b].append(float(loss[j]))
        iters[idx] = it
        done = (loss <= EXACT_FIT * norm2) | (prev_loss - loss < cfg.rel_tol * prev_loss)
        if target_loss is not None:
            done |= loss <= target_loss
        if it == cfg.max_iters or np.any(done):
            for n in range(len(factors)):
                out_factors[n][idx] = factors[n]
            out_weights[idx] = weights
        converged[idx] = done
        if target_loss is not None and np.any(loss <= target_loss):
            break
        keep = ~done
        if not np.any(keep):
            break
        if not np.all(keep):
            idx = idx[keep]
            factors = [f[keep] for f in factors]
            grams = [g[keep] for g in grams]
            weights = weights[keep]
            loss = loss[keep]
        prev_loss = loss
    return out_factors, out_weights, history, iters, converged


def _fit(t, rank, cfg, orthogonal, target_loss=None) -> FitResult:
    t = np.asarray(t, dtype=float)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if orthogonal and rank > min(t.shape):
        raise ValueError(f"orthogonal rank {rank} exceeds the smallest mode size {min(t.shape)}")
    if not np.any(t):
        cp = CPDecomposition(np.zeros(rank), [np.eye(n, 1) @ np.ones((1, rank)) for n in t.shape],
                             t.shape)
        return FitResult(cp, 0.0, 0, True, [0.0])
    unfoldings = [matricize(t, n) for n in range(1, t.ndim + 1)]
    seeds = [cfg.seed + i for i in range(cfg.restarts)]
    factors = _init_factors(t, rank, seeds, cfg.init == "unfolding-svd", orthogonal)
    if orthogonal:
        weights = np.einsum("bnr,bnr->br", factors[0], unfoldings[0] @ _others_kr(factors, 0))
    else:
        weights = np.ones((cfg.restarts, rank))
    factors, weights, history, iters, converged = _als_run(
        t, unfoldings, factors, weights, cfg, orthogonal, target_loss
    )
    best = None
    for b in range(cfg.restarts):
        cp = CPDecomposition(weights[b], [f[b] for f in factors], t.shape)
        key = (cp_loss(cp, t), b)
        if best is None or key < best[0]:
            best = (key, cp)
    (loss, b), cp = best
    log.debug("cp fit rank=%d orthogonal=%s loss=%.3e restart=%d", rank, orthogonal, loss, b)
    return FitResult(cp_canonicalize(cp), loss, int(iters[b]), bool(converged[b]), history[b])


def cp_als(t, rank: int, cfg: AlsConfig = AlsConfig(), target_loss: float | None = None) -> FitResult:
    """Fit a rank-``rank`` CP model; best of ``cfg.restarts`` runs.

    Each sweep replaces factor n by ``X_(n) K (V)^+`` where K is the
    Khatri-Rao product of the other factors and V the Hadamard product of
    their Gram matrices.  Restart i is seeded with ``cfg.seed + i``; the
    first one starts from leading singular vectors of the unfoldings when
    ``cfg.init == "unfolding-svd"``.  If ``target_loss`` is given, fitting
    stops as soon as one run reaches it.
    """
    return _fit(t, rank, cfg, False, target_loss)


def cp_als_orthogonal(t, rank: int, cfg: AlsConfig = AlsConfig(),
                      target_loss: float | None = None) -> FitResult:
    """CP fit with orthonormal factor columns.

    Factor n is the polar factor of ``X_(n) K diag(weights)``, the exact
    minimiser over matrices with orthonormal columns; weights are then the
    projections ``<X, H_r>`` onto the (orthonormal) rank-one summands.
    """
    return _fit(t, rank, cfg, True, target_loss)


def estimate_rank(t, cfg: AlsConfig = AlsConfig(), loss_threshold: float = 1e-8):
    """Smallest R whose best fit has ``||X - W|| / ||X|| < loss_threshold``.

    Returns ``(rank, FitResult)``.  Order-1 and order-2 tensors are handled
    exactly.  For higher orders the search starts at the largest mode-n rank
    (a lower bound on the CP rank) and stops at ``prod(shape) / max(shape)``,
    capped at 16; if nothing fits, the cap is reported with
    ``converged=False``.
    """
    if loss_threshold <= 0:
        raise ValueError("loss_threshold must be positive")
    t = np.asarray(t, dtype=float)
    norm = frobenius_norm(t)
    if norm == 0:
        return 0, FitResult(CPDecomposition.zero(t.shape), 0.0, 0, True, [])
    if t.ndim == 1:
        if norm < rank_threshold(norm):
            return 0, FitResult(CPDecomposition.zero(t.shape), norm * norm, 0, True, [])
        cp = cp_canonicalize(CPDecomposition(np.ones(1), [t.reshape(-1, 1)], t.shape))
        return 1, FitResult(cp, 0.0, 0, True, [])
    if t.ndim == 2:
        u, s, vt = np.linalg.svd(t, full_matrices=False)
        r = int(np.sum(s >= rank_threshold(s[0])))
        if r == 0:
            return 0, FitResult(CPDecomposition.zero(t.shape), norm * norm, 0, True, [])
        cp = cp_canonicalize(CPDecomposition(s[:r], [u[:, :r], vt[:r].T], t.shape))
        return r, FitResult(cp, cp_loss(cp, t), 0, True, [])
    r_max = min(RANK_CAP, int(np.prod(t.shape)) // max(t.shape))
    r_min = max(matrix_rank(matricize(t, n)) for n in range(1, t.ndim + 1))
    if r_min == 0:
        return 0, FitResult(CPDecomposition.zero(t.shape), norm * norm, 0, True, [])
    target = (loss_threshold * norm) ** 2
    best = None
    for r in range(r_min, r_max + 1):
        fit = cp_als(t, r, cfg, target_loss=target)
        if fit.loss < target:
            return r, fit
        best = fit
    return r_max, replace(best, converged=False)


def kruskal_check(cp: CPDecomposition) -> bool:
    """Sufficient uniqueness condition sum_n k(A_n) >= 2R + (N - 1)."""
    if cp.rank == 0:
        return True
    total = sum(k_rank(f) for f in cp.factors)
    return total >= 2 * cp.rank + (cp.order - 1)


def rank_one(vectors, weight: float = 1.0) -> CPDecomposition:
    """Single-component decomposition from a list of vectors."""
    vecs = [np.asarray(v, dtype=float).reshape(-1, 1) for v in vectors]
    return CPDecomposition(np.array([weight]), vecs, tuple(v.shape[0] for v in vecs))


__all__ = [
    "AlsConfig",
    "CPDecomposition",
    "FitResult",
    "cp_als",
    "cp_als_orthogonal",
    "cp_canonicalize",
    "cp_loss",
    "cp_reconstruct",
    "estimate_rank",
    "kruskal_check",
    "outer_product",
    "rank_one",
]
