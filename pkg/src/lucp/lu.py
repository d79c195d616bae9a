"""Local unitary equivalence through coefficient tensors.

Conjugating a subsystem by U rotates its generators, U l_i U^+ = sum_j O_ji l_j,
with O in SO(d^2 - 1).  The coefficient tensor therefore transforms as
X' = (B_1 x ... x B_N) X with B_k = diag(1, O_k).  Deciding LU equivalence
amounts to finding such rotations; any tuple that maps X onto X' is a proof
of equivalence, which is how every ``equivalent`` verdict is certified.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .bloch import (
    BlochTensor,
    DensityMatrix,
    basis_generators,
    extract_coefficient_tensor,
    subtensor,
    subtensor_keys,
)
from .cp import AlsConfig, FitResult, cp_als, estimate_rank, kruskal_check
from .tensor import (
    frobenius_norm,
    k_rank,
    matricize,
    matrix_rank,
    multilinear_apply,
    rank_threshold,
    singular_values,
)

log = logging.getLogger(__name__)

UNITARY_TOL = 1e-10
DEGENERACY_RTOL = 1e-8
PIN_RTOL = 1e-7
# rounding noise floor, relative to ||X|| (vectors) or ||X||^2 (Gram matrices)
NOISE_RTOL = 1e-12


# -- local unitaries ---------------------------------------------------------


def _is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return (
        u.ndim == 2
        and u.shape[0] == u.shape[1]
        and float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) <= tol
    )


@dataclass(frozen=True)
class LocalUnitary:
    """Tensor product of per-subsystem unitaries.

    Factors are rescaled by a global phase so that each has determinant 1;
    this does not change the conjugation action.
    """

    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        fixed = []
        for u in self.factors:
            u = np.asarray(u, dtype=complex)
            if not _is_unitary(u):
                raise ValueError("local unitary factor is not unitary")
            d = u.shape[0]
            fixed.append(u / np.linalg.det(u) ** (1.0 / d))
        object.__setattr__(self, "factors", tuple(fixed))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.factors)

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for u in self.factors:
            out = np.kron(out, u)
        return out


def adjoint_rotation(u, ordering: str = "gellmann") -> np.ndarray:
    """Orthogonal matrix O with U l_i U^+ = sum_j O[j, i] l_j."""
    u = np.asarray(u, dtype=complex)
    if not _is_unitary(u):
        raise ValueError("adjoint_rotation needs a unitary matrix")
    gens = basis_generators(u.shape[0], ordering).generators
    rotated = u @ gens @ u.conj().T
    # O[j, i] = Tr(l_j U l_i U^+) / 2
    o = 0.5 * np.einsum("jab,iba->ji", gens, rotated)
    return o.real.copy()


def block_extend(o: np.ndarray) -> np.ndarray:
    """diag(1, O): acts on a full coefficient mode, identity slot first."""
    n = o.shape[0]
    out = np.eye(n + 1)
    out[1:, 1:] = o
    return out


def apply_local_unitary(rho: DensityMatrix, u: LocalUnitary) -> DensityMatrix:
    if tuple(u.dims) != tuple(rho.dims):
        raise ValueError(f"local unitary dims {u.dims} do not match state dims {rho.dims}")
    m = u.matrix()
    out = m @ rho.matrix @ m.conj().T
    return DensityMatrix(rho.dims, 0.5 * (out + out.conj().T))


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    q = q * (diag / np.abs(diag))
    return q / np.linalg.det(q) ** (1.0 / d)


def random_local_unitary(dims, seed: int) -> LocalUnitary:
    rng = np.random.default_rng(seed)
    return LocalUnitary(tuple(haar_unitary(int(d), rng) for d in dims))


def random_density(dims, seed: int, rank: int | None = None) -> DensityMatrix:
    """Random mixed state G G^+ / Tr from a complex Ginibre matrix."""
    rng = np.random.default_rng(seed)
    size = int(np.prod(dims))
    k = size if rank is None else rank
    g = rng.standard_normal((size, k)) + 1j * rng.standard_normal((size, k))
    m = g @ g.conj().T
    m = m / np.trace(m).real
    return DensityMatrix(tuple(dims), 0.5 * (m + m.conj().T))


# -- invariants ----------------------------------------------------------------


@dataclass(frozen=True)
class ModeInvariants:
    norm: float
    singular_values: np.ndarray


@dataclass(frozen=True)
class CPInvariants:
    rank: int
    exact: bool
    reliable: bool
    k_ranks: tuple[int, ...]
    weights: np.ndarray
    gram_traces: tuple[float, ...]
    kruskal: bool


@dataclass(frozen=True)
class SubtensorInvariants:
    key: tuple[int, ...]
    norm: float
    modes: list[ModeInvariants]
    cp: CPInvariants | None


@dataclass(frozen=True)
class InvariantReport:
    """LU invariants of a coefficient tensor.

    ``cp`` entries are None for order >= 3 tensors when the report was built
    with ``fit_cp=False``; screening only ever needs the exact fields.
    """

    dims: tuple[int, ...]
    norm: float
    modes: list[ModeInvariants]
    subtensors: list[SubtensorInvariants]
    full_cp: CPInvariants | None


def _mode_invariants(t: np.ndarray) -> list[ModeInvariants]:
    out = []
    for n in range(1, t.ndim + 1):
        m = matricize(t, n)
        out.append(ModeInvariants(frobenius_norm(m), singular_values(m)))
    return out


def _cp_invariants(t: np.ndarray, cfg: AlsConfig) -> tuple[CPInvariants, FitResult]:
    rank, fit = estimate_rank(t, cfg)
    cp = fit.cp
    k_ranks = tuple(k_rank(f) for f in cp.factors)
    traces = tuple(float(np.trace(f.T @ f)) for f in cp.factors)
    inv = CPInvariants(
        rank=rank,
        exact=t.ndim <= 2,
        reliable=fit.converged,
        k_ranks=k_ranks,
        weights=cp.weights.copy(),
        gram_traces=traces,
        kruskal=kruskal_check(cp),
    )
    return inv, fit


def compute_invariants(bt: BlochTensor, cfg: AlsConfig = AlsConfig(), fit_cp: bool = True) -> InvariantReport:
    def cp_of(x):
        return _cp_invariants(x, cfg)[0] if fit_cp or x.ndim <= 2 else None

    subs = []
    for key in subtensor_keys(bt.order):
        x = subtensor(bt, key)
        subs.append(SubtensorInvariants(key, frobenius_norm(x), _mode_invariants(x), cp_of(x)))
    full_cp = cp_of(bt.tensor)
    return InvariantReport(
        dims=bt.dims,
        norm=frobenius_norm(bt.tensor),
        modes=_mode_invariants(bt.tensor),
        subtensors=subs,
        full_cp=full_cp,
    )


@dataclass(frozen=True)
class Mismatch:
    reason: str
    field: str
    deviation: float


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _vec_deviation(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        return float("inf")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def screen_invariants(a: InvariantReport, b: InvariantReport, tol: float = 1e-8) -> Mismatch | None:
    """First violated necessary condition for LU equivalence, if any.

    Only norms, singular values and exactly computed (order <= 2) ranks and
    weights can produce a mismatch.  Quantities that come from ALS fits are
    compared at 10 * tol and only logged.
    """
    if tuple(a.dims) != tuple(b.dims):
        raise ValueError(f"reports have different dims {a.dims} and {b.dims}")
    if not _close(a.norm, b.norm, tol):
        return Mismatch("norm-mismatch", "norm", abs(a.norm - b.norm))
    for n, (ma, mb) in enumerate(zip(a.modes, b.modes), start=1):
        if not _close(ma.norm, mb.norm, tol):
            return Mismatch("norm-mismatch", f"modes[{n}].norm", abs(ma.norm - mb.norm))
    for n, (ma, mb) in enumerate(zip(a.modes, b.modes), start=1):
        dev = _vec_deviation(ma.singular_values, mb.singular_values)
        if dev > tol * max(1.0, a.norm):
            return Mismatch("singular-value-mismatch", f"modes[{n}].singular_values", dev)
    for sa, sb in zip(a.subtensors, b.subtensors):
        name = "X" + "".join(str(j) for j in sa.key)
        if not _close(sa.norm, sb.norm, tol):
            return Mismatch("norm-mismatch", f"{name}.norm", abs(sa.norm - sb.norm))
        for n, (ma, mb) in enumerate(zip(sa.modes, sb.modes), start=1):
            dev = _vec_deviation(ma.singular_values, mb.singular_values)
            if dev > tol * max(1.0, sa.norm):
                return Mismatch("singular-value-mismatch", f"{name}.modes[{n}]", dev)
        if sa.cp is not None and sa.cp.exact:
            if sa.cp.rank != sb.cp.rank:
                return Mismatch("rank-mismatch", f"{name}.rank", abs(sa.cp.rank - sb.cp.rank))
            dev = _vec_deviation(sa.cp.weights, sb.cp.weights)
            if dev > tol * max(1.0, sa.norm):
                return Mismatch("weight-mismatch", f"{name}.weights", dev)
    soft_tol = 10 * tol
    pairs = [(f"X{''.join(map(str, s.key))}", s.cp, t.cp) for s, t in zip(a.subtensors, b.subtensors)]
    pairs.append(("full", a.full_cp, b.full_cp))
    for name, ca, cb in pairs:
        if ca is None or cb is None or ca.exact or not (ca.reliable and cb.reliable):
            continue
        if ca.rank != cb.rank or ca.k_ranks != cb.k_ranks:
            log.info("ALS-derived rank data differ for %s: %s vs %s", name,
                     (ca.rank, ca.k_ranks), (cb.rank, cb.k_ranks))
        elif _vec_deviation(ca.weights, cb.weights) > soft_tol * max(1.0, float(np.max(ca.weights, initial=0))):
            log.info("ALS-derived weights differ for %s", name)
    return None


# -- Gram criteria ---------------------------------------------------------------


@dataclass(frozen=True)
class GramCheck:
    ok: bool
    reason: str | None = None
    where: str = ""

    def __bool__(self) -> bool:
        return self.ok


def factor_family(bt: BlochTensor, cfg: AlsConfig = AlsConfig()) -> dict[tuple[int, ...], list[np.ndarray]]:
    """Canonical CP factors of every subtensor, weights folded into the first factor."""
    family = {}
    for key in subtensor_keys(bt.order):
        _, fit = estimate_rank(subtensor(bt, key), cfg)
        cp = fit.cp
        factors = [f.copy() for f in cp.factors]
        factors[0] = factors[0] * cp.weights
        family[key] = factors
    return family


def gram_criteria(family_a, family_b, tol: float = 1e-8) -> GramCheck:
    """Compare (A^J_j)^T A^K_j between two factor families.

    Families map subtensor keys to factor matrices (one per mode of the key).
    Every pair of keys J, K sharing a mode j is checked, J == K included.
    """
    if set(family_a) != set(family_b):
        return GramCheck(False, "missing-subtensor")
    for key in family_a:
        ra = {f.shape[1] for f in family_a[key]}
        rb = {f.shape[1] for f in family_b[key]}
        if ra != rb or len(ra) != 1:
            return GramCheck(False, "rank-mismatch", str(key))
    keys = sorted(family_a, key=lambda k: (len(k), k))
    for kj, kk in itertools.combinations_with_replacement(keys, 2):
        for j in sorted(set(kj) & set(kk)):
            fa = np.asarray(family_a[kj][kj.index(j)]).T @ np.asarray(family_a[kk][kk.index(j)])
            fb = np.asarray(family_b[kj][kj.index(j)]).T @ np.asarray(family_b[kk][kk.index(j)])
            if fa.shape != fb.shape:
                return GramCheck(False, "shape-mismatch", f"{kj}/{kk} mode {j}")
            scale = max(1.0, float(np.max(np.abs(fa), initial=0)))
            if fa.size and float(np.max(np.abs(fa - fb))) > tol * scale:
                return GramCheck(False, "gram-mismatch", f"{kj}/{kk} mode {j}")
    return GramCheck(True)


# -- orthogonal alignment ----------------------------------------------------------


@dataclass(frozen=True)
class Alignment:
    matrix: np.ndarray
    proper: bool
    rank: int
    residual: float


def solve_orthogonal_alignment(a, a_prime, tol: float = 1e-8) -> Alignment | None:
    """Orthogonal O with O A = A', or None when the Gram matrices differ.

    With A = U S V^T the image frame is U' = A' V S^-1, so singular vectors
    stay consistently paired even for repeated singular values.  On the
    orthogonal complement of the column space O is completed so that
    det O = +1; if the column space is everything and det(U' U^T) = -1 the
    result is returned with ``proper=False``.
    """
    a = np.asarray(a, dtype=float)
    ap = np.asarray(a_prime, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
        ap = ap[:, None]
    if a.shape != ap.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {ap.shape}")
    n = a.shape[0]
    ga = a.T @ a
    gb = ap.T @ ap
    scale = max(1.0, float(np.max(np.abs(ga), initial=0)))
    if ga.size and float(np.max(np.abs(ga - gb))) > tol * scale:
        return None
    u_full, s, vt = np.linalg.svd(a, full_matrices=True)
    r = int(np.sum(s >= rank_threshold(s[0]))) if s.size else 0
    u = u_full[:, :r]
    up = ap @ vt[:r].T / s[:r]
    # re-orthonormalise against rounding
    if r:
        uu, _, uvt = np.linalg.svd(up, full_matrices=False)
        up = uu @ uvt
    o = up @ u.T
    if r < n:
        q = u_full[:, r:]
        qp_full = np.linalg.svd(np.eye(n) - up @ up.T)[0]
        qp = qp_full[:, : n - r]
        o = o + qp @ q.T
        if np.linalg.det(o) < 0:
            qp = qp.copy()
            qp[:, -1] *= -1
            o = up @ u.T + qp @ q.T
    proper = bool(np.linalg.det(o) > 0)
    residual = float(np.linalg.norm(o @ a - ap))
    return Alignment(o, proper, r, residual)


# -- decision ------------------------------------------------------------------------


class Verdict(str, enum.Enum):
    EQUIVALENT = "equivalent"
    NOT_EQUIVALENT = "not_equivalent"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    reason: str | None = None
    residual: float | None = None
    witnesses: list[np.ndarray] | None = None
    detail: str = ""


@dataclass(frozen=True)
class CheckConfig:
    tol: float = 1e-8
    als: AlsConfig = field(default_factory=AlsConfig)
    max_candidates: int = 256
    ordering: str = "gellmann"


def _free_unfolding(t: np.ndarray, k: int, known) -> np.ndarray:
    """Mode-k rows (identity slot dropped) over columns whose unknown modes are identity."""
    idx = tuple(
        slice(1, None) if m == k else (slice(None) if m in known else 0) for m in range(t.ndim)
    )
    sub = t[idx]
    pos = sum(1 for m in range(k) if m in known)
    return matricize(sub, pos + 1)


def _subtensor_grams(t: np.ndarray, k: int) -> list[np.ndarray]:
    grams = []
    others = [m for m in range(t.ndim) if m != k]
    for size in range(len(others) + 1):
        for extra in itertools.combinations(others, size):
            modes = sorted((k,) + extra)
            idx = tuple(slice(1, None) if m in modes else 0 for m in range(t.ndim))
            u = matricize(np.atleast_1d(t[idx]), modes.index(k) + 1)
            grams.append(u @ u.T)
    return grams


@dataclass
class _Frame:
    data: np.ndarray
    pinned: np.ndarray
    ambiguous: np.ndarray
    signature: tuple


def _frame(t: np.ndarray, k: int, known) -> _Frame:
    """Orthonormal frame of mode k built from quantities that rotate with O_k.

    The eigenspaces of the covariant Gram matrices split the space; inside
    each piece, projections of covariant vectors fix directions including
    their sign.  Whatever is left is returned as ``ambiguous``.
    """
    n = t.shape[k] - 1
    tnorm = frobenius_norm(t)
    m = _free_unfolding(t, k, known)
    grams = []
    for g in [m @ m.T] + _subtensor_grams(t, k):
        gscale = float(np.max(np.abs(g), initial=0.0))
        # Gram matrices of blocks that vanish up to rounding carry no information
        if gscale > NOISE_RTOL * tnorm * tnorm:
            grams.append(g / gscale)
    clusters = [np.eye(n)]
    shape_sig = []
    for g in grams:
        new = []
        for q in clusters:
            if q.shape[1] == 1:
                new.append(q)
                continue
            w, v = np.linalg.eigh(q.T @ g @ q)
            start = 0
            for i in range(1, len(w) + 1):
                if i == len(w) or w[i] - w[i - 1] > DEGENERACY_RTOL:
                    new.append(q @ v[:, start:i])
                    shape_sig.append(i - start)
                    start = i
        clusters = new
    vecs = list(m.T) + [row for g in grams for row in (g @ m).T]
    vscale = max((float(np.linalg.norm(v)) for v in vecs), default=0.0)
    pinned, ambiguous, pin_sig = [], [], []
    for q in clusters:
        basis = []
        if vscale > NOISE_RTOL * max(tnorm, 1.0):
            for v in vecs:
                if len(basis) == q.shape[1]:
                    break
                p = q @ (q.T @ v)
                for b in basis:
                    p = p - b * (b @ p)
                nrm = float(np.linalg.norm(p))
                if nrm > PIN_RTOL * vscale:
                    basis.append(p / nrm)
        pinned.extend(basis)
        pin_sig.append(len(basis))
        rest = q.shape[1] - len(basis)
        if rest:
            b = np.array(basis).T if basis else np.zeros((n, 0))
            resid = q - b @ (b.T @ q)
            ambiguous.extend(np.linalg.svd(resid, full_matrices=False)[0][:, :rest].T)
    as_mat = lambda vs: np.array(vs).T if vs else np.zeros((n, 0))
    return _Frame(m, as_mat(pinned), as_mat(ambiguous), (tuple(shape_sig), tuple(pin_sig)))


def _apply_known(x: np.ndarray, known: dict[int, np.ndarray]) -> np.ndarray:
    mats = [block_extend(known[m]) if m in known else np.eye(x.shape[m]) for m in range(x.ndim)]
    return multilinear_apply(mats, x)


class _Budget:
    """Counts candidate rotations tried across the whole search."""

    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0
        self.best_residual = np.inf


def _search(x, xp, known, tol, budget: _Budget):
    order = x.ndim
    y = _apply_known(x, known)
    vtol = tol * max(1.0, frobenius_norm(x))
    if len(known) == order:
        residual = float(np.max(np.abs(y - xp)))
        budget.best_residual = min(budget.best_residual, residual)
        return (dict(known), residual) if residual <= vtol else None
    best = None
    for k in range(order):
        if k in known:
            continue
        fa = _frame(y, k, known)
        fb = _frame(xp, k, known)
        if fa.signature != fb.signature or fa.ambiguous.shape != fb.ambiguous.shape:
            return None
        if best is None or fa.ambiguous.shape[1] < best[1].ambiguous.shape[1]:
            best = (k, fa, fb)
    k, fa, fb = best
    scale = max(float(np.linalg.norm(fa.data)), float(np.linalg.norm(fb.data)))
    if scale > NOISE_RTOL * max(1.0, frobenius_norm(x)):
        da, db = fa.data / scale, fb.data / scale
    else:
        da, db = fa.data[:, :0], fb.data[:, :0]
    n_amb = fa.ambiguous.shape[1]
    free = max(n_amb - 1, 0)
    for signs in itertools.product((1.0, -1.0), repeat=free):
        if budget.used >= budget.limit:
            return None
        budget.used += 1
        a = np.hstack([da, fa.pinned, fa.ambiguous[:, :free] * np.array(signs)])
        b = np.hstack([db, fb.pinned, fb.ambiguous[:, :free]])
        al = solve_orthogonal_alignment(a, b, tol)
        if al is None or not al.proper:
            continue
        found = _search(x, xp, {**known, k: al.matrix}, tol, budget)
        if found is not None:
            return found
    return None


def _generic(bt: BlochTensor, cfg: AlsConfig) -> bool:
    """Operational genericity: full-rank pair blocks and an essentially unique CP."""
    for key in subtensor_keys(bt.order):
        if len(key) == 2:
            x = subtensor(bt, key)
            if matrix_rank(x) < min(x.shape):
                return False
    x = bt.tensor
    if x.ndim == 1:
        return True
    if x.ndim == 2:
        # a matrix CP is its SVD, unique exactly when the singular values are distinct
        s = singular_values(x)
        s = s[s >= rank_threshold(s[0])]
        return bool(np.all(np.diff(s) < -DEGENERACY_RTOL * s[0]))
    # sum_n k_n >= 2R + N - 1 with k_n <= n_n caps the ranks worth fitting
    bound = (sum(x.shape) - x.ndim + 1) // 2
    r_min = max(matrix_rank(matricize(x, n)) for n in range(1, x.ndim + 1))
    target = (1e-8 * frobenius_norm(x)) ** 2
    for r in range(r_min, bound + 1):
        fit = cp_als(x, r, cfg, target_loss=target)
        if fit.loss < target:
            return kruskal_check(fit.cp)
    return False


def find_witnesses(bt_a: BlochTensor, bt_b: BlochTensor, tol: float = 1e-8, max_candidates: int = 256):
    """Search for rotations O_k with (diag(1,O_1) x ...) X_a = X_b.

    Returns ``(witnesses, residual, candidates_tried)``; witnesses is None
    when no verified tuple was found.
    """
    x, xp = bt_a.tensor, bt_b.tensor
    if np.array_equal(x, xp):
        return [np.eye(d * d - 1) for d in bt_a.dims], 0.0, 1
    budget = _Budget(max_candidates)
    found = _search(x, xp, {}, tol, budget)
    if found is None:
        return None, budget.best_residual, budget.used
    known, residual = found
    return [known[k] for k in range(x.ndim)], residual, budget.used


def check_lu_equivalence(rho_a: DensityMatrix, rho_b: DensityMatrix,
                         cfg: CheckConfig = CheckConfig()) -> Decision:
    if tuple(rho_a.dims) != tuple(rho_b.dims):
        raise ValueError(f"states have different dims {rho_a.dims} and {rho_b.dims}")
    bt_a = extract_coefficient_tensor(rho_a, cfg.ordering)
    bt_b = extract_coefficient_tensor(rho_b, cfg.ordering)
    # ALS-derived fields can never separate states, so screening skips them
    rep_a = compute_invariants(bt_a, cfg.als, fit_cp=False)
    rep_b = compute_invariants(bt_b, cfg.als, fit_cp=False)
    mismatch = screen_invariants(rep_a, rep_b, cfg.tol)
    if mismatch is not None:
        return Decision(Verdict.NOT_EQUIVALENT, mismatch.reason, None, None,
                        f"{mismatch.field} differs by {mismatch.deviation:.3e}")
    witnesses, residual, tried = find_witnesses(bt_a, bt_b, cfg.tol, cfg.max_candidates)
    if witnesses is not None:
        return Decision(Verdict.EQUIVALENT, None, residual, witnesses,
                        f"verified after {tried} candidate(s)")
    residual = None if not np.isfinite(residual) else residual
    if not (_generic(bt_a, cfg.als) and _generic(bt_b, cfg.als)):
        return Decision(Verdict.INCONCLUSIVE, "non-generic", residual, None,
                        f"no witness among {tried} candidate(s); genericity preconditions fail")
    reason = "candidate-limit" if tried >= cfg.max_candidates else "alignment-failed"
    return Decision(Verdict.INCONCLUSIVE, reason, residual, None,
                    f"no witness among {tried} candidate(s)")
