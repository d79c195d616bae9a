"""Density matrices and their real coefficient tensors.

A state on C^{d1} x ... x C^{dN} is expanded as

    rho = sum x_{i1...iN} lambda^{(1)}_{i1} x ... x lambda^{(N)}_{iN}

with lambda_0 = identity and lambda_1..lambda_{d^2-1} the traceless Hermitian
generators normalised to Tr(lambda_i lambda_j) = 2 delta_ij.  Coefficients are
recovered by orthogonality, x = Tr(rho Lambda) / Tr(Lambda^2), which gives the
1/2^N prefactor for qubits and 1/d for identity slots of qudits.

Public indices are 1-based: slot 1 of every mode is the identity component.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
IMAG_TOL = 1e-10

ORDERINGS = ("gellmann", "pauli")


class InvalidStateError(ValueError):
    """Raised for matrices that are not valid density matrices."""


@dataclass(frozen=True)
class BasisSet:
    """Traceless Hermitian generators of su(d), identity excluded.

    ``generators`` has shape ``(d*d - 1, d, d)``.  The ``gellmann`` ordering is
    omega_0..omega_{d-2}, then u_mn, then v_mn (m < n lexicographic).  The
    ``pauli`` ordering exists for d = 2 only and is (sigma_x, sigma_y, sigma_z).
    """

    d: int
    ordering: str
    generators: np.ndarray = field(repr=False)

    def full(self) -> np.ndarray:
        """Identity followed by the generators, shape ``(d*d, d, d)``."""
        return np.concatenate([np.eye(self.d, dtype=complex)[None], self.generators])

    def norms_squared(self) -> np.ndarray:
        """Tr(lambda_i^2) for the full basis: d for the identity, 2 otherwise."""
        return np.concatenate([[float(self.d)], np.full(self.d * self.d - 1, 2.0)])


@lru_cache(maxsize=None)
def _generators(d: int, ordering: str) -> np.ndarray:
    omegas = []
    for l in range(d - 1):
        diag = np.zeros(d)
        diag[: l + 1] = 1.0
        diag[l + 1] = -(l + 1)
        omegas.append(np.sqrt(2.0 / ((l + 1) * (l + 2))) * np.diag(diag).astype(complex))
    pairs = [(m, n) for m in range(d) for n in range(m + 1, d)]
    us, vs = [], []
    for m, n in pairs:
        u = np.zeros((d, d), dtype=complex)
        u[m, n] = u[n, m] = 1.0
        us.append(u)
        v = np.zeros((d, d), dtype=complex)
        v[m, n] = -1j
        v[n, m] = 1j
        vs.append(v)
    if ordering == "gellmann":
        gens = omegas + us + vs
    else:
        gens = us + vs + omegas
    out = np.array(gens)
    out.flags.writeable = False
    return out


def basis_generators(d: int, ordering: str = "gellmann") -> BasisSet:
    if d < 2:
        raise ValueError(f"subsystem dimension must be >= 2, got {d}")
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown basis ordering {ordering!r}")
    if ordering == "pauli" and d != 2:
        raise ValueError("the pauli ordering is defined for qubits only")
    return BasisSet(d, ordering, _generators(d, ordering))


@dataclass(frozen=True)
class DensityMatrix:
    dims: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        m = np.asarray(self.matrix, dtype=complex)
        size = int(np.prod(dims))
        if not dims or any(d < 2 for d in dims):
            raise InvalidStateError(f"invalid subsystem dimensions {dims}")
        if m.shape != (size, size):
            raise InvalidStateError(f"matrix shape {m.shape} does not match dims {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ValidationReport:
    hermitian_residual: float
    trace_deviation: float
    min_eigenvalue: float

    @property
    def valid(self) -> bool:
        return (
            self.hermitian_residual <= HERMITIAN_TOL
            and self.trace_deviation <= TRACE_TOL
            and self.min_eigenvalue >= -PSD_TOL
        )

    def problems(self) -> list[str]:
        out = []
        if self.hermitian_residual > HERMITIAN_TOL:
            out.append(f"not Hermitian (residual {self.hermitian_residual:.3g})")
        if self.trace_deviation > TRACE_TOL:
            out.append(f"trace deviates from 1 by {self.trace_deviation:.3g}")
        if self.min_eigenvalue < -PSD_TOL:
            out.append(f"negative eigenvalue {self.min_eigenvalue:.3g}")
        return out


def validate_density(m, dims) -> ValidationReport:
    m = np.asarray(m, dtype=complex)
    herm = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    tr = abs(complex(np.trace(m)) - 1.0)
    hpart = 0.5 * (m + m.conj().T)
    min_eig = float(np.linalg.eigvalsh(hpart)[0]) if m.size else 0.0
    return ValidationReport(herm, tr, min_eig)


def checked_density(m, dims) -> DensityMatrix:
    """Build a :class:`DensityMatrix` and raise if it fails validation."""
    rho = DensityMatrix(tuple(dims), m)
    report = validate_density(rho.matrix, rho.dims)
    if not report.valid:
        raise InvalidStateError("; ".join(report.problems()))
    return rho


@dataclass(frozen=True)
class BlochTensor:
    """Real coefficient tensor of shape ``(d1^2, ..., dN^2)``."""

    dims: tuple[int, ...]
    tensor: np.ndarray = field(repr=False)
    ordering: str = "gellmann"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        t = np.asarray(self.tensor, dtype=float)
        if t.shape != tuple(d * d for d in dims):
            raise ValueError(f"tensor shape {t.shape} does not match dims {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "tensor", t)

    @property
    def order(self) -> int:
        return len(self.dims)

    def bases(self) -> list[BasisSet]:
        return [basis_generators(d, self.ordering) for d in self.dims]


def _pair_axes(dims) -> list[int]:
    n = len(dims)
    return [ax for k in range(n) for ax in (k, n + k)]


def extract_coefficient_tensor(rho: DensityMatrix, ordering: str = "gellmann") -> BlochTensor:
    report = validate_density(rho.matrix, rho.dims)
    if not report.valid:
        raise InvalidStateError("; ".join(report.problems()))
    dims = rho.dims
    bases = [basis_generators(d, ordering) for d in dims]
    # axes (a1, b1, a2, b2, ...) so each subsystem's row/column pair is adjacent
    cur = rho.matrix.reshape(dims + dims).transpose(_pair_axes(dims))
    for basis in bases:
        full = basis.full()
        # Tr(rho Lambda) = sum_ab rho[a, b] Lambda[b, a]
        cur = np.tensordot(cur, full, axes=([0, 1], [2, 1]))
    denom = np.ones(())
    for basis in bases:
        denom = np.multiply.outer(denom, basis.norms_squared())
    coeffs = cur / denom
    imag = float(np.max(np.abs(coeffs.imag))) if coeffs.size else 0.0
    if imag > IMAG_TOL:
        raise InvalidStateError(f"coefficients have imaginary part {imag:.3g}")
    return BlochTensor(dims, coeffs.real.copy(), ordering)


def reconstruct_density(bt: BlochTensor) -> DensityMatrix:
    dims = bt.dims
    cur = bt.tensor.astype(complex)
    for basis in bt.bases():
        cur = np.tensordot(cur, basis.full(), axes=([0], [0]))
    # axes are now (a1, b1, a2, b2, ...)
    n = len(dims)
    perm = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    size = int(np.prod(dims))
    return DensityMatrix(dims, cur.transpose(perm).reshape(size, size))


def subtensor_keys(order: int) -> list[tuple[int, ...]]:
    """All non-empty increasing mode tuples, by size then lexicographically."""
    return [
        key
        for m in range(1, order + 1)
        for key in itertools.combinations(range(1, order + 1), m)
    ]


def _check_key(key, order: int) -> tuple[int, ...]:
    key = tuple(int(j) for j in key)
    if not key or any(b <= a for a, b in zip(key, key[1:])) or key[0] < 1 or key[-1] > order:
        raise ValueError(f"invalid subtensor key {key} for {order} subsystems")
    return key


def subtensor(bt: BlochTensor, key) -> np.ndarray:
    """Entries whose non-identity indices sit exactly on the modes in ``key``."""
    key = _check_key(key, bt.order)
    index = tuple(slice(1, None) if k + 1 in key else 0 for k in range(bt.order))
    return bt.tensor[index].copy()
