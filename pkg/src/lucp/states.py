"""Reference states and unitaries used in the golden tests and scripts."""

from __future__ import annotations

import numpy as np

from .bloch import DensityMatrix


def _ket(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits))
    v[int(bits, 2)] = 1.0
    return v


def werner_qutrit(z: float) -> DensityMatrix:
    """(1 - z)/9 I + z |psi><psi| with |psi> = (|00> + |11> + |22>)/sqrt(3)."""
    psi = np.zeros(9)
    psi[[0, 4, 8]] = 1.0 / np.sqrt(3.0)
    return DensityMatrix((3, 3), (1.0 - z) / 9.0 * np.eye(9) + z * np.outer(psi, psi))


def three_qubit_rho() -> DensityMatrix:
    psi = (_ket("000") + _ket("111")) / np.sqrt(2.0)
    m = 2.0 * np.outer(psi, psi)
    for bits, w in [("001", 1.0), ("010", 1.0), ("011", 2.0), ("100", 0.5), ("101", 1.0), ("110", 1.0)]:
        k = _ket(bits)
        m = m + w * np.outer(k, k)
    return DensityMatrix((2, 2, 2), 2.0 / 17.0 * m)


def three_qubit_tau() -> DensityMatrix:
    h, q = 0.5, 0.25
    m = np.array([
        [1, 0, 0, 0, 0, h, 0, h],
        [0, 1.5, 0, h, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, -h, 0, -h],
        [0, h, 0, 1.5, 0, 0, 0, 0],
        [0, 0, 0, 0, 0.75, 0, q, 0],
        [h, 0, -h, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, q, 0, 0.75, 0],
        [h, 0, -h, 0, 0, 0, 0, 1],
    ])
    return DensityMatrix((2, 2, 2), 2.0 / 17.0 * m)


# unitaries relating the reference pairs
QUTRIT_U1 = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=complex)
QUTRIT_U2 = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=complex)
QUBIT_U2 = 0.5 * np.array([[1 + 1j, 1 + 1j], [-1 - 1j, 1 + 1j]])
