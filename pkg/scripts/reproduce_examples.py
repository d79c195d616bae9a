"""Recompute the qutrit Werner and three-qubit reference examples and print the checks."""

import numpy as np

from lucp import (
    CheckConfig,
    LocalUnitary,
    adjoint_rotation,
    apply_local_unitary,
    block_extend,
    check_lu_equivalence,
    extract_coefficient_tensor,
    frobenius_norm,
    matricize,
    multilinear_apply,
)
from lucp.cli import decision_text, fmt_number
from lucp.states import QUBIT_U2, QUTRIT_U1, QUTRIT_U2, three_qubit_rho, three_qubit_tau, werner_qutrit


def show(name, m):
    print(name)
    for row in np.atleast_2d(m):
        print("  " + " ".join(f"{fmt_number(x):>9}" for x in row))


def werner():
    x = extract_coefficient_tensor(werner_qutrit(1.0)).tensor
    y = extract_coefficient_tensor(werner_qutrit(0.25)).tensor
    show("X = coefficients of rho(1)", x)
    print(f"|X| = {frobenius_norm(x):.15f}  sqrt(19)/9 = {np.sqrt(19) / 9:.15f}")
    print(f"|Y| = {frobenius_norm(y):.15f}  sqrt(34)/36 = {np.sqrt(34) / 36:.15f}")
    u = LocalUnitary((QUTRIT_U1, QUTRIT_U2))
    xp = extract_coefficient_tensor(apply_local_unitary(werner_qutrit(1.0), u)).tensor
    show("X' = coefficients of (U1 x U2) rho(1) (U1 x U2)^+", xp)
    rots = [block_extend(adjoint_rotation(f)) for f in u.factors]
    print("adjoint images map X to X':", np.allclose(multilinear_apply(rots, x), xp, atol=1e-12))
    print(decision_text(check_lu_equivalence(werner_qutrit(1.0), werner_qutrit(0.25))))


def three_qubit():
    rho, tau = three_qubit_rho(), three_qubit_tau()
    x = extract_coefficient_tensor(rho, "pauli").tensor
    for k in range(4):
        show(f"X_{k + 1} (frontal slice of rho)", x[:, :, k])
    for s, name in [(rho, "rho"), (tau, "tau")]:
        t = extract_coefficient_tensor(s, "pauli").tensor
        print(name, "unfolding norms:", [f"{frobenius_norm(matricize(t, n)):.15f}" for n in (1, 2, 3)])
    print("7 sqrt(578)/1156 =", f"{7 * np.sqrt(578) / 1156:.15f}")
    show("O_2 = adjoint image of U_2", adjoint_rotation(QUBIT_U2, "pauli"))
    print(decision_text(check_lu_equivalence(rho, tau, CheckConfig(ordering="pauli"))))


if __name__ == "__main__":
    werner()
    three_qubit()
