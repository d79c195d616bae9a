"""Best-of-restarts CP loss on random LU-related 3-qubit pairs, as a function of the sweep budget.

Usage: python3 scripts/als_loss_gap.py [pairs] [budget ...]
"""

import sys
import time

from lucp import AlsConfig, apply_local_unitary, cp_als, extract_coefficient_tensor, random_density, random_local_unitary


def gaps(pairs, max_iters):
    cfg = AlsConfig(max_iters=max_iters)
    out = []
    for i in range(pairs):
        rho = random_density((2, 2, 2), 1000 + i)
        rho_b = apply_local_unitary(rho, random_local_unitary((2, 2, 2), 2000 + i))
        xa = extract_coefficient_tensor(rho).tensor
        xb = extract_coefficient_tensor(rho_b).tensor
        for r in (1, 2, 3):
            fa, fb = cp_als(xa, r, cfg), cp_als(xb, r, cfg)
            out.append((i, r, abs(fa.loss - fb.loss) / max(fa.loss, fb.loss), fa.iterations, fb.iterations))
    return out


def main(argv):
    pairs = int(argv[0]) if argv else 20
    budgets = [int(b) for b in argv[1:]] or [500, 1000, 2000]
    for b in budgets:
        t0 = time.perf_counter()
        res = gaps(pairs, b)
        worst = max(res, key=lambda g: g[2])
        over = sum(g[2] > 1e-6 for g in res)
        print(f"max_iters {b:5d}: worst gap {worst[2]:.2e} (pair {worst[0]}, R={worst[1]}), "
              f"{over} of {len(res)} above 1e-6, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main(sys.argv[1:])
