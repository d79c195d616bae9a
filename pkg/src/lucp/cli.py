"""Command line front end.

Exit codes: 0 success (``check``: equivalent), 1 not equivalent,
2 inconclusive, 3 usage or input error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import io
from .bloch import (
    ORDERINGS,
    BlochTensor,
    InvalidStateError,
    extract_coefficient_tensor,
    reconstruct_density,
)
from .cp import AlsConfig, cp_als, cp_als_orthogonal, estimate_rank
from .lu import (
    CheckConfig,
    Verdict,
    apply_local_unitary,
    check_lu_equivalence,
    compute_invariants,
    random_density,
    random_local_unitary,
)

EXIT_OK, EXIT_NOT_EQUIVALENT, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_NUMERICAL = range(5)
VERDICT_EXIT = {
    Verdict.EQUIVALENT: EXIT_OK,
    Verdict.NOT_EQUIVALENT: EXIT_NOT_EQUIVALENT,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}
SUBCOMMANDS = ("extract", "reconstruct", "invariants", "decompose", "check", "gen-pair")
REQUIRED = {
    "extract": ("input",),
    "reconstruct": ("input",),
    "invariants": ("input",),
    "decompose": ("input",),
    "check": ("a", "b"),
    "gen-pair": ("dims", "a", "b"),
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CommandConfig:
    subcommand: str
    input: str | None = None
    output: str | None = None
    a: str | None = None
    b: str | None = None
    dims: tuple[int, ...] | None = None
    rank: int | None = None
    orthogonal: bool = False
    tol: float = 1e-8
    seed: int = 0
    restarts: int = 20
    max_iters: int = 500
    format: str = "json"
    report: str | None = None
    basis: str = "gellmann"

    def als(self) -> AlsConfig:
        return AlsConfig(max_iters=self.max_iters, restarts=self.restarts, seed=self.seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if any(d < 2 for d in dims):
        raise argparse.ArgumentTypeError("subsystem dimensions must be >= 2")
    return dims


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input")
    common.add_argument("--output")
    common.add_argument("--a")
    common.add_argument("--b")
    common.add_argument("--dims", type=_dims)
    common.add_argument("--rank", type=int)
    common.add_argument("--orthogonal", action="store_true")
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--restarts", type=int, default=20)
    common.add_argument("--max-iters", type=int, default=500)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--report")
    common.add_argument("--basis", choices=ORDERINGS, default="gellmann")
    parser = _Parser(prog="lucp", description="Local unitary equivalence via coefficient tensors.")
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "extract": "density JSON -> coefficient tensor JSON",
        "reconstruct": "coefficient tensor JSON -> density JSON",
        "invariants": "invariant report of a density or tensor",
        "decompose": "CP decomposition of a tensor",
        "check": "decide LU equivalence of two states",
        "gen-pair": "write a random LU-equivalent pair",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def parse_args(argv) -> CommandConfig:
    ns = build_parser().parse_args(argv)
    if ns.subcommand is None:
        raise UsageError("a command is required")
    missing = [f"--{k}" for k in REQUIRED[ns.subcommand] if getattr(ns, k) is None]
    if missing:
        raise UsageError(f"{ns.subcommand} requires {', '.join(missing)}")
    if not ns.tol > 0:
        raise UsageError("--tol must be positive")
    if ns.rank is not None and ns.rank < 1:
        raise UsageError("--rank must be >= 1")
    if ns.orthogonal and ns.rank is None:
        raise UsageError("--orthogonal requires --rank")
    if ns.restarts < 1 or ns.max_iters < 1:
        raise UsageError("--restarts and --max-iters must be >= 1")
    if not 0 <= ns.seed < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    fields = vars(ns)
    return CommandConfig(**{k: fields[k] for k in CommandConfig.__dataclass_fields__})


# -- text rendering --------------------------------------------------------------------


def fmt_number(x: float) -> str:
    """p/q when x is within 1e-12 of a fraction with q <= 1200, else %.6g."""
    x = float(x)
    f = Fraction(x).limit_denominator(1200)
    if abs(float(f) - x) <= 1e-12:
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    return f"{x:.6g}"


def _fmt_list(xs) -> str:
    return "[" + ", ".join(fmt_number(x) for x in xs) + "]"


def report_text(r) -> str:
    rows = [("norm", fmt_number(r.norm))]
    for n, m in enumerate(r.modes, start=1):
        rows.append((f"X_({n}) norm", fmt_number(m.norm)))
        rows.append((f"X_({n}) singular values", _fmt_list(m.singular_values)))
    for s in r.subtensors:
        name = "X" + "".join(map(str, s.key))
        rows.append((f"{name} norm", fmt_number(s.norm)))
        if s.cp is not None:
            rows.append((f"{name} rank", str(s.cp.rank) + ("" if s.cp.reliable else " (unreliable)")))
            rows.append((f"{name} k-ranks", str(list(s.cp.k_ranks))))
            rows.append((f"{name} weights", _fmt_list(s.cp.weights)))
    if r.full_cp is not None:
        rows.append(("full rank", str(r.full_cp.rank)))
        rows.append(("full k-ranks", str(list(r.full_cp.k_ranks))))
        rows.append(("full gram traces", _fmt_list(r.full_cp.gram_traces)))
        rows.append(("kruskal", "yes" if r.full_cp.kruskal else "no"))
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k:<{width}}  {v}\n" for k, v in rows)


def decision_text(d) -> str:
    lines = [f"verdict   {d.verdict.value}"]
    if d.reason:
        lines.append(f"reason    {d.reason}")
    if d.residual is not None:
        lines.append(f"residual  {d.residual:.3e}")
    if d.detail:
        lines.append(f"detail    {d.detail}")
    for k, w in enumerate(d.witnesses or [], start=1):
        lines.append(f"O_{k} =")
        lines.extend("  " + " ".join(f"{fmt_number(x):>10}" for x in row) for row in w)
    return "\n".join(lines) + "\n"


# -- commands --------------------------------------------------------------------------


def _emit(cfg: CommandConfig, doc, text: str | None = None) -> None:
    out = text if cfg.format == "text" and text is not None else io.dumps(doc)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _coefficients(doc, basis: str):
    """Coefficient tensor from a density, Bloch tensor or bare tensor document."""
    if isinstance(doc, dict) and "matrix" in doc:
        return extract_coefficient_tensor(io.density_from_dict(doc), basis)
    if isinstance(doc, dict) and "dims" in doc:
        return io.bloch_from_dict(doc)
    return io.tensor_from_dict(doc)


def _extract(cfg):
    rho = io.density_from_dict(io.read_json(cfg.input))
    bt = extract_coefficient_tensor(rho, cfg.basis)
    _emit(cfg, io.bloch_to_dict(bt))
    return EXIT_OK


def _reconstruct(cfg):
    bt = io.bloch_from_dict(io.read_json(cfg.input))
    _emit(cfg, io.density_to_dict(reconstruct_density(bt)))
    return EXIT_OK


def _invariants(cfg):
    bt = _coefficients(io.read_json(cfg.input), cfg.basis)
    if not isinstance(bt, BlochTensor):
        raise io.FormatError("invariants needs a density or coefficient tensor with dims")
    report = compute_invariants(bt, cfg.als())
    _emit(cfg, io.report_to_dict(report), report_text(report))
    return EXIT_OK


def _decompose(cfg):
    t = _coefficients(io.read_json(cfg.input), cfg.basis)
    if isinstance(t, BlochTensor):
        t = t.tensor
    if cfg.rank is None:
        rank, fit = estimate_rank(t, cfg.als())
    elif cfg.orthogonal:
        rank, fit = cfg.rank, cp_als_orthogonal(t, cfg.rank, cfg.als())
    else:
        rank, fit = cfg.rank, cp_als(t, cfg.rank, cfg.als())
    print(f"rank {rank}  loss {fit.loss:.6e}  iterations {fit.iterations}"
          f"  converged {'yes' if fit.converged else 'no'}", file=sys.stderr)
    _emit(cfg, io.cp_to_dict(fit.cp))
    return EXIT_OK


def _check(cfg):
    rho_a = io.density_from_dict(io.read_json(cfg.a))
    rho_b = io.density_from_dict(io.read_json(cfg.b))
    if rho_a.dims != rho_b.dims:
        raise io.FormatError(f"states have different dims {rho_a.dims} and {rho_b.dims}")
    check_cfg = CheckConfig(tol=cfg.tol, als=cfg.als(), ordering=cfg.basis)
    decision = check_lu_equivalence(rho_a, rho_b, check_cfg)
    _emit(cfg, io.decision_to_dict(decision), decision_text(decision))
    if cfg.report:
        with open(cfg.report, "w") as fh:
            fh.write(decision_text(decision))
    return VERDICT_EXIT[decision.verdict]


def _gen_pair(cfg):
    rho = random_density(cfg.dims, cfg.seed)
    u = random_local_unitary(cfg.dims, cfg.seed + 1)
    io.write_json(cfg.a, io.density_to_dict(rho))
    io.write_json(cfg.b, io.density_to_dict(apply_local_unitary(rho, u)))
    return EXIT_OK


COMMANDS = {
    "extract": _extract,
    "reconstruct": _reconstruct,
    "invariants": _invariants,
    "decompose": _decompose,
    "check": _check,
    "gen-pair": _gen_pair,
}


def run(cfg: CommandConfig) -> int:
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"lucp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (io.FormatError, InvalidStateError, ValueError, OSError) as exc:
        print(f"lucp: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _setup_logging() -> None:
    level = os.environ.get("LUCP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"lucp: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
