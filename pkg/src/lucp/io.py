"""JSON schemas for states, tensors, decompositions, reports and decisions.

Floats are written with Python's shortest round-trip repr, so loading a
file and writing it again reproduces it byte for byte.

    tensor    {"shape": [...], "data": [...]}             data flat, row-major
    bloch     tensor fields + {"dims": [...], "basis": "gellmann"}
    density   {"dims": [...], "matrix": [[[re, im], ...], ...]}
    cp        {"shape": [...], "weights": [...], "factors": [[[...], ...], ...]}
    decision  {"verdict", "reason", "residual", "witnesses", "detail"}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bloch import BlochTensor, DensityMatrix
from .cp import CPDecomposition
from .lu import (
    CPInvariants,
    Decision,
    InvariantReport,
    ModeInvariants,
    SubtensorInvariants,
    Verdict,
)


class FormatError(ValueError):
    """Raised when a JSON document does not match the expected schema."""


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=float).ravel()]


def _matrix(a) -> list:
    return [[float(x) for x in row] for row in np.asarray(a, dtype=float)]


def _require(doc, *keys):
    if not isinstance(doc, dict):
        raise FormatError(f"expected a JSON object, got {type(doc).__name__}")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise FormatError(f"missing field(s): {', '.join(missing)}")


def _int_list(v, name) -> tuple[int, ...]:
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise FormatError(f"{name} must be a list of integers")
    return tuple(v)


def _real_array(v, name) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{name} must contain numbers") from exc
    if not np.all(np.isfinite(a)):
        raise FormatError(f"{name} contains non-finite values")
    return a


# -- tensors ---------------------------------------------------------------------


def tensor_to_dict(t: np.ndarray) -> dict:
    t = np.asarray(t, dtype=float)
    return {"shape": list(t.shape), "data": _floats(t)}


def tensor_from_dict(doc) -> np.ndarray:
    _require(doc, "shape", "data")
    shape = _int_list(doc["shape"], "shape")
    data = _real_array(doc["data"], "data")
    if data.ndim != 1 or data.size != int(np.prod(shape, dtype=int)):
        raise FormatError(f"data has {data.size} entries, shape {shape} needs {int(np.prod(shape))}")
    return data.reshape(shape)


def bloch_to_dict(bt: BlochTensor) -> dict:
    return {"dims": list(bt.dims), "basis": bt.ordering, **tensor_to_dict(bt.tensor)}


def bloch_from_dict(doc) -> BlochTensor:
    _require(doc, "dims", "shape", "data")
    dims = _int_list(doc["dims"], "dims")
    basis = doc.get("basis", "gellmann")
    try:
        return BlochTensor(dims, tensor_from_dict(doc), basis)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


# -- density matrices ------------------------------------------------------------------


def density_to_dict(rho: DensityMatrix) -> dict:
    m = rho.matrix
    return {
        "dims": list(rho.dims),
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def _entry(z):
    if isinstance(z, (int, float)) and not isinstance(z, bool):
        return complex(z)
    if isinstance(z, list) and len(z) == 2 and all(isinstance(p, (int, float)) for p in z):
        return complex(z[0], z[1])
    raise FormatError("matrix entries must be numbers or [re, im] pairs")


def density_from_dict(doc) -> DensityMatrix:
    _require(doc, "dims", "matrix")
    dims = _int_list(doc["dims"], "dims")
    rows = doc["matrix"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise FormatError("matrix must be a list of rows")
    m = np.array([[_entry(z) for z in r] for r in rows], dtype=complex)
    if not np.all(np.isfinite(m)):
        raise FormatError("matrix contains non-finite values")
    try:
        return DensityMatrix(dims, m)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


# -- CP decompositions --------------------------------------------------------------------


def cp_to_dict(cp: CPDecomposition) -> dict:
    return {
        "shape": list(cp.shape),
        "weights": _floats(cp.weights),
        "factors": [_matrix(f) for f in cp.factors],
    }


def cp_from_dict(doc) -> CPDecomposition:
    _require(doc, "shape", "weights", "factors")
    shape = _int_list(doc["shape"], "shape")
    weights = _real_array(doc["weights"], "weights").ravel()
    if not isinstance(doc["factors"], list) or len(doc["factors"]) != len(shape):
        raise FormatError("need one factor matrix per mode")
    factors = []
    for n, f in zip(shape, doc["factors"]):
        a = _real_array(f, "factors")
        if a.shape != (n, weights.size):
            raise FormatError(f"factor of shape {a.shape}, expected {(n, weights.size)}")
        factors.append(a)
    return CPDecomposition(weights, factors, shape)


# -- invariant reports -----------------------------------------------------------------------


def _cp_inv_to_dict(c: CPInvariants | None):
    if c is None:
        return None
    return {
        "rank": c.rank,
        "exact": c.exact,
        "reliable": c.reliable,
        "k_ranks": list(c.k_ranks),
        "weights": _floats(c.weights),
        "gram_traces": [float(x) for x in c.gram_traces],
        "kruskal": c.kruskal,
    }


def _cp_inv_from_dict(doc):
    if doc is None:
        return None
    _require(doc, "rank", "exact", "reliable", "k_ranks", "weights", "gram_traces", "kruskal")
    return CPInvariants(
        rank=int(doc["rank"]),
        exact=bool(doc["exact"]),
        reliable=bool(doc["reliable"]),
        k_ranks=tuple(int(k) for k in doc["k_ranks"]),
        weights=_real_array(doc["weights"], "weights"),
        gram_traces=tuple(float(x) for x in doc["gram_traces"]),
        kruskal=bool(doc["kruskal"]),
    )


def _modes_to_list(modes):
    return [{"norm": m.norm, "singular_values": _floats(m.singular_values)} for m in modes]


def _modes_from_list(docs):
    out = []
    for d in docs:
        _require(d, "norm", "singular_values")
        out.append(ModeInvariants(float(d["norm"]), _real_array(d["singular_values"], "singular_values")))
    return out


def report_to_dict(r: InvariantReport) -> dict:
    return {
        "dims": list(r.dims),
        "norm": r.norm,
        "modes": _modes_to_list(r.modes),
        "subtensors": [
            {"key": list(s.key), "norm": s.norm, "modes": _modes_to_list(s.modes), "cp": _cp_inv_to_dict(s.cp)}
            for s in r.subtensors
        ],
        "full_cp": _cp_inv_to_dict(r.full_cp),
    }


def report_from_dict(doc) -> InvariantReport:
    _require(doc, "dims", "norm", "modes", "subtensors", "full_cp")
    subs = []
    for s in doc["subtensors"]:
        _require(s, "key", "norm", "modes", "cp")
        subs.append(SubtensorInvariants(tuple(s["key"]), float(s["norm"]),
                                        _modes_from_list(s["modes"]), _cp_inv_from_dict(s["cp"])))
    return InvariantReport(
        dims=_int_list(doc["dims"], "dims"),
        norm=float(doc["norm"]),
        modes=_modes_from_list(doc["modes"]),
        subtensors=subs,
        full_cp=_cp_inv_from_dict(doc["full_cp"]),
    )


# -- decisions -------------------------------------------------------------------------------


def decision_to_dict(d: Decision) -> dict:
    return {
        "verdict": d.verdict.value,
        "reason": d.reason,
        "residual": None if d.residual is None else float(d.residual),
        "witnesses": None if d.witnesses is None else [_matrix(w) for w in d.witnesses],
        "detail": d.detail,
    }


def decision_from_dict(doc) -> Decision:
    _require(doc, "verdict", "reason", "residual", "witnesses")
    try:
        verdict = Verdict(doc["verdict"])
    except ValueError as exc:
        raise FormatError(f"unknown verdict {doc['verdict']!r}") from exc
    wit = doc["witnesses"]
    return Decision(
        verdict=verdict,
        reason=doc["reason"],
        residual=doc["residual"],
        witnesses=None if wit is None else [_real_array(w, "witnesses") for w in wit],
        detail=doc.get("detail", ""),
    )


# -- files -------------------------------------------------------------------------------------


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def write_json(path, doc) -> None:
    Path(path).write_text(dumps(doc))
