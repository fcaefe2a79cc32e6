"""JSON documents for triples and subspace frames.

Complex numbers are always written as two-element ``[re, im]`` arrays and
matrices as lists of rows. Field order is fixed so that files written from
the same triple are byte identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidInput
from .model import BclTriple, validate_triple
from .numcore import Frame

FIELD_ORDER = ("name", "seed", "d1", "d2", "dim_w", "twist", "w2_frame", "u", "pperp_frame")


class ParseError(InvalidInput):
    """Malformed triple or frame document; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


def _real(x: float) -> float:
    # fold -0.0 so output does not depend on the sign of zero
    x = float(x)
    return 0.0 if x == 0.0 else x


def _num(z: complex) -> list:
    z = complex(z)
    return [_real(z.real), _real(z.imag)]


def encode_matrix(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[_num(z) for z in row] for row in a]


def decode_matrix(obj, field: str, shape: tuple | None = None) -> np.ndarray:
    """Rows of ``[re, im]`` pairs to a complex array."""
    if not isinstance(obj, list) or any(not isinstance(r, list) for r in obj):
        raise ParseError("expected a list of rows", field)
    rows = []
    for i, row in enumerate(obj):
        vals = []
        for j, z in enumerate(row):
            if (
                not isinstance(z, list)
                or len(z) != 2
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in z)
            ):
                raise ParseError(f"entry [{i}][{j}] is not an [re, im] pair", field)
            vals.append(complex(z[0], z[1]))
        rows.append(vals)
    if rows and len({len(r) for r in rows}) != 1:
        raise ParseError("rows have different lengths", field)
    a = np.array(rows, dtype=complex).reshape(len(rows), len(rows[0]) if rows else 0)
    if shape is not None and a.shape != shape:
        raise ParseError(f"expected shape {shape}, got {a.shape}", field)
    return a


def triple_to_dict(t: BclTriple, include_pperp: bool = False) -> dict:
    doc = {
        "name": t.name,
        "seed": t.seed,
        "d1": t.d1,
        "d2": t.d2,
        "dim_w": t.m,
        "twist": encode_matrix(t.twist),
        "w2_frame": encode_matrix(t.w2_frame.columns.reshape(t.m, t.p)),
        "u": encode_matrix(t.u),
    }
    if include_pperp:
        doc["pperp_frame"] = encode_matrix(t.pperp_frame.columns.reshape(t.m, t.m - t.p))
    return {k: doc[k] for k in FIELD_ORDER if k in doc}


def dumps_triple(t: BclTriple, include_pperp: bool = False) -> str:
    return json.dumps(triple_to_dict(t, include_pperp), indent=1) + "\n"


def write_triple(t: BclTriple, path, include_pperp: bool = False) -> None:
    Path(path).write_text(dumps_triple(t, include_pperp))


def _int(doc: dict, key: str, required: bool = True):
    if key not in doc:
        if required:
            raise ParseError("missing", key)
        return None
    v = doc[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise ParseError(f"expected a non-negative integer, got {v!r}", key)
    return v


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None


def triple_from_dict(doc: dict, tol: float = 1e-9, strict: bool = True) -> BclTriple:
    """Validate a parsed document.

    Parameters
    ----------
    strict : bool
        Passed to :func:`validate_triple`; ``False`` records problems
        instead of raising.
    """
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    unknown = set(doc) - set(FIELD_ORDER)
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}")
    d1, d2, m = _int(doc, "d1"), _int(doc, "d2"), _int(doc, "dim_w")
    if "u" not in doc:
        raise ParseError("missing", "u")
    if "w2_frame" not in doc:
        raise ParseError("missing", "w2_frame")
    u = decode_matrix(doc["u"], "u", (d2 * m, d2 * m))
    w2 = decode_matrix(doc["w2_frame"], "w2_frame")
    if w2.shape[0] not in (0, m):
        raise ParseError(f"expected {m} rows, got {w2.shape[0]}", "w2_frame")
    if w2.shape[0] == 0:
        w2 = np.zeros((m, 0), dtype=complex)
    twist = decode_matrix(doc["twist"], "twist", (d1 * d2, d1 * d2)) if doc.get("twist") is not None else None
    pperp = None
    if doc.get("pperp_frame") is not None:
        pperp = decode_matrix(doc["pperp_frame"], "pperp_frame")
        if pperp.shape[0] == 0:
            pperp = np.zeros((m, 0), dtype=complex)
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise ParseError("expected a string", "name")
    seed = _int(doc, "seed", required=False) if doc.get("seed") is not None else None
    return validate_triple(
        d1, d2, u, w2, twist=twist, m=m, pperp_frame=pperp, tol=tol, strict=strict, name=name, seed=seed
    )


def loads_triple(text: str, tol: float = 1e-9, strict: bool = True) -> BclTriple:
    return triple_from_dict(_load_json(text), tol, strict)


def read_triple(path, tol: float = 1e-9, strict: bool = True) -> BclTriple:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None
    return loads_triple(text, tol, strict)


def read_frame(path, m: int | None = None) -> Frame:
    """Subspace file: ``{"columns": [[re, im], ...] rows}`` or a bare matrix.

    Raises
    ------
    ParseError, InvalidInput
        On malformed input or non-orthonormal columns.
    """
    try:
        doc = _load_json(Path(path).read_text())
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None
    cols = doc.get("columns") if isinstance(doc, dict) else doc
    a = decode_matrix(cols, "columns")
    if m is not None and a.shape[0] != m:
        raise DimensionMismatch(f"subspace lives in C^{a.shape[0]}, the triple has dim W = {m}")
    return Frame(a, a.shape[0])


def write_frame(f: Frame, path) -> None:
    Path(path).write_text(json.dumps({"columns": encode_matrix(f.columns)}, indent=1) + "\n")


__all__ = [
    "ParseError",
    "triple_to_dict",
    "triple_from_dict",
    "dumps_triple",
    "loads_triple",
    "read_triple",
    "write_triple",
    "read_frame",
    "write_frame",
    "encode_matrix",
    "decode_matrix",
]
