"""Versioned text serialization of closure tables.

Tables are written as canonical JSON: floats use Python's shortest
round-trip ``repr``, keys appear in a fixed order, and a SHA-256 checksum over
the canonical compact encoding of the content guards against corruption.
See ``TABLE_FORMAT.md`` for the layout.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .biaxial import BiaxialBlock, BiaxialTable
from .errors import TableFormatError
from .piecewise import Table1D
from .quadrature import LegendreSeries1D, LegendreSeries2D

__all__ = ["FORMAT_VERSION", "DOMAIN_EXTENTS", "save_table", "load_table", "dumps_table", "loads_table",
           "table_checksum", "resolve_table_path"]

FORMAT_VERSION = 1
DOMAIN_EXTENTS = {"circle": (0.0, 1.0), "sphere_uniaxial": (0.0, 2.0)}
VARIANTS = ("global", "piecewise")
TABLE_DIR_ENV = "BINGHAM_TABLE_DIR"


def _plain(obj):
    # numpy scalars and arrays, tuples -> JSON-native values
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r} cannot be stored")
        return v
    return obj


def _content(table) -> dict:
    if isinstance(table, Table1D):
        pieces = [{"region": {"lo": s.lo, "hi": s.hi}, "coefficients": [s.coef], "residuals": [r]}
                  for s, r in zip(table.series, table.residuals)]
        endpoints = sorted(table.endpoint_values.items())
    elif isinstance(table, BiaxialTable):
        pieces = [{"region": {"x": list(b.x_range), "y": list(b.y_range)},
                   "coefficients": [s.coef for s in b.series], "residuals": list(b.residuals)}
                  for b in table.blocks]
        endpoints = []
    else:
        raise TypeError(f"cannot serialize {type(table).__name__}")
    meta = {k: v for k, v in table.metadata.items() if k != "checksum"}
    return _plain({
        "format_version": FORMAT_VERSION,
        "domain": table.domain,
        "variant": table.variant,
        "endpoint_values": [list(p) for p in endpoints],
        "pieces": pieces,
        "metadata": meta,
    })


def _canonical_bytes(content: dict) -> bytes:
    return json.dumps(content, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def table_checksum(table) -> str:
    """Hex SHA-256 of the canonical encoding of everything but the checksum."""
    return hashlib.sha256(_canonical_bytes(_content(table))).hexdigest()


def _is_flat(v) -> bool:
    return isinstance(v, list) and all(not isinstance(e, (list, dict)) for e in v)


def _render(v, ind: int) -> str:
    # readable, deterministic layout: numeric rows stay on one line
    pad, inner = " " * ind, " " * (ind + 1)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_render(v[k], ind + 1)}" for k in sorted(v)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, list):
        if _is_flat(v):
            return json.dumps(v, allow_nan=False, separators=(", ", ": "))
        return "[\n" + ",\n".join(inner + _render(e, ind + 1) for e in v) + "\n" + pad + "]"
    return json.dumps(v, allow_nan=False)


def dumps_table(table) -> str:
    """Canonical text of ``table``; equal tables give identical strings."""
    content = _content(table)
    digest = hashlib.sha256(_canonical_bytes(content)).hexdigest()
    doc = dict(content)
    doc["metadata"] = dict(content["metadata"], checksum="sha256:" + digest)
    return _render(doc, 0) + "\n"


def save_table(table, path) -> None:
    """Write ``table`` to ``path`` (written to a temporary file, then renamed)."""
    path = Path(path)
    text = dumps_table(table)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _need(d: dict, key: str, kind):
    if not isinstance(d, dict) or key not in d:
        raise TableFormatError(f"missing field {key!r}")
    v = d[key]
    if not isinstance(v, kind) or isinstance(v, bool):
        raise TableFormatError(f"field {key!r} has the wrong type")
    return v


def _array(v, ndim: int) -> np.ndarray:
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise TableFormatError(f"malformed coefficient array: {exc}") from exc
    if a.ndim != ndim or a.size == 0 or not np.all(np.isfinite(a)):
        raise TableFormatError(f"coefficient array must be a non-empty finite {ndim}D array")
    return a


def _table_1d(doc: dict) -> Table1D:
    domain, variant = doc["domain"], doc["variant"]
    lo_dom, hi_dom = DOMAIN_EXTENTS[domain]
    series, residuals = [], []
    for i, p in enumerate(_need(doc, "pieces", list)):
        reg = _need(p, "region", dict)
        lo, hi = float(_need(reg, "lo", (int, float))), float(_need(reg, "hi", (int, float)))
        coefs = _need(p, "coefficients", list)
        res = _need(p, "residuals", list)
        if len(coefs) != 1 or len(res) != 1:
            raise TableFormatError(f"piece {i}: 1D tables carry one series per piece")
        series.append(LegendreSeries1D(_array(coefs[0], 1), lo, hi))
        residuals.append(float(res[0]))
    if not series:
        raise TableFormatError("table has no pieces")
    bps = [series[0].lo]
    for i, s in enumerate(series):
        if s.lo != bps[-1] or not s.hi > s.lo:
            raise TableFormatError(f"piece {i} does not continue the partition at {bps[-1]!r}")
        bps.append(s.hi)
    if bps[0] != lo_dom or bps[-1] != hi_dom:
        raise TableFormatError(f"pieces cover [{bps[0]}, {bps[-1]}], expected [{lo_dom}, {hi_dom}]")
    ends = {}
    for pair in _need(doc, "endpoint_values", list):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise TableFormatError("endpoint_values entries must be [mu, eta] pairs")
        ends[float(pair[0])] = float(pair[1])
    return Table1D(domain, variant, tuple(bps), tuple(series), tuple(residuals), ends, doc["metadata"])


def _table_2d(doc: dict) -> BiaxialTable:
    blocks = []
    for i, p in enumerate(_need(doc, "pieces", list)):
        reg = _need(p, "region", dict)
        xr, yr = _need(reg, "x", list), _need(reg, "y", list)
        if len(xr) != 2 or len(yr) != 2:
            raise TableFormatError(f"block {i}: region needs two x and two y bounds")
        coefs = _need(p, "coefficients", list)
        res = _need(p, "residuals", list)
        if len(coefs) != 3 or len(res) != 3:
            raise TableFormatError(f"block {i}: biaxial blocks carry three series")
        series = tuple(LegendreSeries2D(_array(c, 2), xr, yr) for c in coefs)
        blocks.append(BiaxialBlock(tuple(xr), tuple(yr), series, tuple(float(r) for r in res)))
    if not blocks:
        raise TableFormatError("table has no blocks")
    return BiaxialTable(doc["variant"], tuple(blocks), doc["metadata"])


def loads_table(text: str):
    """Parse and validate table text produced by :func:`dumps_table`.

    Raises
    ------
    TableFormatError
        On a parse error, a number not written in shortest round-trip form,
        unknown ``format_version``, checksum mismatch, or regions that do not
        tile the domain.
    """
    odd = []

    def parse_float(tok: str) -> float:
        # a digit change that rounds to the same double leaves the content
        # hash intact, so insist on the shortest round-trip spelling as well
        v = float(tok)
        if repr(v) != tok:
            odd.append(tok)
        return v

    try:
        doc = json.loads(text, parse_float=parse_float)
    except json.JSONDecodeError as exc:
        raise TableFormatError(f"not valid JSON: {exc}") from exc
    if odd:
        raise TableFormatError(f"number {odd[0]!r} is not in shortest round-trip form")
    if not isinstance(doc, dict):
        raise TableFormatError("top level must be an object")
    version = _need(doc, "format_version", int)
    if version != FORMAT_VERSION:
        raise TableFormatError(f"unsupported format_version {version} (this reader handles {FORMAT_VERSION})")
    meta = _need(doc, "metadata", dict)
    stored = _need(meta, "checksum", str)
    content = dict(doc)
    content["metadata"] = {k: v for k, v in meta.items() if k != "checksum"}
    digest = "sha256:" + hashlib.sha256(_canonical_bytes(content)).hexdigest()
    if stored != digest:
        raise TableFormatError(f"checksum mismatch: file says {stored}, content gives {digest}")
    domain = _need(doc, "domain", str)
    if _need(doc, "variant", str) not in VARIANTS:
        raise TableFormatError(f"unknown variant {doc['variant']!r}")
    try:
        if domain in DOMAIN_EXTENTS:
            return _table_1d(doc)
        if domain == "sphere_biaxial":
            return _table_2d(doc)
    except TableFormatError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise TableFormatError(f"invalid table content: {exc}") from exc
    raise TableFormatError(f"unknown domain {domain!r}")


def load_table(path):
    """Read a table file; see :func:`loads_table` for the checks applied."""
    return loads_table(Path(path).read_text(encoding="utf-8"))


def resolve_table_path(name) -> Path:
    """``name`` as given if it exists, else looked up under ``$BINGHAM_TABLE_DIR``."""
    p = Path(name)
    if p.exists() or p.is_absolute():
        return p
    base = os.environ.get(TABLE_DIR_ENV)
    if base:
        for cand in (Path(base) / p, Path(base) / (p.name + ".json")):
            if cand.exists():
                return cand
    return p
