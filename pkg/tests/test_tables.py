import json

import numpy as np
import pytest

from bingham_closure.circle import build_table
from bingham_closure.errors import TableFormatError
from bingham_closure.tables import (
    FORMAT_VERSION,
    dumps_table,
    load_table,
    loads_table,
    resolve_table_path,
    save_table,
    table_checksum,
)
from bingham_closure.uniaxial import build_table_uni


def _same_1d(a, b):
    assert a.breakpoints == b.breakpoints and a.residuals == b.residuals
    for s, t in zip(a.series, b.series):
        assert s.coef.tobytes() == t.coef.tobytes()
    assert a.endpoint_values == b.endpoint_values


def test_round_trip_1d(tmp_path, circle_piecewise):
    p = tmp_path / "c.json"
    save_table(circle_piecewise, p)
    t = load_table(p)
    _same_1d(t, circle_piecewise)
    assert len(t.series) == 6
    assert t.breakpoints == (0.0, 0.5, 0.73, 0.84, 0.91, 0.96, 1.0)
    p2 = tmp_path / "c2.json"
    save_table(t, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_round_trip_biaxial(tmp_path, bi_piecewise):
    p = tmp_path / "b.json"
    save_table(bi_piecewise, p)
    t = load_table(p)
    for a, b in zip(t.blocks, bi_piecewise.blocks):
        assert a.x_range == b.x_range and a.y_range == b.y_range and a.residuals == b.residuals
        for s, u in zip(a.series, b.series):
            assert s.coef.tobytes() == u.coef.tobytes()
    p2 = tmp_path / "b2.json"
    save_table(t, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_document_layout(circle_piecewise):
    doc = json.loads(dumps_table(circle_piecewise))
    assert doc["format_version"] == FORMAT_VERSION
    assert doc["domain"] == "circle" and doc["variant"] == "piecewise"
    assert doc["metadata"]["checksum"] == "sha256:" + table_checksum(circle_piecewise)
    assert doc["pieces"][1]["region"] == {"lo": 0.5, "hi": 0.73}


def test_every_single_digit_corruption_is_detected(circle_piecewise):
    text = dumps_table(circle_piecewise)
    rng = np.random.default_rng(0)
    digits = [i for i, ch in enumerate(text) if ch.isdigit()]
    for i in rng.choice(digits, 200, replace=False):
        new = "7" if text[i] != "7" else "3"
        with pytest.raises(TableFormatError):
            loads_table(text[:i] + new + text[i + 1:])


def test_version_and_parse_errors(circle_piecewise):
    doc = json.loads(dumps_table(circle_piecewise))
    doc["format_version"] = 99
    with pytest.raises(TableFormatError, match="format_version"):
        loads_table(json.dumps(doc))
    with pytest.raises(TableFormatError):
        loads_table("{not json")
    with pytest.raises(TableFormatError):
        loads_table("[]")


def _with_valid_checksum(doc):
    from bingham_closure.tables import _canonical_bytes
    import hashlib

    content = dict(doc)
    content["metadata"] = {k: v for k, v in doc["metadata"].items() if k != "checksum"}
    doc["metadata"]["checksum"] = "sha256:" + hashlib.sha256(_canonical_bytes(content)).hexdigest()
    return json.dumps(doc)


def test_tiling_violation_rejected(circle_piecewise, bi_piecewise):
    doc = json.loads(dumps_table(circle_piecewise))
    del doc["pieces"][2]
    with pytest.raises(TableFormatError, match="partition"):
        loads_table(_with_valid_checksum(doc))
    doc = json.loads(dumps_table(bi_piecewise))
    doc["pieces"][0]["region"]["x"] = [-1.0, 0.5]
    with pytest.raises(TableFormatError):
        loads_table(_with_valid_checksum(doc))


def test_stored_residuals_match_spot_rebuild(tmp_path):
    t = build_table_uni("piecewise")
    save_table(t, tmp_path / "u.json")
    loaded = load_table(tmp_path / "u.json")
    # rebuild one oblate and one prolate piece on their own
    for i in (4, 5):
        lo, hi = loaded.breakpoints[i], loaded.breakpoints[i + 1]
        spot = build_table_uni("global", degrees=18, quad_n=48, breakpoints=(lo, hi))
        ratio = spot.residuals[0] / loaded.residuals[i]
        assert 0.1 <= ratio <= 10


def test_resolve_table_path(tmp_path, monkeypatch):
    t = build_table("global", degrees=10, quad_n=20)
    save_table(t, tmp_path / "small.json")
    monkeypatch.setenv("BINGHAM_TABLE_DIR", str(tmp_path))
    assert resolve_table_path("small") == tmp_path / "small.json"
    assert resolve_table_path("small.json") == tmp_path / "small.json"
    assert load_table(resolve_table_path("small")).series[0].degree == 10


def test_non_finite_rejected():
    t = build_table("global", degrees=10, quad_n=20)
    t.metadata["bad"] = float("nan")
    with pytest.raises(ValueError):
        dumps_table(t)
