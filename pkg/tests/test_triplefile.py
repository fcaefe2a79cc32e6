import json

import numpy as np
import pytest

from bclkit.errors import DimensionMismatch, InvalidInput, NotUnitary
from bclkit.model import random_triple, t_rot
from bclkit.numcore import Frame, orthonormalize_columns
from bclkit.triplefile import (
    FIELD_ORDER,
    ParseError,
    dumps_triple,
    loads_triple,
    read_frame,
    read_triple,
    write_frame,
    write_triple,
)


@pytest.mark.parametrize("shape", [(1, 1, 3, 1), (2, 2, 3, 1), (1, 2, 4, 4), (2, 1, 3, 0)])
def test_round_trip_is_byte_identical(shape, tmp_path):
    t = random_triple(*shape, seed=9, twist="random")
    text = dumps_triple(t)
    back = loads_triple(text)
    assert dumps_triple(back) == text
    assert np.array_equal(back.u, t.u) and np.array_equal(back.twist, t.twist)
    write_triple(t, tmp_path / "t.json")
    assert read_triple(tmp_path / "t.json").seed == t.seed


def test_field_order_and_complex_encoding():
    doc = json.loads(dumps_triple(t_rot(0.3), include_pperp=True))
    assert tuple(doc) == FIELD_ORDER[: len(doc)]
    assert all(len(z) == 2 for row in doc["u"] for z in row)
    assert "-0.0" not in dumps_triple(t_rot(0.0))


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as exc:
        loads_triple('{\n "d1": 1,\n "d2": oops\n}')
    assert exc.value.line == 3


def test_parse_error_reports_field():
    doc = json.loads(dumps_triple(t_rot(0.3)))
    doc["u"][0][0] = 1.0
    with pytest.raises(ParseError) as exc:
        loads_triple(json.dumps(doc))
    assert exc.value.field == "u"
    doc = json.loads(dumps_triple(t_rot(0.3)))
    doc["d1"] = -1
    with pytest.raises(ParseError) as exc:
        loads_triple(json.dumps(doc))
    assert exc.value.field == "d1"
    del doc["d1"]
    with pytest.raises(ParseError):
        loads_triple(json.dumps(doc))
    with pytest.raises(ParseError):
        loads_triple(json.dumps({**json.loads(dumps_triple(t_rot(0.3))), "extra": 1}))


def test_non_unitary_document_is_rejected_unless_lenient():
    doc = json.loads(dumps_triple(t_rot(0.3)))
    doc["u"][0][0] = [2.0, 0.0]
    with pytest.raises(NotUnitary):
        loads_triple(json.dumps(doc))
    t = loads_triple(json.dumps(doc), strict=False)
    assert t.residuals["problems"]


def test_missing_file(tmp_path):
    with pytest.raises(InvalidInput):
        read_triple(tmp_path / "absent.json")


def test_frame_files(tmp_path, rng):
    f = orthonormalize_columns(rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))
    write_frame(f, tmp_path / "f.json")
    g = read_frame(tmp_path / "f.json", m=4)
    assert np.allclose(g.columns, f.columns)
    with pytest.raises(DimensionMismatch):
        read_frame(tmp_path / "f.json", m=3)
    (tmp_path / "bare.json").write_text(json.dumps([[[1, 0]], [[0, 0]]]))
    assert read_frame(tmp_path / "bare.json").k == 1
    (tmp_path / "bad.json").write_text(json.dumps([[[1, 0]], [[1, 0]]]))
    with pytest.raises(InvalidInput):
        read_frame(tmp_path / "bad.json")
    assert isinstance(Frame.full(2), Frame)
