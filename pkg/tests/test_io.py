import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from structvar import io
from structvar.model import GroupPartition, make_transition


def test_transition_roundtrip(tmp_path):
    T = make_transition(6, rank=1, edge_prob=0.3, n_hubs=1, partition=GroupPartition.rows(6), seed=0)
    path = tmp_path / "t.json"
    io.write_transition(path, T)
    back = io.read_transition(path)
    for a, b in zip((T.L, T.S, T.G), (back.L, back.S, back.G)):
        np.testing.assert_array_equal(a, b)
    assert back.partition == T.partition


@pytest.mark.parametrize("doc, msg", [({"L": []}, "invalid transition"),
                                      ({"p": 2, "L": [[1]], "S": [[0, 0], [0, 0]],
                                        "G": [[0, 0], [0, 0]]}, "shape")])
def test_transition_bad_documents(doc, msg):
    with pytest.raises(io.DataFormatError, match=msg):
        io.transition_from_dict(doc)


def test_transition_bad_json(tmp_path):
    path = tmp_path / "t.json"
    path.write_text('{"p": 2,\n "L": [}')
    with pytest.raises(io.DataFormatError) as exc:
        io.read_transition(path)
    assert exc.value.row == 2


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 4)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_series_roundtrip_is_bit_exact(tmp_path_factory, A):
    path = tmp_path_factory.mktemp("s") / "s.csv"
    io.write_series(path, A)
    back, header = io.read_series(path)
    assert header is None
    np.testing.assert_array_equal(back, A)


def test_series_header(tmp_path):
    path = tmp_path / "s.csv"
    io.write_series(path, np.eye(2), header=["a", "b"])
    back, header = io.read_series(path)
    assert header == ["a", "b"]
    np.testing.assert_array_equal(back, np.eye(2))


@pytest.mark.parametrize("text, row, col", [
    ("1,2\n3\n", 2, None),
    ("1,2\n3,x\n", 2, 2),
    ("a,b\n1,nan\n", 2, 2),
    ("a,b\n", 2, None),
    ("", None, None),
])
def test_series_errors(tmp_path, text, row, col):
    path = tmp_path / "s.csv"
    path.write_text(text)
    with pytest.raises(io.DataFormatError) as exc:
        io.read_series(path)
    assert (exc.value.row, exc.value.column) == (row, col)


def test_edge_list_direction_and_threshold(tmp_path):
    M = np.array([[0.0, 0.5], [-0.01, 0.0]])
    assert io.edge_list(M) == [(0, 1, 0.5), (1, 0, -0.01)]
    assert io.edge_list(M, threshold=0.1, names=["x", "y"]) == [("x", "y", 0.5)]
    path = tmp_path / "e.csv"
    io.write_edge_list(path, M, 0.1)
    assert path.read_text().splitlines() == ["source,target,weight", "0,1,0.5"]


def test_json_helpers(tmp_path):
    obj = {"a": np.float64(1.5), "b": np.arange(3), "c": float("inf"), "d": (np.int64(2), None),
           "e": np.bool_(True)}
    assert json.loads(io.dumps(obj)) == {"a": 1.5, "b": [0, 1, 2], "c": None, "d": [2, None],
                                         "e": True}
    path = tmp_path / "x.json"
    io.write_json(path, obj)
    assert json.loads(path.read_text())["c"] is None
