from __future__ import annotations

import json

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from topmanifold import io
from topmanifold.core import ControlField
from topmanifold.models import load_preset

finite = st.floats(allow_nan=False, allow_infinity=False, width=64, min_value=-1e300, max_value=1e300)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=finite),
       arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=finite))
def test_matrix_roundtrip(re, im):
    if re.shape != im.shape:
        im = np.resize(im, re.shape)
    M = re + 1j * im
    back = io.decode_matrix(json.loads(json.dumps(io.encode_matrix(M))))
    np.testing.assert_array_equal(back, M)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(2, 30)), elements=finite),
       st.floats(1e-3, 1e3))
def test_field_csv_roundtrip(tmp_path, X, T):
    f = ControlField(X, T)
    p = tmp_path / "f.csv"
    io.write_field_csv(p, f)
    g = io.read_field_csv(p)
    np.testing.assert_array_equal(g.samples, f.samples)
    assert g.duration == f.duration


def test_field_json_roundtrip():
    X = np.random.default_rng(0).standard_normal((2, 9))
    f = ControlField(X, 3.3)
    g = io.field_from_dict(json.loads(json.dumps(io.field_to_dict(f))))
    np.testing.assert_array_equal(g.samples, X)


def test_system_and_objective_roundtrip():
    for name in ("fourlevel", "fivelevel", "two_spin"):
        p = load_preset(name)
        data = json.loads(json.dumps(io.preset_to_dict(p)))
        sys = io.system_from_dict(data["system"])
        np.testing.assert_array_equal(sys.H0, p.system.H0)
        for a, b in zip(sys.dipoles, p.system.dipoles):
            np.testing.assert_array_equal(a, b)
        for kind, obj in p.objectives.items():
            back = io.objective_from_dict(data["objectives"][kind])
            assert type(back) is type(obj)
            for attr in ("initial_state", "final_state", "rho0", "theta", "target"):
                if hasattr(obj, attr):
                    np.testing.assert_array_equal(getattr(back, attr), getattr(obj, attr))


def test_path_bundle_roundtrip(tmp_path):
    X = np.random.default_rng(1).standard_normal((5, 1, 7))
    io.write_path_bundle(tmp_path / "b", X, 2.0, {"R": 1.25})
    Y, manifest = io.read_path_bundle(tmp_path / "b")
    np.testing.assert_array_equal(X, Y)
    assert manifest["R"] == 1.25 and len(manifest["fields"]) == 5


def test_jsonable_handles_numpy_and_nonfinite():
    out = io.to_jsonable({"a": np.float64(1.5), "b": np.int64(2), "c": np.array([1.0, np.inf]), "d": np.bool_(True)})
    assert out == {"a": 1.5, "b": 2, "c": [1.0, None], "d": True}
