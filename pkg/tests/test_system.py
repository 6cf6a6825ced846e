import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import brute_force_bounds
from qlandscape.constructions import build_lambda, random_task
from qlandscape.errors import ValidationError
from qlandscape.matrix_core import random_hermitian
from qlandscape.propagator import objective
from qlandscape.system import (
    ControlField,
    ControlTask,
    QuantumSystem,
    kinematic_bounds,
    load_field,
    load_task,
    save_field,
    save_task,
    task_to_dict,
)


def _diag_task(omega, lam):
    n = len(omega)
    sys_ = QuantumSystem(np.diag(np.arange(n, dtype=float)), np.ones((n, n)) - np.eye(n))
    return ControlTask(sys_, np.diag(omega), np.diag(lam), 1.0)


def test_bounds_pure_state():
    b = kinematic_bounds(_diag_task([1, 0, 0], [1, 2, 0]))
    assert (b.Jmin, b.Jmax) == (0.0, 2.0)


def test_bounds_maximally_mixed():
    b = kinematic_bounds(_diag_task([1 / 3] * 3, [1, 2, 0]))
    assert b.Jmin == pytest.approx(1.0) and b.Jmax == pytest.approx(1.0)


def test_bounds_against_permutation_oracle():
    b = kinematic_bounds(_diag_task([0.7, 0.3], [5, 1]))
    lo, hi = brute_force_bounds([0.7, 0.3], [5, 1])
    assert b.Jmax == pytest.approx(hi, abs=1e-14) == pytest.approx(3.8)
    assert b.Jmin == pytest.approx(lo, abs=1e-14) == pytest.approx(2.2)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 4), seed=st.integers(0, 5000))
def test_objective_within_bounds(n, seed):
    task = random_task(n, seed)
    field = ControlField.random_uniform(task.T, 16, 2.0, seed)
    b = kinematic_bounds(task)
    J = objective(task, field)
    assert b.Jmin - 1e-9 <= J <= b.Jmax + 1e-9


def test_task_roundtrip_is_bit_identical(tmp_path):
    task = random_task(3, 4)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_task(task, p1)
    loaded = load_task(p1)
    save_task(loaded, p2)
    again = load_task(p2)
    for a, b in ((task.system.H0, again.system.H0), (task.rho0, again.rho0), (task.O, again.O)):
        assert np.array_equal(a, b)
    assert p1.read_bytes() == p2.read_bytes()


def test_lambda_file_loads(tmp_path):
    path = tmp_path / "lambda.json"
    save_task(build_lambda(), path)
    task = load_task(path)
    assert task.n == 3 and task.template == "lambda"


def _write(tmp_path, data):
    p = tmp_path / "t.json"
    p.write_text(json.dumps(data))
    return p


def test_trace_violation_is_reported(tmp_path):
    data = task_to_dict(build_lambda())
    data["rho0"][0][0] = [0.9, 0.0]
    with pytest.raises(ValidationError, match="density matrix trace"):
        load_task(_write(tmp_path, data))


def test_lambda_template_rejects_direct_coupling(tmp_path):
    data = task_to_dict(build_lambda())
    data["mu"][0][1] = [0.1, 0.0]
    data["mu"][1][0] = [0.1, 0.0]
    with pytest.raises(ValidationError, match="template 'lambda' inconsistent"):
        load_task(_write(tmp_path, data))


def test_custom_template_accepts_same_coupling(tmp_path):
    data = task_to_dict(build_lambda())
    data["mu"][0][1] = [0.1, 0.0]
    data["mu"][1][0] = [0.1, 0.0]
    data["template"] = "custom"
    assert load_task(_write(tmp_path, data)).n == 3


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d["H0"][0].__setitem__(1, [0.5, 0.0]), "not Hermitian"),
        (lambda d: d.update(rho0=[[[1.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]]), "dimension mismatch"),
        (lambda d: d.pop("O"), "missing keys"),
    ],
)
def test_invalid_files(tmp_path, mutate, message):
    data = task_to_dict(build_lambda())
    mutate(data)
    with pytest.raises(ValidationError, match=message):
        load_task(_write(tmp_path, data))


def test_not_psd_rejected():
    sys_ = QuantumSystem(np.diag([0.0, 1.0]), np.array([[0, 1], [1, 0.0]]))
    with pytest.raises(ValidationError, match="positive semi-definite"):
        ControlTask(sys_, np.diag([1.2, -0.2]), np.eye(2), 1.0)


def test_parse_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ValidationError, match="parse error"):
        load_task(p)


def test_field_roundtrip_and_grid(tmp_path):
    f = ControlField.random_uniform(2.0, 10, 0.5, 3)
    save_field(f, tmp_path / "f.json")
    g = load_field(tmp_path / "f.json")
    assert np.array_equal(f.values, g.values) and g.M == 10
    assert g.M * g.dt == pytest.approx(2.0, abs=0)


def test_field_rejects_non_finite():
    with pytest.raises(ValidationError, match="non-finite"):
        ControlField(1.0, [0.0, np.nan])


def test_values_are_immutable():
    f = ControlField.zeros(1.0, 4)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    h = random_hermitian(2, 0)
    s = QuantumSystem(h, h)
    with pytest.raises(ValueError):
        s.H0[0, 0] = 3
