import json

import numpy as np
import pytest

from entity_kinetics.errors import ModelError
from entity_kinetics.model import (BUILTIN_MODELS, InteractionModel, ScalingConfig, builtin,
                                   load_model, model_from_dict, normalize_kernels, random_model,
                                   require_valid, save_model, validate)
from entity_kinetics.state_space import StateSpace


def test_builtins_validate(space):
    for name in BUILTIN_MODELS:
        assert validate(builtin(name, space)) == []


def test_uniform_drift_tables():
    sp = StateSpace(2, 2)
    m = builtin("uniform-drift", sp)
    assert m.m_max == 1
    assert np.all(m.rates[1] == 1.0)
    # total jump rate per entity is a[1] = 1, spread uniformly
    assert np.allclose(m.kernels[1], 0.25)


def test_imitation_kernel_rows_are_point_masses(space):
    A = builtin("imitation", space).kernels[2]
    S = space.S
    for x1 in range(S):
        for x2 in range(S):
            row = A[:, x1, x2]
            assert row[x2] == 1.0 and row.sum() == 1.0


def test_mixed_pair_rates():
    sp = StateSpace(2, 2)
    a2 = builtin("mixed", sp).rates[2]
    for u in range(2):
        for w in range(2):
            assert a2[sp.flatten((0, u)), sp.flatten((1, w))] == 1.0
            assert a2[sp.flatten((0, u)), sp.flatten((0, w))] == 0.5


def test_unknown_builtin(space):
    with pytest.raises(ValueError):
        builtin("nope", space)


def test_builtins_are_deterministic(space):
    a, b = builtin("mixed", space), builtin("mixed", space)
    for m in a.orders():
        assert a.rates[m].tobytes() == b.rates[m].tobytes()
        assert a.kernels[m].tobytes() == b.kernels[m].tobytes()


def _with_kernel(model, m, A):
    kernels = dict(model.kernels)
    kernels[m] = A
    return InteractionModel(model.space, model.rates, kernels, model.epsilon, model.m_max)


def test_validate_reports_unnormalized_row(space):
    m = builtin("imitation", space)
    A = np.array(m.kernels[1])
    A[:, 2] *= 1 + 1e-6
    diags = validate(_with_kernel(m, 1, A))
    assert len(diags) == 1
    d = diags[0]
    assert d.check == "kernel row not normalized" and d.m == 1 and d.index == (2,)
    assert d.value == pytest.approx(1 + 1e-6)


def test_validate_reports_negative_rate(space):
    m = builtin("imitation", space)
    a = np.ones((space.S, space.S))
    a[1, 3] = -0.1
    diags = validate(m.with_rates(2, a))
    assert [d.check for d in diags] == ["negative rate"]
    assert diags[0].index == (1, 3) and diags[0].value == -0.1
    with pytest.raises(ModelError):
        require_valid(m.with_rates(2, a))


def test_validate_rate_bound(space):
    m = builtin("uniform-drift", space)
    over = InteractionModel(space, m.rates, m.kernels, m_max=1, rate_bounds={1: 0.5})
    assert [d.check for d in validate(over)] == ["rate exceeds bound"]


def test_renormalization_makes_rows_exact(space):
    m = random_model(space, 2, seed=4)
    A = np.array(m.kernels[2]) * (1 + 3e-7)
    fixed = normalize_kernels(_with_kernel(m, 2, A))
    assert np.max(np.abs(fixed.kernels[2].sum(axis=0) - 1)) <= 1e-15
    # rows too far off are left for validate to report
    far = normalize_kernels(_with_kernel(m, 2, np.array(m.kernels[2]) * 1.01))
    assert validate(far)[0].check == "kernel row not normalized"


def test_model_shape_errors(space):
    with pytest.raises(ModelError):
        InteractionModel(space, {1: np.ones(3)}, {1: np.ones((4, 4)) / 4}, m_max=1)
    with pytest.raises(ModelError):
        InteractionModel(space, {1: np.ones(4)}, {1: np.ones((4, 4)) / 4}, m_max=2)
    with pytest.raises(ModelError):
        InteractionModel(space, {1: np.ones(4)}, {1: np.ones((4, 4)) / 4}, epsilon=0.0, m_max=1)


def test_m_max_defaults_to_subpopulation_count():
    sp = StateSpace(3, 1)
    m = random_model(sp, 3, seed=0)
    assert InteractionModel(sp, m.rates, m.kernels).m_max == 3


def test_roundtrip_json(tmp_path, space):
    m = random_model(space, 2, epsilon=0.3, seed=9)
    path = tmp_path / "model.json"
    save_model(m, path)
    back = load_model(path)
    assert back.epsilon == 0.3 and back.m_max == 2
    for k in m.orders():
        assert np.allclose(back.rates[k], m.rates[k], rtol=0, atol=0)
        assert np.allclose(back.kernels[k], m.kernels[k], rtol=0, atol=1e-15)


def test_model_file_format(tmp_path):
    data = {"M": 1, "K": 2, "m_max": 1, "epsilon": 1.0,
            "rates": {"1": [1.0, 2.0]}, "kernels": {"1": [0.5, 0.25, 0.5, 0.75]}}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    m = load_model(path)
    # row-major: kernels[1][v, x]
    assert m.kernels[1][1, 1] == 0.75 and m.rates[1][1] == 2.0
    with pytest.raises(ModelError):
        model_from_dict({"M": 1, "K": 2})
    bad = dict(data, kernels={"1": [0.5, 0.25, 0.6, 0.75]})
    with pytest.raises(ModelError):
        model_from_dict(bad)


def test_scaling_config():
    cfg = ScalingConfig([0.1, 0.05, 0.025])
    assert cfg.epsilon_sequence == (0.1, 0.05, 0.025)
    assert ScalingConfig.N_of_epsilon(0.025) == 40
    with pytest.raises(ValueError):
        ScalingConfig([0.1, 0.1])
    with pytest.raises(ValueError):
        ScalingConfig([0.1, -1.0])
