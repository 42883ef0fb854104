import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entity_kinetics import cli
from entity_kinetics.artifacts import (CONFIG_PREFIX, emit, parse_csv, parse_json, parse_value, to_csv,
                                      to_json)
from entity_kinetics.errors import InvariantError
from entity_kinetics.model import builtin, save_model
from entity_kinetics.state_space import StateSpace

from oracles import closed_form_relaxation


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_builtin(capsys):
    code, out, _ = run(capsys, "validate", "--builtin", "imitation")
    assert code == 0 and out.strip() == "ok"


def test_validate_reports_diagnostics(tmp_path, capsys):
    model = builtin("imitation", StateSpace(2, 2))
    path = tmp_path / "bad.json"
    save_model(model, path)
    data = json.loads(path.read_text())
    data["rates"]["1"][0] = -0.1
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "validate", "--model", str(path))
    assert code == 1 and "negative rate" in err


@pytest.mark.parametrize("content", ["{not json", json.dumps({"M": 2})])
def test_malformed_model_file_exits_1(tmp_path, capsys, content):
    path = tmp_path / "m.json"
    path.write_text(content)
    code, out, _ = run(capsys, "vlasov", "--model", str(path))
    assert code == 1 and out == ""


def test_missing_model_file_exits_1(tmp_path, capsys):
    code, _, err = run(capsys, "validate", "--model", str(tmp_path / "nope.json"))
    assert code == 1 and "nope.json" in err


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["hierarchy", "--dt", "-1"],
    ["meanfield", "--epsilons", "a,b"],
    ["ssa", "--N", "0"],
    ["validate", "--builtin", "imitation", "--model", "x.json"],
])
def test_bad_flags_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 1


def test_invalid_values_exit_1(capsys):
    assert run(capsys, "vlasov", "--f0", "1,2")[0] == 1
    assert run(capsys, "functionals", "--smax", "4", "--nmax", "2")[0] == 1


def test_invariant_violation_exits_2(monkeypatch, capsys):
    def boom(*args):
        raise InvariantError("mass drifted")
    monkeypatch.setitem(cli.COMMANDS, "vlasov", boom)
    code, _, err = run(capsys, "vlasov")
    assert code == 2 and "mass drifted" in err


def test_unwritable_output_exits_1(tmp_path, capsys):
    target = tmp_path / "missing_dir" / "out.csv"
    code, _, err = run(capsys, "vlasov", "--samples", "1", "--out", str(target))
    assert code == 1 and str(target) in err


def test_meanfield_example(capsys):
    code, out, _ = run(capsys, "meanfield", "--builtin", "imitation", "--epsilons", "0.1,0.05,0.025",
                       "--t", "0.5", "--smax", "3")
    assert code == 0
    table, config = parse_csv(out)
    assert table["epsilon"] == [0.1, 0.05, 0.025]
    err = table["err"]
    assert len(err) == 3 and err[0] > err[1] > err[2]
    assert config["command"] == "meanfield" and config["builtin"] == "imitation" and "version" in config


def test_meanfield_side_tables(tmp_path, capsys):
    chaos, limit = tmp_path / "chaos.csv", tmp_path / "limit.json"
    code, _, _ = run(capsys, "meanfield", "--epsilons", "0.1", "--t", "0.3", "--smax", "2",
                     "--chaos-out", str(chaos), "--limit-out", str(limit), "--format", "json")
    assert code == 0
    table, config = parse_json(chaos.read_text())
    assert config["table"] == "chaos" and set(table["k"]) == {1, 2}
    table, _ = parse_json(limit.read_text())
    assert max(table["value"]) < 1e-5


def test_ssa_noninteracting_example(capsys):
    code, out, _ = run(capsys, "ssa", "--builtin", "uniform-drift", "--N", "1", "--t", "1",
                       "--replicas", "100000")
    assert code == 0
    table, config = parse_csv(out)
    f0 = np.arange(4, 0, -1) / 10.0
    exact = closed_form_relaxation(f0, 1.0)
    assert np.allclose(table["vlasov"], exact, atol=1e-8)
    emp, se = np.array(table["empirical"]), np.array(table["stderr"])
    assert np.all(np.abs(emp - exact) <= 3 * se)
    assert config["f0"] == pytest.approx(list(f0))


def test_ssa_replica_table(tmp_path, capsys):
    per = tmp_path / "rep.csv"
    code, _, _ = run(capsys, "ssa", "--N", "5", "--replicas", "20", "--replica-out", str(per))
    assert code == 0
    table, config = parse_csv(per.read_text())
    assert table["replica"] == list(range(20)) and config["table"] == "replicas"
    h = np.array([table[f"h{a}"] for a in range(4)])
    assert np.allclose(h.sum(axis=0), 1.0)


def test_dump_generator(tmp_path, capsys):
    path = tmp_path / "g.csv"
    code, out, _ = run(capsys, "validate", "--builtin", "uniform-drift", "--dump-generator", "1",
                       "--out", str(path))
    assert code == 0 and out.strip() == "ok"
    table, config = parse_csv(path.read_text())
    G = np.array([table[f"c{c}"] for c in range(4)]).T
    assert config["operator"] == "lambda_n" and config["n"] == 1
    assert np.allclose(G, np.full((4, 4), 0.25) - np.eye(4))


def test_dump_generator_to_stdout_keeps_csv_clean(capsys):
    code, out, err = run(capsys, "validate", "--dump-generator", "2")
    assert code == 0 and err.strip() == "ok"
    table, _ = parse_csv(out)
    assert len(table["row"]) == 16


@pytest.mark.parametrize("argv", [
    ["hierarchy", "--smax", "2", "--t", "0.5", "--samples", "2"],
    ["vlasov", "--t", "1", "--samples", "2", "--series-nmax", "2"],
    ["functionals", "--t", "0.5", "--samples", "2"],
    ["ssa", "--N", "4", "--replicas", "200", "--seed", "7"],
    ["meanfield", "--epsilons", "0.1,0.05", "--t", "0.2", "--smax", "2"],
])
def test_reruns_are_byte_identical(tmp_path, capsys, argv):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith(CONFIG_PREFIX)


def test_subcommand_outputs_are_sane(capsys):
    code, out, _ = run(capsys, "hierarchy", "--smax", "2", "--t", "0.5", "--samples", "2")
    table, _ = parse_csv(out)
    assert code == 0 and max(table["expansion_vs_rk4_error"]) < 1e-6
    code, out, _ = run(capsys, "vlasov", "--t", "2", "--samples", "4")
    table, _ = parse_csv(out)
    assert code == 0 and np.allclose(table["mass"], 1.0, atol=1e-10)
    code, out, _ = run(capsys, "functionals", "--t", "0.7", "--samples", "2")
    table, _ = parse_csv(out)
    assert code == 0 and max(table["residual"]) <= 1e-10


def test_emit_shapes(tmp_path):
    path = tmp_path / "e.csv"
    emit({}, "csv", path, {"a": 1})
    assert path.read_text() == CONFIG_PREFIX + '{"a":1}\n\n'
    emit({"x": []}, "csv", path)
    assert path.read_text().splitlines() == [CONFIG_PREFIX + "{}", "x"]
    emit({"x": [1.5], "y": ["s"]}, "csv", path)
    assert path.read_text().splitlines() == [CONFIG_PREFIX + "{}", "x,y", "1.5,s"]
    with pytest.raises(ValueError):
        emit({"x": [1]}, "xml", path)
    with pytest.raises(OSError, match="nowhere"):
        emit({"x": [1]}, "csv", tmp_path / "nowhere" / "f.csv")


def test_float_formatting_keeps_floats_floats():
    table, _ = parse_csv(to_csv({"v": [1.0, 1e-300, 0.1, 3]}, {}))
    assert table["v"] == [1.0, 1e-300, 0.1, 3]
    assert isinstance(table["v"][0], float) and isinstance(table["v"][3], int)


cells = st.one_of(
    st.integers(-10**12, 10**12),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(st.characters(whitelist_categories=("Ll", "Lu")), min_size=1, max_size=6)
    .filter(lambda s: isinstance(parse_value(s), str)),
)
tables = st.integers(0, 5).flatmap(lambda n: st.dictionaries(
    st.text(st.characters(whitelist_categories=("Ll",)), min_size=1, max_size=5),
    st.lists(cells, min_size=n, max_size=n), min_size=1, max_size=4))


def _same(a, b):
    assert list(a) == list(b)
    for k in a:
        for x, y in zip(a[k], b[k], strict=True):
            if isinstance(x, float):
                assert isinstance(y, float) and (x == y or (math.isnan(x) and math.isnan(y)))
            else:
                assert x == y and type(x) is type(y)


@given(tables)
def test_csv_roundtrip_property(table):
    back, config = parse_csv(to_csv(table, {"k": 1}))
    assert config == {"k": 1}
    _same(table, back)


@given(tables)
def test_json_roundtrip_property(table):
    back, config = parse_json(to_json(table, {"k": [1, 2]}))
    assert config == {"k": [1, 2]}
    _same(table, back)
