import json
import os
from pathlib import Path

import pytest

from drgda.cli import NOT_REACHED, iterations_to, main, run_experiment, summarize, trace_filename
from drgda.config import loads, parse_overrides, parse_value, validate_config
from drgda.errors import ConfigError
from drgda.trace import COLUMNS, data_section, read_trace

EXAMPLE = Path(__file__).resolve().parents[1] / "configs" / "example.toml"
FAST = ["metrics.probe_pairs=500", "solver.T=20"]


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _config(**extra):
    text = EXAMPLE.read_text()
    overrides = parse_overrides(FAST)
    overrides.update(extra)
    return loads(text, overrides)


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("0.5") == 0.5
    assert parse_value("true") is True
    assert parse_value("[1, 2]") == [1, 2]
    assert parse_value("auto") == "auto"


def test_override_syntax_error():
    with pytest.raises(ConfigError):
        parse_overrides(["solver.beta"])


def test_parse_error_reports_line():
    with pytest.raises(ConfigError) as info:
        loads('name = "x"\nmode = "drgda"\n[solver\n')
    assert info.value.line == 3


def test_bundled_config_is_compliant():
    assert validate_config(_config()) == []


def test_validate_k_below_required():
    issues = validate_config(_config(**{"solver.k": 1}))
    assert len(issues) == 1
    w = issues[0]
    assert w.level == "warning" and w.field == "solver.k"
    assert "k=1" in w.message and "required_k=2" in w.message


def test_validate_alpha_out_of_range_is_error():
    issues = validate_config(_config(**{"solver.alpha": 1.5}))
    assert [(i.level, i.field) for i in issues] == [("error", "solver.alpha")]
    assert "line" in issues[0].message


def test_validate_eta_above_inverse_L():
    issues = validate_config(_config(**{"solver.eta": 0.9}))
    fields = [(i.level, i.field) for i in issues]
    assert ("warning", "solver.eta") in fields
    assert all(level == "warning" for level, _ in fields)
    assert any("1/L_hat" in i.message for i in issues)


def test_validate_unstable_dual_tracking():
    issues = validate_config(_config(**{"solver.eta": 0.7}))
    assert any("dual tracking" in i.message for i in issues)


def test_validate_beta_cap():
    issues = validate_config(_config(**{"solver.beta": 0.1}))
    assert [(i.level, i.field) for i in issues] == [("warning", "solver.beta")]


@pytest.mark.parametrize("override, field", [
    ({"mode": "sgd"}, "mode"),
    ({"problem.kind": "lasso"}, "problem.kind"),
    ({"problem.color": 3}, "problem.color"),
    ({"topology.n": 0}, "topology.n"),
    ({"output.format": "xml"}, "output.format"),
    ({"sweep": {"solver.beta": []}}, "sweep.solver.beta"),
    ({"seeds": "zero"}, "seeds"),
    ({"mode": "drsgda"}, "solver.batch_size"),
])
def test_validate_structural_errors(override, field):
    issues = validate_config(_config(**override))
    assert any(i.level == "error" and i.field == field for i in issues)


def test_missing_seed_is_error():
    text = EXAMPLE.read_text().replace("seed = 0\nmode", "mode")
    cfg = loads(text.replace("\nseed = 0\n", "\n", 1), parse_overrides(FAST))
    assert any(i.field == "problem.seed" and i.level == "error" for i in validate_config(cfg))


def test_sweep_points_cartesian():
    cfg = _config(sweep={"solver.beta": [1e-4, 2e-4, 5e-4]}, seeds=[0, 1])
    points = cfg.sweep_points()
    assert len(points) == 6
    assert {p["solver.seed"] for p in points} == {0, 1}
    names = {trace_filename("ex", p, "csv") for p in points}
    assert len(names) == 6
    assert "ex__beta=0.0001__seed=0.csv" in names


def test_run_minimal_config(tmp_path):
    code, paths = run_experiment(str(EXAMPLE), str(tmp_path), ["metrics.probe_pairs=500"])
    assert code == 0 and len(paths) == 1
    header, rows, errors = read_trace(paths[0])
    assert len(rows) == 100 and errors == []
    assert [r["t"] for r in rows] == list(range(100))
    assert header["columns"] == list(COLUMNS)
    for key in ("L_hat", "D_hat", "M_hat", "lambda2", "k", "D_run"):
        assert key in header["constants"]
    assert header["config"]["solver"]["beta"] == 0.0009
    assert header["code_version"]
    lines = Path(paths[0]).read_text().splitlines()
    assert lines[0].startswith("# ")
    assert len({len(line.split(",")) for line in lines[1:]}) == 1


def test_run_is_deterministic(tmp_path):
    a = run_experiment(str(EXAMPLE), str(tmp_path / "a"), FAST)[1][0]
    b = run_experiment(str(EXAMPLE), str(tmp_path / "b"), FAST)[1][0]
    assert data_section(a) == data_section(b)
    assert Path(a).read_text().splitlines()[0] == Path(b).read_text().splitlines()[0]


def test_run_sweep_files(tmp_path):
    cfg = EXAMPLE.read_text() + '\n[sweep]\n"solver.beta" = [0.0001, 0.0002, 0.0005]\n'
    cfg = cfg.replace('name = "example"', 'name = "example"\nseeds = [0, 1]')
    code, paths = run_experiment(_write(tmp_path, cfg), str(tmp_path / "out"), FAST, workers=2)
    assert code == 0
    assert len(paths) == 6 == len(os.listdir(tmp_path / "out"))
    for p in paths:
        header, _, _ = read_trace(p)
        assert Path(p).name == trace_filename("example", header["sweep_point"], "csv")


def test_run_jsonl(tmp_path):
    code, paths = run_experiment(str(EXAMPLE), str(tmp_path), FAST + ["output.format=jsonl"])
    assert code == 0 and paths[0].endswith(".jsonl")
    header, rows, _ = read_trace(paths[0])
    assert len(rows) == 20 and set(rows[0]) == set(COLUMNS)
    assert header["trace_schema"] == 1


def test_run_config_error_exit_code(tmp_path):
    assert run_experiment(_write(tmp_path, "mode = [\n"), str(tmp_path))[0] == 2
    assert run_experiment(str(EXAMPLE), str(tmp_path), ["solver.alpha=2.0"])[0] == 2


def test_run_divergence_keeps_partial_trace(tmp_path):
    over = FAST + ["solver.T=500", "solver.eta=500.0", "solver.beta=50.0", "solver.project_dual=false"]
    code, paths = run_experiment(str(EXAMPLE), str(tmp_path), over)
    assert code == 1
    _, rows, errors = read_trace(paths[0])
    assert errors and len(rows) < 500


def test_summarize(tmp_path):
    slow = run_experiment(str(EXAMPLE), str(tmp_path / "s"), FAST)[1][0]
    fast = run_experiment(str(EXAMPLE), str(tmp_path / "f"), FAST + ["solver.beta=0.05"])[1][0]
    broken = tmp_path / "broken.csv"
    broken.write_text("# {}\nt,metric_total\n1,2,3\n")
    summary = summarize([slow, str(broken), fast])
    assert [s["file"] for s in summary[:2]] == sorted([slow, fast], key=lambda p: read_trace(p)[1][-1]["metric_total"])
    assert "error" in summary[2] and summary[2]["file"] == str(broken)
    _, rows, _ = read_trace(slow)
    entry = next(s for s in summary if s["file"] == slow)
    scan = next((r["t"] for r in rows if r["metric_total"] <= 0.1), NOT_REACHED)
    assert entry["iters_to_0.1"] == scan
    assert entry["iters_to_0.01"] == NOT_REACHED
    assert entry["total_comms"] == rows[-1]["comms"]


def test_iterations_to_scan():
    rows = [{"t": t, "metric_total": m} for t, m in enumerate([1.0, 0.5, 0.09, 0.2, 0.005])]
    assert iterations_to(rows, 0.1) == 2
    assert iterations_to(rows, 0.01) == 4
    assert iterations_to(rows, 1e-3) == NOT_REACHED


def test_main_entry_points(tmp_path, capsys):
    assert main(["validate", "--config", str(EXAMPLE), "--override", "metrics.probe_pairs=500"]) == 0
    assert capsys.readouterr().out.strip() == "ok"
    assert main(["validate", "--config", str(EXAMPLE), "--override", "solver.k=1",
                 "--override", "metrics.probe_pairs=500", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)[0]["field"] == "solver.k"
    args = ["run", "--config", str(EXAMPLE), "--out-dir", str(tmp_path)]
    for o in FAST:
        args += ["--override", o]
    assert main(args) == 0
    path = capsys.readouterr().out.strip()
    assert main(["summarize", path, "--json"]) == 0
    assert json.loads(capsys.readouterr().out)[0]["iterations"] == 20
    assert main(["summarize", path]) == 0
    assert "iters_to_0.1" in capsys.readouterr().out
