"""CLI round trips: model files, every subcommand, exit codes, CSV format."""

import csv
import math
import subprocess

import pytest

from walkfluct.cli import emit_csv, load_model, random_atomic_measure, run
from walkfluct.errors import ParseError
from walkfluct.fluct import busy_period_rational, walk_functionals

import numpy as np

MM1_YAML = """\
schema_version: 1
kind: product
b: {family: exponential, rate: 2.0}
a: {family: exponential, rate: 1.0}
"""

THRESHOLD_YAML = """\
schema_version: 1
kind: threshold
f1: {family: exponential, rate: 3.0}
f2: {family: exponential, rate: 1.2}
a: {family: exponential, rate: 1.0}
l: 1.0
"""

MARKOV_YAML = """\
schema_version: 1
kind: markov_modulated
alpha: [0.6, 0.4]
transitions: [[0.3, 0.2], [0.1, 0.4]]
absorb: [0.5, 0.5]
f: {family: exponential, rate: 5.0}
g: {family: exponential, rate: 2.0}
"""


@pytest.fixture()
def mm1_file(tmp_path):
    p = tmp_path / "mm1.yaml"
    p.write_text(MM1_YAML)
    return str(p)


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


# --- model files -------------------------------------------------------------


def test_load_model_product(mm1_file):
    m = load_model(mm1_file)
    assert m.kind == "product"
    assert m.label == "mm1"  # defaults to the file stem
    assert m.mean_b == pytest.approx(0.5)
    assert m.mean_a == pytest.approx(1.0)
    assert m.rational is not None


def test_load_model_label_field(tmp_path):
    p = tmp_path / "anything.yaml"
    p.write_text(MM1_YAML + 'label: custom\n')
    assert load_model(str(p)).label == "custom"


@pytest.mark.parametrize("text,kind", [
    (THRESHOLD_YAML, "threshold"),
    (MARKOV_YAML, "markov_modulated"),
])
def test_load_model_other_kinds(tmp_path, text, kind):
    p = tmp_path / "m.yaml"
    p.write_text(text)
    m = load_model(str(p))
    assert m.kind == kind
    assert m.rational is not None


def test_loaded_threshold_matches_builtin(tmp_path, models):
    p = tmp_path / "t.yaml"
    p.write_text(THRESHOLD_YAML)
    wf_file = walk_functionals(load_model(str(p)))
    wf_builtin = walk_functionals(models["threshold_exp"])
    a = busy_period_rational(wf_file, 0.5, 1.0).value
    b = busy_period_rational(wf_builtin, 0.5, 1.0).value
    assert abs(a - b) < 1e-12


@pytest.mark.parametrize("text", [
    "kind: product\n",                                     # no schema_version
    "schema_version: 2\nkind: product\n",                  # wrong version
    MM1_YAML.replace("kind: product", "kind: levy"),       # unknown kind
    MM1_YAML.replace("exponential", "zeta"),               # unknown family
    MM1_YAML.replace(", rate: 2.0", ""),                   # missing parameter
    "- just\n- a\n- list\n",                               # not a mapping
    "b: {family: [unclosed\n",                             # YAML syntax error
    MM1_YAML.replace("rate: 2.0", "rate: -1.0"),           # bad parameter value
])
def test_load_model_parse_errors(tmp_path, text):
    p = tmp_path / "bad.yaml"
    p.write_text(text)
    with pytest.raises(ParseError):
        load_model(str(p))


def test_load_model_missing_file(tmp_path):
    with pytest.raises(ParseError, match="cannot read"):
        load_model(str(tmp_path / "absent.yaml"))


# --- eval --------------------------------------------------------------------


def test_eval_busy_rational(mm1_file, tmp_path, mm1_refs):
    out = tmp_path / "o.csv"
    rc = run(["eval", "busy", "--model", mm1_file, "--engine", "rational",
              "--z", "0.5", "--s", "0.5", "--out", str(out)])
    assert rc == 0
    rows = _read_csv(out)
    assert len(rows) == 1
    assert rows[0]["method"] == "rational"
    val = complex(float(rows[0]["value_re"]), float(rows[0]["value_im"]))
    assert abs(val - mm1_refs.busy(0.5, 0.5)) < 1e-10


def test_eval_busy_contour(mm1_file, tmp_path, mm1_refs):
    out = tmp_path / "o.csv"
    rc = run(["eval", "busy", "--model", mm1_file,
              "--z", "0.5", "--s", "0.5", "--out", str(out)])
    assert rc == 0
    row = _read_csv(out)[0]
    assert row["method"] == "contour"
    val = complex(float(row["value_re"]), float(row["value_im"]))
    assert abs(val - mm1_refs.busy(0.5, 0.5)) < max(
        5.0 * float(row["abs_err"]), 1e-6)


def test_eval_busy_montecarlo(mm1_file, tmp_path, mm1_refs):
    out = tmp_path / "o.csv"
    rc = run(["eval", "busy", "--model", mm1_file, "--engine", "mc",
              "--z", "0.5", "--s", "0.5", "--paths", "40000", "--seed", "7",
              "--out", str(out)])
    assert rc == 0
    row = _read_csv(out)[0]
    assert row["method"] == "montecarlo"
    val = complex(float(row["value_re"]), float(row["value_im"]))
    assert abs(val - mm1_refs.busy(0.5, 0.5)) < max(
        5.0 * float(row["abs_err"]), 2e-3)


def test_eval_busy_series(mm1_file, tmp_path, mm1_refs):
    out = tmp_path / "o.csv"
    rc = run(["eval", "busy", "--model", mm1_file, "--engine", "series",
              "--z", "0.5", "--s", "0.5", "--paths", "4000", "--cap", "40",
              "--seed", "13", "--out", str(out)])
    assert rc == 0
    row = _read_csv(out)[0]
    assert row["method"] == "series"
    val = complex(float(row["value_re"]), float(row["value_im"]))
    assert abs(val - mm1_refs.busy(0.5, 0.5)) < max(
        4.0 * float(row["abs_err"]), 5e-3)


def test_eval_default_grid_steps(mm1_file, tmp_path, mm1_refs):
    out = tmp_path / "o.csv"
    rc = run(["eval", "steps", "--model", mm1_file, "--engine", "rational",
              "--out", str(out)])
    assert rc == 0
    rows = _read_csv(out)
    assert [float(r["z_re"]) for r in rows] == [0.3, 0.5, 0.7]
    for r in rows:
        assert abs(float(r["value_re"]) - mm1_refs.steps(float(r["z_re"]))) < 1e-10


def test_eval_exit_codes(mm1_file, tmp_path):
    base = ["eval", "busy", "--model", mm1_file, "--s", "1"]
    assert run(base + ["--engine", "rational", "--z", "1.2"]) == 1  # |z| > 1
    assert run(base + ["--engine", "contour", "--z", "1.0"]) == 1   # closed disk
    assert run(["eval", "idle", "--model", mm1_file, "--engine", "rational",
                "--z", "0.5", "--s", "1"]) == 1                     # no idle kernel route
    assert run(["eval", "max", "--model", mm1_file, "--engine", "mc",
                "--z", "0.5", "--s", "1"]) == 1                     # no max sampler route
    assert run(base + ["--engine", "contour", "--z", "nonsense"]) == 1
    assert run(["eval", "busy", "--model", str(tmp_path / "none.yaml"),
                "--z", "0.5", "--s", "1"]) == 1


def test_cli_usage_errors_exit_two():
    assert run([]) == 2               # argparse: missing subcommand
    assert run(["eval"]) == 2         # argparse: missing functional and model


# --- roots -------------------------------------------------------------------


def test_roots_command(mm1_file, tmp_path, mm1_refs):
    out = tmp_path / "r.csv"
    rc = run(["roots", "--model", mm1_file, "--z", "0.5", "--s", "0.5",
              "--out", str(out)])
    assert rc == 0
    rows = _read_csv(out)
    assert len(rows) == 1
    assert int(rows[0]["count"]) == 1
    root = complex(float(rows[0]["root_re"]), float(rows[0]["root_im"]))
    assert abs(root - mm1_refs.xi1(0.5, 0.5)) < 1e-9
    assert float(rows[0]["residual"]) < 1e-8


# --- simulate ----------------------------------------------------------------


def test_simulate_first_descent(mm1_file, tmp_path, mm1_refs):
    out = tmp_path / "s.csv"
    rc = run(["simulate", "first-descent", "--model", mm1_file,
              "--z", "0.5", "--s1", "0.5", "--paths", "40000", "--seed", "7",
              "--out", str(out)])
    assert rc == 0
    row = _read_csv(out)[0]
    assert row["functional"] == "first-descent"
    noise = 4.0 * float(row["std_err"]) + float(row["bias_bound"])
    assert abs(float(row["mean_re"]) - mm1_refs.busy(0.5, 0.5)) < noise
    assert int(row["paths"]) == 40000


def test_simulate_max_n(mm1_file, tmp_path):
    out = tmp_path / "s.csv"
    rc = run(["simulate", "max-n", "--model", mm1_file,
              "--n", "50", "--s1", "1.0", "--paths", "20000", "--seed", "17",
              "--out", str(out)])
    assert rc == 0
    row = _read_csv(out)[0]
    assert row["functional"] == "max-n"
    assert int(row["cap"]) == 50  # cap column carries the horizon
    assert 0.0 < float(row["mean_re"]) <= 1.0


def test_simulate_is_deterministic(mm1_file, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        rc = run(["simulate", "first-descent", "--model", mm1_file,
                  "--z", "0.5", "--paths", "5000", "--seed", "42",
                  "--out", str(out)])
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


# --- compare and invert ------------------------------------------------------


def test_compare_single_point(mm1_file, tmp_path):
    out = tmp_path / "c.csv"
    rc = run(["compare", "--model", mm1_file, "--z", "0.5", "--s", "1.0",
              "--paths", "20000", "--seed", "5", "--out", str(out)])
    assert rc == 0
    row = _read_csv(out)[0]
    assert row["ok"] == "1"
    assert float(row["engine_gap"]) < 1e-6
    assert float(row["mc_gap_over_se"]) < 4.0


def test_invert_matches_busy_density(mm1_file, tmp_path, mm1_refs):
    out = tmp_path / "i.csv"
    rc = run(["invert", "--model", mm1_file, "--z", "1",
              "--t", "0.5,1.0", "--out", str(out)])
    assert rc == 0
    from test_fluct import _bessel_i1
    lam, mu = mm1_refs.lam, mm1_refs.mu
    for row in _read_csv(out):
        t = float(row["t"])
        density = (math.exp(-(lam + mu) * t) * _bessel_i1(2 * t * math.sqrt(lam * mu))
                   / (t * math.sqrt(lam / mu)))
        assert abs(float(row["value"]) - density) < 1e-5


def test_invert_empty_grid(mm1_file):
    assert run(["invert", "--model", mm1_file, "--t", ",,"]) == 1


# --- verify-hewitt -----------------------------------------------------------


def test_verify_hewitt_command(tmp_path):
    out = tmp_path / "h.csv"
    rc = run(["verify-hewitt", "--count", "2", "--seed", "3", "--T", "400",
              "--out", str(out)])
    assert rc == 0
    rows = _read_csv(out)
    assert len(rows) == 8  # 2 measures, 4 truncation heights each
    for idx in ("0", "1"):
        ladder = [float(r["gap"]) for r in rows if r["measure"] == idx]
        assert ladder[-1] < 1e-3


def test_verify_hewitt_flags_bad_truncation(tmp_path):
    # T = 24 leaves a visible tail, the command must say so
    out = tmp_path / "h.csv"
    rc = run(["verify-hewitt", "--count", "1", "--seed", "1", "--T", "24",
              "--out", str(out)])
    assert rc == 2
    # whereas T = 8 does not even pass the resolution guard at its lowest rung
    assert run(["verify-hewitt", "--count", "1", "--seed", "1", "--T", "8"]) == 1


def test_random_atomic_measure_is_normalized():
    for seed in range(12):
        rng = np.random.Generator(np.random.Philox(key=seed))
        H = random_atomic_measure(rng)
        assert H.atoms
        assert H.total_variation() == pytest.approx(1.0)


# --- CSV and plumbing --------------------------------------------------------


def test_emit_csv_formats(tmp_path):
    out = tmp_path / "f.csv"
    emit_csv(["flag", "x", "n"], [[True, 0.1, 2], [False, 1.0, 3]], str(out))
    text = out.read_text()
    assert text.splitlines() == ["flag,x,n",
                                 "1,0.10000000000000001,2",
                                 "0,1,3"]
    with pytest.raises(TypeError):
        emit_csv(["c"], [[1 + 2j]], str(out))


def test_emit_csv_stdout(capsys):
    emit_csv(["a"], [[1]], None)
    assert capsys.readouterr().out == "a\n1\n"


def test_thread_pool_gives_same_csv(mm1_file, tmp_path, monkeypatch):
    args = ["eval", "busy", "--model", mm1_file, "--engine", "rational"]
    single, pooled = tmp_path / "one.csv", tmp_path / "many.csv"
    monkeypatch.setenv("WALKFLUCT_THREADS", "1")
    assert run(args + ["--out", str(single)]) == 0
    monkeypatch.setenv("WALKFLUCT_THREADS", "4")
    assert run(args + ["--out", str(pooled)]) == 0
    assert single.read_bytes() == pooled.read_bytes()


def test_unwritable_output_is_io_failure(mm1_file, tmp_path):
    dest = tmp_path / "missing_dir" / "o.csv"
    rc = run(["eval", "busy", "--model", mm1_file, "--engine", "rational",
              "--z", "0.5", "--s", "1", "--out", str(dest)])
    assert rc == 2


def test_console_script_smoke(mm1_file, tmp_path):
    out = tmp_path / "o.csv"
    proc = subprocess.run(
        ["walkfluct", "eval", "busy", "--model", mm1_file, "--engine",
         "rational", "--z", "0.5", "--s", "1", "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert _read_csv(out)[0]["method"] == "rational"
