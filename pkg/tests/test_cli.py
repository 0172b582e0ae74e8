import json
import subprocess
import sys

import numpy as np
import pytest

from oriented.cli import exit_code_for, main
from oriented.errors import ConditioningError, NonconvergenceError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, json.loads(out), err


def strip_meta(payload):
    return {k: v for k, v in payload.items() if k != "meta"}


def write_batch(tmp_path, items, schema=1):
    p = tmp_path / "batch.json"
    p.write_text(json.dumps({"schema": schema, "items": items}))
    return str(p)


SMOOTH_BATCH = [
    {"law": "chain_rule", "inner": {"dim": 2, "exprs": ["x1^2", "x2"]},
     "outer": {"dim": 2, "expr": "x1 + x2"}, "point": [1, 1], "set": "full", "outer_set": "full"},
    {"law": "product_rule", "field": "gaussian", "field2": "sin_cos", "point": [0.3, 0.7]},
    {"law": "mean_value", "field": "rosenbrock", "point": [0.5, 0.8], "direction": [0.1, -0.1],
     "set": "full"},
    {"law": "increment_identity", "field": {"dim": 2, "expr": "x1*x2"}, "point": [1, 1],
     "direction": [0.2, 0.3], "components": ["linear:e1", "linear:e2"]},
    {"law": "decomposition", "field": "chain6", "point": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
     "components": ["linear:e1;e2;e3", "linear:e4;e5;e6"]},
    {"law": "schwarz", "field": "mixed", "point": [1, 2], "set": "full"},
    {"law": "taylor", "field": "exp_sum", "point": [0.1, -0.3, 0.5], "direction": [0.1, 0.1, 0.1],
     "set": "full", "order": 3},
]


def test_grad_examples(capsys):
    code, out, err = run(capsys, "grad", "--expr", "x1^2+x2^2", "--at", "1,2", "--set", "full")
    assert code == 0
    assert out["result"]["gradient"] == pytest.approx([2, 4], abs=1e-6)
    assert "gradient" in err
    code, out, _ = run(capsys, "grad", "--expr", "abs(x1)", "--at", "0", "--set", "orthant:+")
    assert code == 0 and out["result"]["gradient"] == pytest.approx([1], abs=1e-8)
    code, out, err = run(capsys, "grad", "--expr", "abs(x1)", "--at", "0", "--set", "full")
    assert code == 0 and out["result"]["verdict"] == "inconsistent" and out["result"]["warning"]
    assert "warning" in err


def test_grad_exact_slope_serialised_as_string(capsys):
    _, out, _ = run(capsys, "grad", "--expr", "x1 + 2*x2", "--at", "0,0")
    assert out["result"]["slope"] == "inf"


def test_hessian_and_ddir(capsys):
    code, out, _ = run(capsys, "hessian", "--builtin", "saddle", "--at", "0,0", "--set", "linear:e1")
    assert code == 0
    np.testing.assert_allclose(out["result"]["hessian"], [[2, 0], [0, 0]], atol=1e-8)
    code, out, _ = run(capsys, "hessian", "--expr", "x1^3", "--at", "0", "--order", "3")
    np.testing.assert_allclose(out["result"]["tensor"], [[[6]]], atol=1e-3)
    code, out, _ = run(capsys, "ddir", "--expr", "abs(x1)", "--at", "0", "--dir", "-1")
    assert code == 0 and out["result"]["value"] == pytest.approx(1)


def test_classify_examples(capsys):
    cases = [("-(x1^2+x2^2)", "full", "strict_local_max"), ("x1^2-x2^2", "full", "no_extremum"),
             ("x1^2-x2^2", "linear:e1", "strict_local_min")]
    for expr, st, expected in cases:
        code, out, _ = run(capsys, "classify", f"--expr={expr}", "--at", "0,0", "--set", st)
        assert code == 0 and out["result"]["class"] == expected


def test_classify_inconclusive_exit_1(capsys):
    code, out, _ = run(capsys, "classify", "--expr", "x1^4 + x2^4", "--at", "0,0")
    assert code == 1 and out["result"]["class"] == "inconclusive"


@pytest.mark.parametrize("argv,code", [
    (["grad", "--expr", "x1 +", "--at", "0"], 2),
    (["grad", "--expr", "x1", "--at", "0", "--set", "orthant:+x"], 2),
    (["grad", "--at", "0"], 2),
    (["grad", "--builtin", "nope", "--at", "0"], 2),
    (["frobnicate"], 2),
    ([], 2),
    (["grad", "--expr", "log(x1)", "--at", "0"], 3),
    (["hessian", "--expr", "x1^2", "--at", "0,0", "--set", "orthant:++"], 3),
    (["ddir", "--expr", "sqrt(x1)", "--domain", "x1", "--at", "0", "--dir", "1"], 4),
])
def test_exit_codes(capsys, argv, code):
    got = main(argv)
    out, _ = capsys.readouterr()
    assert got == code
    payload = json.loads(out)
    assert payload["exit_code"] == code and "error" in payload


def test_numeric_errors_map_to_4():
    assert exit_code_for(ConditioningError("bad design", 1e12)) == 4
    assert exit_code_for(NonconvergenceError("no limit", [1.0, 2.0])) == 4


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("ORIENTED_SEED", "11")
    _, out, _ = run(capsys, "grad", "--builtin", "quad", "--set", "orthant:+-+")
    assert out["config"]["seed"] == 11
    monkeypatch.setenv("ORIENTED_SEED", "eleven")
    assert main(["grad", "--builtin", "quad"]) == 2
    capsys.readouterr()


def test_determinism(capsys):
    argv = ["grad", "--builtin", "himmelblau", "--set", "halfspace:2", "--seed", "5"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert "timestamp" in a["meta"]
    assert json.dumps(strip_meta(a)) == json.dumps(strip_meta(b))


def test_verify_smooth_batch(capsys, tmp_path):
    code, out, err = run(capsys, "verify", write_batch(tmp_path, SMOOTH_BATCH))
    assert code == 0, [r.get("error") or r.get("abs_err") for r in out["result"]["reports"]]
    assert out["result"]["summary"] == f"passed {len(SMOOTH_BATCH)} / failed 0 / errored 0"
    assert err.strip().endswith(out["result"]["summary"])


def test_verify_counter_probe_fails(capsys, tmp_path):
    items = SMOOTH_BATCH[:2] + [{"law": "schwarz", "field": "schwarz_counter", "point": [0, 0]}]
    code, out, _ = run(capsys, "verify", write_batch(tmp_path, items))
    assert code == 1
    assert [r["status"] for r in out["result"]["reports"]] == ["passed", "passed", "failed"]


def test_verify_errors_are_recorded(capsys, tmp_path):
    items = [{"law": "nope"},
             {"law": "chain_rule", "inner": {"dim": 1, "exprs": ["x1^2"]},
              "outer": {"dim": 1, "expr": "x1"}, "point": [1], "outer_set": "orthant:+"},
             SMOOTH_BATCH[5]]
    code, out, _ = run(capsys, "verify", write_batch(tmp_path, items))
    reps = out["result"]["reports"]
    assert code == 1
    assert [r["status"] for r in reps] == ["error", "error", "passed"]
    assert reps[1]["error"]["type"] == "PreconditionError"
    assert out["result"]["summary"] == "passed 1 / failed 0 / errored 2"


def test_verify_empty_and_schema(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", write_batch(tmp_path, []))
    assert code == 0 and out["result"]["summary"].startswith("passed 0")
    assert main(["verify", write_batch(tmp_path, [], schema=2)]) == 2
    assert main(["verify", str(tmp_path / "missing.json")]) == 2
    capsys.readouterr()


def test_verify_parallel_preserves_order(capsys, tmp_path):
    path = write_batch(tmp_path, SMOOTH_BATCH)
    _, serial, _ = run(capsys, "verify", path)
    _, parallel, _ = run(capsys, "verify", path, "--jobs", "4")
    assert serial["result"]["reports"] == parallel["result"]["reports"]


def test_corpus_command(capsys):
    code, out, _ = run(capsys, "corpus")
    assert code == 0 and out["result"]["failures"] == 0


def test_output_file(capsys, tmp_path):
    target = tmp_path / "out.json"
    main(["grad", "--builtin", "cubic", "--output", str(target)])
    out, _ = capsys.readouterr()
    assert json.loads(target.read_text()) == json.loads(out)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "oriented.cli", "grad", "--expr", "x1^2",
                           "--at=-1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["gradient"] == pytest.approx([-2], abs=1e-6)
