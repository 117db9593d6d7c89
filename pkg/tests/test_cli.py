import csv
import json

import numpy as np
import pytest

from rdode.cli import main
from rdode.grid import Grid
from rdode.io import read_steady
from rdode.model import builtin_model
from rdode.steady import residual_sup


def _config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _stderr_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


HYST = {"model": "hysteresis", "grid_n": 64, "steady": {"method": "hysteresis_shoot"}}


def test_steady_writes_pattern(tmp_path):
    out = tmp_path / "out"
    assert main(["steady", "--config", _config(tmp_path, HYST), "--out", str(out)]) == 0
    meta = json.loads((out / "steady.meta.json").read_text())
    assert meta["residual_sup"] <= 1e-10
    assert len(meta["jump_points"]) == 1
    with open(out / "steady.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "u_1", "v_1", "branch_label"]
    assert len(rows) == 65


def test_steady_round_trip(tmp_path):
    out = tmp_path / "out"
    main(["steady", "--config", _config(tmp_path, HYST), "--out", str(out)])
    grid, state, labels = read_steady(out / "steady.csv")
    meta = json.loads((out / "steady.meta.json").read_text())
    assert grid.n == 64 and labels is not None
    assert residual_sup(builtin_model("hysteresis"), state, grid) == pytest.approx(
        meta["residual_sup"], abs=1e-12)


def test_file_method_reloads_state(tmp_path, capsys):
    first = tmp_path / "first"
    main(["steady", "--config", _config(tmp_path, HYST), "--out", str(first)])
    cfg = dict(HYST, steady={"method": "file", "path": str(first / "steady.csv")})
    assert main(["classify", "--config", _config(tmp_path, cfg, "file.json"),
                 "--out", str(tmp_path / "second")]) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1] == "Stable"


def test_constant_steady_has_zero_residual(tmp_path):
    cfg = {"model": "hysteresis", "grid_n": 16, "steady": {"method": "constant", "guess": [0.0, 0.0]}}
    out = tmp_path / "c"
    assert main(["steady", "--config", _config(tmp_path, cfg), "--out", str(out)]) == 0
    assert json.loads((out / "steady.meta.json").read_text())["residual_sup"] == 0.0


def test_inadmissible_jump_level(tmp_path, capsys):
    cfg = dict(HYST, steady={"method": "hysteresis_shoot", "v_jump": 0.9})
    assert main(["steady", "--config", _config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
    assert _stderr_json(capsys)["error"] == "NoSolution"


@pytest.mark.parametrize("payload", [
    dict(HYST, colour="red"),
    dict(HYST, grid_n=4),
    dict(HYST, grid_n=8192),
    dict(HYST, grid_n="64"),
    {"model": "brusselator"},
    dict(HYST, simulate={"seed": -1}),
])
def test_invalid_config_rejected(tmp_path, capsys, payload):
    assert main(["steady", "--config", _config(tmp_path, payload)]) == 2
    assert _stderr_json(capsys)["error"] == "ConfigError"


def test_corrupt_json_rejected(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"model": "hysteresis", ')
    assert main(["steady", "--config", str(path)]) == 2
    assert _stderr_json(capsys)["error"] == "ConfigError"


def test_missing_config_file(tmp_path, capsys):
    assert main(["steady", "--config", str(tmp_path / "nope.json")]) == 2
    assert _stderr_json(capsys)["error"] == "ConfigError"


def test_inline_model_invalid_params(tmp_path, capsys):
    cfg = {"model": {"type": "hysteresis", "alpha": 1.0, "beta": 1.0, "p_coeffs": [0.5, -3.0, 1.0],
                     "diffusion": 0.05}, "steady": {"method": "hysteresis_shoot"}}
    assert main(["steady", "--config", _config(tmp_path, cfg)]) == 2
    assert _stderr_json(capsys)["error"] == "InvalidParams"


def test_spectrum_outputs(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["spectrum", "--config", _config(tmp_path, HYST), "--out", str(out)]) == 0
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["label"] == "Stable"
    with open(out / "spectrum.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["re", "im", "kind"]
    assert {r[2] for r in rows[1:]} <= {"essential", "discrete", "discarded"}
    assert max(float(r[0]) for r in rows[1:]) < 0


def test_bistable_pattern_classified_unstable(tmp_path, capsys):
    cfg = {"model": "bistable", "grid_n": 64,
           "steady": {"method": "newton", "initial_low": [0.0, 0.0], "initial_high": [1.0, 1.0]}}
    assert main(["classify", "--config", _config(tmp_path, cfg), "--out", str(tmp_path / "b")]) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1] == "Unstable"


def test_ddi_minus_branch_reason(tmp_path):
    cfg = {"model": "ddi", "grid_n": 64, "steady": {"method": "ddi_shoot", "v_jump": 0.35, "branch": "u-"}}
    out = tmp_path / "d"
    assert main(["spectrum", "--config", _config(tmp_path, cfg), "--out", str(out)]) == 0
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["label"] == "Unstable"
    assert "s(A*) > 0" in verdict["reasons"]


def test_simulate_reproducible_with_seed(tmp_path):
    cfg = dict(HYST, simulate={"t_end": 1.0, "dt": 0.01, "seed": 7})
    path = _config(tmp_path, cfg)
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["simulate", "--config", path, "--out", str(out), "--seed", "99"]) == 0
        outputs.append((out / "trace.csv").read_bytes())
    assert outputs[0] == outputs[1]
    rate = json.loads((tmp_path / "a" / "rate.json").read_text())
    assert rate["seed"] == 99
    other = tmp_path / "c"
    main(["simulate", "--config", path, "--out", str(other)])
    assert (other / "trace.csv").read_bytes() != outputs[0]


def test_simulate_linear_snapshots(tmp_path):
    cfg = dict(HYST, simulate={"t_end": 0.5, "dt": 0.01, "snapshot_every": 25})
    out = tmp_path / "s"
    assert main(["simulate", "--config", _config(tmp_path, cfg), "--out", str(out)]) == 0
    assert len(list(out.glob("snapshot_t*.csv"))) == 2
    cfg["simulate"]["linear"] = True
    out2 = tmp_path / "lin"
    assert main(["simulate", "--config", _config(tmp_path, cfg, "lin.json"), "--out", str(out2)]) == 0
    assert json.loads((out2 / "rate.json").read_text())["scheme"] == "matrix-exponential"


def test_verify_small_grid_skips_refinement(tmp_path, capsys):
    code = main(["verify", "--grid-n", "8", "--out", str(tmp_path)])
    report = json.loads((tmp_path / "verify.json").read_text())
    statuses = {c["number"]: c["status"] for c in report["criteria"]}
    assert statuses[10] == "SKIP"
    assert code in (0, 1)
    assert code == (0 if all(s != "FAIL" for s in statuses.values()) else 1)


def test_verify_rejects_bad_grid(tmp_path, capsys):
    assert main(["verify", "--grid-n", "2", "--out", str(tmp_path)]) == 2
    assert _stderr_json(capsys)["error"] == "ConfigError"
