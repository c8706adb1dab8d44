import csv
import io
import json
import math

import pytest
import yaml

from slbkit.cli import fmt, main


def run(tmp_path, command, cfg, *extra, name="out.csv"):
    path = tmp_path / f"{command}.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / name
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def rows(out):
    return list(csv.DictReader(io.StringIO(out.read_text())))


def test_float_format():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(float("inf")) == "inf" and fmt(True) == "true" and fmt((1.0, 2)) == "1;2" and fmt(None) == ""


def test_phi_gaussian_grid_is_monotone(tmp_path):
    grid = [round(0.1 * i, 1) for i in range(1, 11)]
    code, out = run(tmp_path, "phi", {"alphabet": {"kind": "real_line"}, "distortion": [{"fn": "square"}], "D": grid})
    assert code == 0
    h = 0.5 * math.log2(2 * math.pi * math.e)
    slb = [h - float(r["phi_bits"]) for r in rows(out)]
    steps = [b - a for a, b in zip(slb, slb[1:])]
    assert all(s < 0 for s in steps)
    assert all(b >= a for a, b in zip(steps, steps[1:]))


def test_phi_hamming_degenerate_row(tmp_path):
    code, out = run(tmp_path, "phi", {"alphabet": {"kind": "modular", "r": 2}, "distortion": [{"fn": "hamming"}],
                                      "D": [0.2, 0.5]})
    r = rows(out)
    assert code == 0 and r[1]["degenerate"] == "true" and r[0]["degenerate"] == "false"
    assert all(x["ref"] == "phi" for x in r)


def test_volume_error_shrinks(tmp_path):
    cfg = {"alphabet": {"kind": "real_line"}, "distortion": [{"fn": "abs"}], "D": [1.0], "n": [10, 100, 1000],
           "methods": ["saddlepoint"]}
    code, out = run(tmp_path, "volume", cfg)
    errs = [float(r["error"]) for r in rows(out)]
    assert code == 0 and all(7 < a / b < 13 for a, b in zip(errs, errs[1:]))


def test_volume_failure_manifest(tmp_path):
    cfg = {"alphabet": {"kind": "modular", "r": 2}, "distortion": [{"fn": "hamming"}], "D": [0.25, 0.5], "n": [20],
           "methods": ["saddlepoint"]}
    code, out = run(tmp_path, "volume", cfg)
    assert code == 1
    assert len(rows(out)) == 1
    manifest = json.loads((tmp_path / "out.csv.failures.json").read_text())
    assert manifest["completed_rows"] == 1 and "DegenerateSaddleError" in manifest["failures"][0]["error"]


def test_kraft_ud_campaign(tmp_path):
    code, out = run(tmp_path, "kraft", {"campaigns": [{"lemma": "ud", "trials": 30}]}, "--jobs", "2")
    r = rows(out)
    assert code == 0 and len(r) == 30
    assert all(float(x["slack"]) >= 0 and x["ref"] == "kraft-ud" for x in r)


def test_kraft_lossy_encoder_fails(tmp_path):
    cfg = {"encoders": [{"output": [["0", "00"]], "next_state": [[0, 0]], "ell": 2, "alpha": [2.0]}]}
    code, out = run(tmp_path, "kraft", cfg)
    assert code == 1
    assert "NotLosslessError" in (tmp_path / "out.csv.failures.json").read_text()


def test_slb_rows_carry_refs(tmp_path):
    code, out = run(tmp_path, "slb", {"source": {"type": "gaussian", "sigma2": 1.0}, "D": [0.25], "n": [100]})
    r = rows(out)
    assert code == 0
    assert [x["ref"] for x in r] == ["slb-one-to-one", "slb-classical", "slb-d-semifaithful"]
    assert float(r[2]["refinement_term"]) == pytest.approx(math.log2(100) / 200, abs=1e-12)


def test_sliding_spec(tmp_path):
    cfg = {"alphabet": {"kind": "modular", "r": 2},
           "distortion": [{"fn": "table", "values": [[0, 1], [1, 0]]}], "D": [0.2], "h_rate": 1.0}
    code, out = run(tmp_path, "sliding", cfg)
    assert code == 0 and rows(out)[0]["ref"] == "slb-sliding"


def test_indiv_example_string(tmp_path):
    code, out = run(tmp_path, "indiv", {"sequences": [{"text": "011010011000100"}]})
    r = rows(out)[0]
    assert code == 0 and r["c"] == "8" and r["phrases"] == "0,1,10,100,11,00,01,00"


def test_indiv_file_and_quantizer(tmp_path):
    (tmp_path / "u.txt").write_text("alphabet=0,1\n" + "0110" * 64 + "\n")
    code, out = run(tmp_path, "indiv", {"sequences": [{"file": "u.txt", "reproduction": "pair-quantizer", "ell": 16}]})
    assert code == 0 and rows(out)[0]["n"] == "256"


def test_json_output(tmp_path):
    code, out = run(tmp_path, "phi", {"alphabet": {"kind": "modular", "r": 2}, "distortion": [{"fn": "hamming"}],
                                      "D": [0.11]}, "--format", "json", name="out.jsonl")
    rec = json.loads(out.read_text().splitlines()[0])
    assert code == 0 and rec["ref"] == "phi" and rec["phi_bits"] == float(f"{rec['phi_bits']:.12g}")


@pytest.mark.parametrize("cfg", [
    {"alphabet": {"kind": "modular", "r": 2}, "distortion": [{"fn": "hamming"}], "D": [0.1], "extra": 1},
    {"alphabet": {"kind": "modular", "r": 1}, "distortion": [{"fn": "hamming"}], "D": [0.1]},
    {"alphabet": {"kind": "modular", "r": 2}, "distortion": [{"fn": "cosine"}], "D": [0.1]},
    {"alphabet": {"kind": "modular", "r": 2}, "distortion": [{"fn": "hamming"}], "D": "0.1"},
    {"alphabet": {"kind": "modular", "r": 2}, "distortion": [{"fn": "hamming"}], "D": [[0.1, 0.2]]},
])
def test_schema_errors_exit_nonzero(tmp_path, cfg, capsys):
    code, _ = run(tmp_path, "phi", cfg)
    assert code == 2
    assert "slbkit phi" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["phi", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_stdout_and_seed_override(tmp_path, capsys):
    cfg = tmp_path / "v.yaml"
    cfg.write_text(yaml.safe_dump({"alphabet": {"kind": "modular", "r": 2}, "distortion": [{"fn": "hamming"}],
                                   "D": [0.3], "n": [10], "methods": ["monte-carlo"], "samples": 5000}))
    main(["volume", "--config", str(cfg), "--seed", "1"])
    a = capsys.readouterr().out
    main(["volume", "--config", str(cfg), "--seed", "2"])
    b = capsys.readouterr().out
    main(["volume", "--config", str(cfg), "--seed", "1", "--jobs", "3"])
    assert a != b and a == capsys.readouterr().out
