import csv
import json
import math
import os
from pathlib import Path

import pytest

from eprcomm import cli, nopa

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("EPRCOMM_UPDATE_GOLDEN") == "1"

GOLDEN_CONFIGS = {
    "spectra": {"scenario": "spectra", "seed": 1, "params": {"sigma": 0.5, "omega": 1.0, "xi": 0.9}},
    "transfer": {"scenario": "transfer", "seed": 1},
    "fig2": {"scenario": "fig2", "seed": 3, "n_samples": 2000, "message": {"frames": 10}},
    "keyexchange": {"scenario": "keyexchange", "seed": 5, "keyexchange": {"alphabet": [0, 1], "n_frames": 40}},
    "tap_sweep": {"scenario": "tap_sweep", "seed": 2, "message": {"epsilon": 2.0}, "tap": {"rho_grid": [0, 0.25, 0.5]}},
}


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_simulate(tmp_path, doc, *extra):
    out = tmp_path / "out"
    code = cli.main(["simulate", "--config", write_config(tmp_path, doc), "--out", str(out), *extra])
    return code, out


@pytest.mark.parametrize("name", sorted(GOLDEN_CONFIGS))
def test_golden_outputs(tmp_path, name):
    code, out = run_simulate(tmp_path, GOLDEN_CONFIGS[name])
    assert code == 0
    for produced in sorted(out.iterdir()):
        ref = GOLDEN / name / produced.name
        if UPDATE:
            ref.parent.mkdir(parents=True, exist_ok=True)
            ref.write_bytes(produced.read_bytes())
        assert produced.read_bytes() == ref.read_bytes(), f"{name}/{produced.name} drifted"


def test_rerun_is_byte_identical(tmp_path):
    doc = {"scenario": "fig3", "seed": 11, "n_samples": 4000, "message": {"frames": 20}}
    a = tmp_path / "a"
    b = tmp_path / "b"
    cfg = write_config(tmp_path, doc)
    assert cli.main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["simulate", "--config", cfg, "--out", str(b)]) == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_seed_override_changes_output(tmp_path):
    doc = {"scenario": "fig2", "seed": 1, "n_samples": 2000, "message": {"frames": 10}}
    _, out1 = run_simulate(tmp_path, doc)
    first = (out1 / "trace_quantum.csv").read_bytes()
    cli.main(["simulate", "--config", write_config(tmp_path, doc), "--out", str(out1), "--seed", "2"])
    assert (out1 / "trace_quantum.csv").read_bytes() != first
    assert json.loads((out1 / "summary.json").read_text())["seed"] == 2


def test_fig2_trace_levels(tmp_path):
    code, out = run_simulate(tmp_path, {"scenario": "fig2", "seed": 4})
    assert code == 0
    rows = read_csv(out / "trace_quantum.csv")
    assert list(rows[0])[:7] == list(cli.TRACE_COLUMNS[:7])
    off = [r for r in rows if r["message_bit"] == "0"]
    on = [r for r in rows if r["message_bit"] == "1"]
    mean = lambda rs, k: sum(float(r[k]) for r in rs) / len(rs)
    assert mean(off, "psi_a_db") == pytest.approx(7.0, abs=0.2)
    assert mean(off, "phi_minus_db") == pytest.approx(-0.4, abs=0.2)
    assert mean(on, "phi_minus_db") > mean(off, "phi_minus_db") + 3.0
    assert all(float(r["phi_0minus_db"]) == pytest.approx(3.0103, abs=1e-4) for r in rows)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == cli.SCHEMA_VERSION
    assert summary["results"]["snr_improvement_db"] == pytest.approx(3.2, abs=0.3)


def test_transfer_row(tmp_path):
    code, out = run_simulate(tmp_path, {"scenario": "transfer", "seed": 0})
    rows = {r["source"]: r for r in read_csv(out / "transfer.csv")}
    assert float(rows["quantum"]["t_d"]) == pytest.approx(1.02, abs=0.01)
    assert float(rows["classical"]["t_d"]) <= 1.0
    assert float(rows["quantum"]["t_d_db"]) == pytest.approx(nopa.db(float(rows["quantum"]["t_d"])))


def test_summary_is_canonical_json(tmp_path):
    _, out = run_simulate(tmp_path, GOLDEN_CONFIGS["spectra"])
    text = (out / "summary.json").read_text()
    assert text == json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n"


@pytest.mark.parametrize(
    "doc",
    [
        {"scenario": "nope", "seed": 1},
        {"scenario": "spectra"},
        {"scenario": "spectra", "seed": -1},
        {"scenario": "spectra", "seed": 1, "params": {"sigma": 1.2}},
        {"scenario": "spectra", "seed": 1, "params": {"gain": 1.0}},
        {"scenario": "fig2", "seed": 1, "n_samples": 1001},
        {"scenario": "fig2", "seed": 1, "params": {"fit": {"psi_a_db": 7.0, "phi_minus_db": -9.0}, "xi": 0.65}},
        {"scenario": "keyexchange", "seed": 1, "eve": {"variant": "tap", "rho": "lots"}},
    ],
)
def test_config_errors_exit_2(tmp_path, doc, capsys):
    code, _ = run_simulate(tmp_path, doc)
    assert code == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["simulate", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = cli.main(["simulate", "--config", write_config(tmp_path, GOLDEN_CONFIGS["spectra"]), "--out", str(blocker / "sub")])
    assert code == cli.EXIT_CONFIG


def test_infeasible_exit_3(tmp_path):
    doc = {"scenario": "tap_sweep", "seed": 1, "params": {}, "message": {"epsilon": 0.5}, "tap": {"rho_grid": [0, 1]}}
    code, out = run_simulate(tmp_path, doc)
    assert code == cli.EXIT_INFEASIBLE
    summary = json.loads((out / "summary.json").read_text())
    assert summary["results"]["min_rho"] is None
    assert len(read_csv(out / "tap_sweep.csv")) == 2


def test_sweep_sigma_matches_oracle(tmp_path):
    cfg = write_config(tmp_path, {"scenario": "spectra", "seed": 0, "params": {"omega": 1.0}})
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", cfg, "--axis", "sigma", "--grid", "0,0.5,0.9", "--out", str(out)]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [float(r["sigma"]) for r in rows] == [0.0, 0.5, 0.9]
    for r in rows:
        sp = nopa.spectra(nopa.NopaParams(sigma=float(r["sigma"]), omega=1.0))
        assert float(r["s_minus"]) == sp.s_minus
        assert float(r["v_minus_d"]) == sp.v_minus_d


def test_sweep_rho_monotone(tmp_path):
    cfg = write_config(tmp_path, {"scenario": "tap_sweep", "seed": 0, "message": {"epsilon": 2.0}, "eve": {"variant": "tap"}})
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", cfg, "--axis", "rho", "--grid", "0,0.1,0.3,0.6,1", "--out", str(out)]) == 0
    snr = [float(r["eve_snr"]) for r in read_csv(out / "sweep.csv")]
    assert snr == sorted(snr) and snr[-1] > snr[0]


def test_sweep_empty_grid(tmp_path):
    cfg = write_config(tmp_path, {"scenario": "spectra", "seed": 0})
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", cfg, "--axis", "sigma", "--grid", "", "--out", str(out)]) == 0
    assert (out / "sweep.csv").read_text() == "sigma,status\n"


@pytest.mark.parametrize("axis,grid", [("variant", "1,2"), ("sigma", "a,b"), ("sigma", "0,1.5")])
def test_sweep_errors(tmp_path, axis, grid):
    cfg = write_config(tmp_path, {"scenario": "spectra", "seed": 0})
    assert cli.main(["sweep", "--config", cfg, "--axis", axis, "--grid", grid, "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate"])
    assert exc.value.code == 2


def test_keyexchange_outputs(tmp_path):
    doc = {"scenario": "keyexchange", "seed": 9, "keyexchange": {"alphabet": [0, 2], "n_frames": 2000},
           "eve": {"variant": "intercept_resend", "policy": "random_basis"}, "params": {"sigma": 0.99, "omega": 0.01}}
    code, out = run_simulate(tmp_path, doc)
    assert code == 0
    s = json.loads((out / "summary.json").read_text())["results"]
    assert "floor-excess" in s["flags"]
    rows = read_csv(out / "frames.csv")
    assert len(rows) == 2000
    assert all(r["kept"] == str(int(r["alice_basis"] == r["bob_basis"])) for r in rows)
    assert s["sift_fraction"] == pytest.approx(sum(int(r["kept"]) for r in rows) / 2000)


def test_dense_coding_outputs(tmp_path):
    code, out = run_simulate(tmp_path, {"scenario": "dense_coding", "seed": 1, "n_samples": 10000, "params": {"sigma": 0.9, "omega": 0.1},
                                        "message": {"beta_a": math.pi / 4}})
    assert code == 0
    row = read_csv(out / "dense_coding.csv")[0]
    assert float(row["b_mean_shift"]) == 0.0
    assert float(row["floor_x"]) < 2.0 and float(row["floor_y"]) < 2.0
