import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from topokit import io
from topokit.cli import main
from topokit.synth import bars, rings, ridge_branches

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_diagram_matches_golden(tmp_path, capsys):
    out = tmp_path / "d.csv"
    code, _, _ = run(capsys, "diagram", "--grid", DATA / "golden_grid.raw", "--out", out)
    assert code == 0
    with open(out) as fh:
        got = [(r["dim"], float(r["birth"]), float(r["death"])) for r in csv.DictReader(fh)]
    with open(DATA / "golden_diagram.csv") as fh:
        want = [(r["dim"], float(r["birth"]), float(r["death"])) for r in csv.DictReader(fh)]
    assert sorted(got) == sorted(want)


def test_bad_alpha_exits_2(tmp_path, capsys):
    m = tmp_path / "m.pgm"
    io.write_pgm(m, rings(1).arrays["mask"])
    code, _, err = run(capsys, "metrics", "--pred", m, "--gt", m, "--alpha", "1.5")
    assert code == 2
    assert "--alpha" in err and len(err.strip().splitlines()) == 1


@pytest.mark.parametrize("argv", [["nonsense"], ["watershed", "--grid", "g.raw", "--out", "o.pgm",
                                                 "--theta", "0"], ["diagram", "--grid", "g.raw"]])
def test_argument_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_missing_and_malformed_files_exit_1(tmp_path, capsys):
    code, _, err = run(capsys, "diagram", "--grid", tmp_path / "absent.raw", "--out", tmp_path / "d.csv")
    assert code == 1 and "absent.raw" in err
    bad = tmp_path / "bad.raw"
    bad.write_bytes(b"garbage")
    assert run(capsys, "diagram", "--grid", bad, "--out", tmp_path / "d.csv")[0] == 1


def test_metrics_identical_masks(tmp_path, capsys):
    m = tmp_path / "m.pgm"
    io.write_pgm(m, rings(2).arrays["mask"])
    code, out, _ = run(capsys, "metrics", "--pred", m, "--gt", m, "--json", "--patch", "16")
    assert code == 0
    res = json.loads(out)
    assert res["dice"] == 1 and res["voi"] == 0 and res["betti_error"] == 0
    assert res["params"]["patch"] == 16


def test_config_file_and_flag_precedence(tmp_path, capsys):
    m = tmp_path / "m.pgm"
    io.write_pgm(m, rings(2).arrays["mask"])
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"pred": str(m), "gt": str(m), "json": True, "patch": 12,
                               "n-patches": 7}))
    code, out, _ = run(capsys, "metrics", "--config", cfg)
    assert code == 0 and json.loads(out)["params"]["patch"] == 12
    code, out, _ = run(capsys, "metrics", "--config", cfg, "--patch", "20")
    params = json.loads(out)["params"]
    assert params["patch"] == 20 and params["n_patches"] == 7
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "metrics", "--config", cfg)[0] == 2


def test_identical_runs_are_byte_identical(tmp_path, capsys):
    g = tmp_path / "g.raw"
    io.write_raw(g, ridge_branches().arrays["grid"])
    outs = []
    for k in range(2):
        d = tmp_path / f"s{k}"
        assert run(capsys, "sample", "--grid", g, "--n", "5", "--seed", "3", "--sigma", "0.1",
                   "--out-dir", d)[0] == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1] and len(outs[0]) == 6
    d3 = tmp_path / "s3"
    run(capsys, "sample", "--grid", g, "--n", "5", "--seed", "4", "--sigma", "0.1", "--out-dir", d3)
    assert (d3 / "epsilons.csv").read_bytes() != outs[0]["epsilons.csv"]


def test_jobs_do_not_change_results(tmp_path, capsys):
    rng = np.random.default_rng(0)
    grids = []
    for i in range(3):
        p = tmp_path / f"g{i}.raw"
        io.write_raw(p, rng.random((10, 10)))
        grids.append(p)
    res = {}
    for jobs in (1, 2):
        d = tmp_path / f"out{jobs}"
        d.mkdir()
        assert run(capsys, "diagram", "--grid", *grids, "--out", d, "--jobs", jobs)[0] == 0
        res[jobs] = [(d / f"g{i}.csv").read_bytes() for i in range(3)]
    assert res[1] == res[2]


def test_synth_sidecar_round_trips(tmp_path, capsys):
    code, out, _ = run(capsys, "synth", "--scene", "bars", "--out-dir", tmp_path)
    assert code == 0
    meta = json.loads((tmp_path / "bars.json").read_text())
    assert meta["betti_target"] == [1, 0] and meta["shape"] == [32, 32]
    src = tmp_path / meta["files"]["source"]
    tgt = tmp_path / meta["files"]["target"]
    np.testing.assert_array_equal(io.read_mask(src), bars().arrays["source"])
    w = tmp_path / "w.pgm"
    code, out, _ = run(capsys, "warp", "--source", src, "--target", tgt, "--out", w)
    assert code == 0 and json.loads(out)["remaining"] == 3
    code, out, _ = run(capsys, "critical-mask", "--pred", src, "--gt", tgt, "--out", tmp_path / "cm")
    assert code == 0 and json.loads(out)["m"]["pixels"] > 0


def test_pipeline_commands_accept_each_others_outputs(tmp_path, capsys):
    g = tmp_path / "g.raw"
    io.write_raw(g, ridge_branches().arrays["grid"])
    sk = tmp_path / "sk.pgm"
    assert run(capsys, "morse-skeleton", "--grid", g, "--epsilon", "0.1", "--out", sk,
               "--branches", tmp_path / "b.csv")[0] == 0
    assert run(capsys, "watershed", "--grid", g, "--out", tmp_path / "w.pgm")[0] == 0
    assert run(capsys, "dmt-mask", "--grid", g, "--out", tmp_path / "dm.pgm")[0] == 0
    code, out, _ = run(capsys, "topoloss", "--likelihood", g, "--gt", sk,
                       "--targets", tmp_path / "t.csv", "--gradient", tmp_path / "grad.raw")
    assert code == 0 and json.loads(out)["loss"] >= 0
    assert io.read_raw(tmp_path / "grad.raw").shape == (15, 81)
    assert run(capsys, "trigger-loss", "--grid", g)[0] == 0
    d = tmp_path / "samples"
    assert run(capsys, "sample", "--grid", g, "--n", "4", "--out-dir", d)[0] == 0
    assert run(capsys, "uncertainty", "--samples", d, "--out", tmp_path / "u.raw")[0] == 0
    code, out, _ = run(capsys, "proofread-sim", "--grid", g, "--gt", sk, "--out", tmp_path / "c.csv")
    assert code == 0 and json.loads(out)["final_pixel_error"] == 0
    assert run(capsys, "warping-error", "--pred", sk, "--gt", sk)[0] == 0


@pytest.mark.skipif(shutil.which("topokit") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["topokit", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "diagram" in r.stdout
    r = subprocess.run([sys.executable, "-m", "topokit.cli", "warp"], capture_output=True, text=True)
    assert r.returncode == 2
