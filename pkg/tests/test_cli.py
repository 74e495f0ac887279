import json
import math
import subprocess
import sys

import pytest

from conftest import CODEWORDS, KAPPA
from lpreceiver.cli import main
from lpreceiver.harness import fer_lower_bound


@pytest.fixture
def files(tmp_path):
    (tmp_path / "sys.json").write_text(json.dumps({"format": "lpreceiver-system/1", "code": "hamming-7-4",
                                                   "channel": "proakis-b"}))
    for i, c in CODEWORDS.items():
        (tmp_path / f"c{i}.txt").write_text("".join(map(str, c)) + "\n")
        q = {str(pos): {d: str(w) for d, w in dist.items()} for pos, dist in KAPPA[i].items()}
        (tmp_path / f"k{i}.json").write_text(json.dumps({"format": "lpreceiver-edge-distribution/1", "q": q}))
    return tmp_path


def test_bound(capsys):
    assert main(["bound", "--sigma", "0.4"]) == 0
    assert float(capsys.readouterr().out) == fer_lower_bound(0.4)


@pytest.mark.parametrize("i,expected", [(1, 4 / 3), (2, math.sqrt(2)), (3, 4 / 3), (4, math.sqrt(2))])
def test_pseudodistance(files, capsys, i, expected):
    rc = main(["pseudodistance", "--system", str(files / "sys.json"), "--codeword", str(files / f"c{i}.txt"),
               "--point", str(files / f"k{i}.json")])
    assert rc == 0
    assert float(capsys.readouterr().out) == pytest.approx(expected, abs=1e-12)


def test_verify_cover(files, capsys):
    assert main(["verify-cover", "--point", str(files / "k2.json")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["degree 3", "valid True", "normalized vector matches True"]


def test_run(files, capsys):
    cfg = files / "cfg.json"
    cfg.write_text(json.dumps({"format": "lpreceiver-experiment/1", "snr_db": [3.0], "trials": 100,
                               "target_errors": 10, "seed": 1}))
    out_dir = files / "out"
    rc = main(["run", "--config", str(cfg), "--snr", "3", "5", "--trials", "80", "--receiver", "lp5",
               "--out", str(out_dir)])
    assert rc == 0
    assert sorted(p.name for p in out_dir.iterdir()) == ["events.jsonl", "results.csv", "spectrum_0.json",
                                                          "spectrum_1.json"]
    assert "errors=" in capsys.readouterr().out


def test_errors_exit_with_code_two(files, capsys):
    assert main(["pseudodistance", "--system", str(files / "sys.json"), "--codeword", str(files / "missing.txt"),
                 "--point", str(files / "k1.json")]) == 2
    (files / "bad.txt").write_text("1000000\n")
    assert main(["pseudodistance", "--system", str(files / "sys.json"), "--codeword", str(files / "bad.txt"),
                 "--point", str(files / "k1.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "lpreceiver.cli", "bound", "--sigma", "1e9"],
                         capture_output=True, text=True, check=True)
    assert float(res.stdout) == pytest.approx(1 / 8)
