import csv
import json

import numpy as np
import pytest

from blindinv.cli import main
from blindinv.signal import Signal, read_wav, write_wav


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    cfg = out / "cfg.json"
    cfg.write_text(json.dumps(dict(n_speakers=2, train_seconds=3.0, n_test_sentences=1, test_seconds=0.5)))
    assert main(["synth", "--config", str(cfg), "--out-dir", str(out)]) == 0
    return out


def test_synth_layout(corpus_dir):
    assert sorted(p.name for p in (corpus_dir / "mic1" / "train").glob("*.wav")) == ["spk00.wav", "spk01.wav"]
    assert len(read_wav(corpus_dir / "mic2" / "test" / "spk01_t0.wav")) == 8000


def test_saturate_invert_enroll_identify(corpus_dir, tmp_path, capsys):
    test_wav = corpus_dir / "mic1" / "test" / "spk01_t0.wav"
    sat = tmp_path / "sat.wav"
    assert main(["saturate", "--k", "2", "--in", str(test_wav), "--out", str(sat)]) == 0
    assert np.max(np.abs(read_wav(sat).samples)) == pytest.approx(np.tanh(2), abs=1e-4)

    out, model, trace = tmp_path / "rec.wav", tmp_path / "inv.json", tmp_path / "trace.csv"
    cfg = tmp_path / "inv_cfg.json"
    cfg.write_text(json.dumps(dict(n_knots=7, w_len=5, max_iters=3)))
    assert main(["invert", "--in", str(sat), "--out", str(out), "--dump-model", str(model),
                 "--dump-trace", str(trace), "--config", str(cfg)]) == 0
    d = json.loads(model.read_text())
    assert len(d["g"]["knots_y"]) == 7 and d["w"]["reference_index"] == 2
    rows = list(csv.DictReader(trace.open()))
    costs = [float(r["cost"]) for r in rows]
    assert costs == sorted(costs, reverse=True)

    models = tmp_path / "models.json"
    assert main(["enroll", "--train-dir", str(corpus_dir / "mic1" / "train"), "--models", str(models)]) == 0
    capsys.readouterr()
    assert main(["identify", "--models", str(models), "--test", str(test_wav)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["decision"] == "spk01" and set(result["distances"]) == {"spk00", "spk01"}


def test_saturate_directory(corpus_dir, tmp_path):
    assert main(["saturate", "--in", str(corpus_dir / "mic1" / "test"), "--out", str(tmp_path / "s")]) == 0
    assert len(list((tmp_path / "s").glob("*.wav"))) == 2


def test_experiment_and_report(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps(dict(n_speakers=2, train_seconds=3.0, n_test_sentences=1, test_seconds=0.5,
                                   inversion=dict(n_knots=7, w_len=5, max_iters=2),
                                   fusion_subsets=[[1, 3]])))
    rep = tmp_path / "report.json"
    assert main(["experiment", "--config", str(cfg), "--out", str(rep)]) == 0
    assert "Recognition rate" in capsys.readouterr().out
    for fmt in ("text-table", "json", "csv"):
        assert main(["report", "--in", str(rep), "--format", fmt]) == 0
    assert capsys.readouterr().out.count("fusion 1&3") == 2


def test_error_record(tmp_path, capsys):
    silent = tmp_path / "zero.wav"
    write_wav(silent, Signal(np.zeros(1000)))
    assert main(["saturate", "--in", str(silent), "--out", str(tmp_path / "o.wav")]) != 0
    assert json.loads(capsys.readouterr().err)["error"] == "degenerate_input"
    assert main(["identify", "--models", str(tmp_path / "missing.json"), "--test", str(silent)]) != 0
