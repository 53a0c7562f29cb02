import json

import numpy as np
import pytest
from scipy.io import wavfile

from deepscs.experiment.cli import main
from deepscs.experiment.config import (DEFAULT_SNR_GRID, ConfigError, ExperimentConfig, desk_preset,
                                       robust_preset)
from deepscs.experiment.dataset import SYNTH_PEAK, DatasetError, ingest_dataset, read_manifest, synth_corpus
from deepscs.experiment.runs import emit_plotdata, load_split, run_classic, run_eval, run_train
from deepscs.metrics import MetricReport, MetricRow


def tiny(**kw):
    base = dict(sequence_length=64, frames=8, frame_length=8, n_train=4, n_test=2, epochs=2, batch_size=4,
                micro_batch=2, n_se_blocks=1, snr_grid=[0.0, 10.0], seed=5, learning_rate=0.01)
    base.update(kw)
    return ExperimentConfig(**base)


def _write_corpus(tmp_path, n=3, rate=16000, seconds=1.2):
    rng = np.random.default_rng(0)
    lines = ["# test corpus"]
    for i in range(n):
        pcm = (rng.uniform(-0.3, 0.3, int(rate * seconds)) * 32767).astype(np.int16)
        wavfile.write(tmp_path / f"f{i}.wav", rate, pcm)
        lines.append(f"f{i}.wav,{'test' if i == n - 1 else 'train'}")
    (tmp_path / "manifest.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return tmp_path / "manifest.csv"


def test_config_defaults_and_roundtrip(tmp_path):
    cfg = robust_preset()
    assert cfg.train_channel == "rician" and cfg.train_snr_db == 8.0
    assert cfg.snr_grid == list(DEFAULT_SNR_GRID) == [-2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0]
    assert cfg.rate == 8000 and cfg.model_config().coder_filters == 8
    mm = cfg.replace(scenario="multimedia")
    assert mm.rate == 44100 and mm.model_config().coder_filters == 16
    (tmp_path / "c.json").write_text(cfg.to_json())
    assert ExperimentConfig.load(tmp_path / "c.json") == cfg
    assert desk_preset().n_se_blocks < cfg.n_se_blocks


@pytest.mark.parametrize("bad", [dict(snr_grid=[2.0, 0.0]), dict(snr_grid=[]), dict(snr_grid=[float("nan")]),
                                 dict(scenario="radio"), dict(system="lstm"), dict(eval_channels=["fog"]),
                                 dict(frames=64), dict(pcm_law="mulaw"), dict(version=9), dict(epochs=0)])
def test_config_validation(bad):
    with pytest.raises((ConfigError, ValueError)):
        ExperimentConfig(**bad)


def test_config_rejects_unknown_keys(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"scenario": "telephone", "colour": "blue"}))
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "c.json")
    with pytest.raises(ConfigError):
        ExperimentConfig().model_config("classic")


def test_manifest_ingest(tmp_path):
    manifest = _write_corpus(tmp_path)
    entries = read_manifest(manifest)
    assert [e.split for e in entries] == ["train", "train", "test"]
    train = ingest_dataset(manifest, "train", 8000)
    # 1.2 s at 8 kHz = 9600 samples -> one padded 16384-sample sequence per file
    assert len(train) == 2 and all(len(s) == 16384 and s.rate == 8000 for s in train)
    again = ingest_dataset(manifest, "train", 8000)
    for a, b in zip(train, again):
        assert a.samples.tobytes() == b.samples.tobytes()


def test_manifest_errors(tmp_path):
    manifest = _write_corpus(tmp_path)
    (tmp_path / "only_train.csv").write_text("f0.wav,train\n")
    with pytest.raises(DatasetError):
        ingest_dataset(tmp_path / "only_train.csv", "test", 8000)
    (tmp_path / "missing.csv").write_text("nope.wav,test\n")
    with pytest.raises(DatasetError):
        ingest_dataset(tmp_path / "missing.csv", "test", 8000)
    (tmp_path / "badsplit.csv").write_text("f0.wav,dev\n")
    with pytest.raises(DatasetError):
        read_manifest(tmp_path / "badsplit.csv")
    assert manifest.exists()


def test_synthetic_corpus_is_deterministic_and_split():
    a = synth_corpus(3, 4096, seed=1)
    b = synth_corpus(3, 4096, seed=1)
    t = synth_corpus(3, 4096, seed=1, split="test")
    assert all(x.samples.tobytes() == y.samples.tobytes() for x, y in zip(a, b))
    assert not any(np.array_equal(x.samples, y.samples) for x, y in zip(a, t))
    assert all(np.max(np.abs(x.samples)) == pytest.approx(SYNTH_PEAK) for x in a)
    with pytest.raises(DatasetError):
        synth_corpus(1, split="dev")


def test_load_split_uses_manifest(tmp_path):
    manifest = _write_corpus(tmp_path)
    cfg = ExperimentConfig(manifest=str(manifest))
    assert len(load_split(cfg, "test")) == 1


def test_train_eval_artifacts_and_reproducibility(tmp_path):
    cfg = tiny()
    ckpt = run_train(cfg, tmp_path / "a")
    assert ckpt.exists()
    loss = (tmp_path / "a" / "loss.csv").read_text().splitlines()
    assert loss[0] == "epoch,loss" and len(loss) == 3
    csv_path = run_eval(cfg, ckpt, tmp_path / "a")
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "channel,snr_db,mse,sdr_db,pesq,count,seed"
    assert len(rows) == 1 + 3 * 2
    assert (tmp_path / "a" / "audio" / "reference_0.wav").exists()
    assert (tmp_path / "a" / "audio" / "deepsc-s_rician_10dB_0.wav").exists()
    snapshot = ExperimentConfig.load(tmp_path / "a" / "config.json")
    assert snapshot == cfg
    before = ckpt.read_bytes()
    ckpt_b = run_train(snapshot, tmp_path / "b")
    run_eval(snapshot, ckpt_b, tmp_path / "b")
    assert ckpt.read_bytes() == before
    for name in ("loss.csv", "metrics_deepsc-s.csv", "config.json", "seed.json", "model.ckpt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_default_grid_gives_three_by_eight_rows(tmp_path):
    cfg = tiny(snr_grid=list(DEFAULT_SNR_GRID), system="classic", n_test=1, audio_samples=0)
    rep = MetricReport.from_csv(run_classic(cfg, tmp_path).read_text())
    assert len(rep.rows) == 24
    assert {r.channel for r in rep.rows} == {"awgn", "rayleigh", "rician"}


def test_classic_run_at_high_snr_is_pcm_limited(tmp_path):
    from deepscs.classic.pcm import PcmLaw, pcm_quantize
    from deepscs.metrics import sdr
    cfg = tiny(system="classic", snr_grid=[30.0], eval_channels=["awgn"])
    rep = MetricReport.from_csv(run_classic(cfg, tmp_path).read_text())
    test = load_split(cfg, "test")
    expected = np.mean([sdr(s, pcm_quantize(s.samples, PcmLaw.ALAW8)) for s in test])
    assert rep.rows[0].sdr_db == pytest.approx(expected, abs=1e-9)


def test_semi_traditional_run(tmp_path):
    cfg = tiny(system="semi-traditional", eval_channels=["awgn"], snr_grid=[20.0])
    ckpt = run_train(cfg, tmp_path)
    path = run_eval(cfg, ckpt, tmp_path)
    assert path.name == "metrics_semi-traditional.csv"
    assert len(MetricReport.from_csv(path.read_text()).rows) == 1


def test_cnn_only_run_and_classic_rejects_training(tmp_path):
    cfg = tiny(system="cnn-only", eval_channels=["awgn"], snr_grid=[5.0])
    path = run_eval(cfg, run_train(cfg, tmp_path), tmp_path)
    assert path.name == "metrics_cnn-only.csv"
    with pytest.raises(ConfigError):
        run_train(tiny(system="classic"), tmp_path / "x")


def _report(system, offset, pesq=None):
    rep = MetricReport()
    for ch in ("awgn", "rician"):
        for snr in (0.0, 4.0, 8.0):
            rep.add(MetricRow(ch, snr, 0.1 / (snr + 1), snr + offset, pesq, 4, 0, system))
    return rep


def test_emit_plotdata(tmp_path):
    reports = {s: _report(s, i) for i, s in enumerate(["deepsc-s", "cnn-only", "classic", "semi-traditional"])}
    files = emit_plotdata(reports, tmp_path)
    names = sorted(p.name for p in files)
    assert names == ["mse_awgn.csv", "mse_rician.csv", "sdr_db_awgn.csv", "sdr_db_rician.csv"]
    lines = (tmp_path / "sdr_db_rician.csv").read_text().splitlines()
    assert lines[0] == "snr_db,deepsc-s,cnn-only,classic,semi-traditional"
    assert len(lines) - 1 == 3
    assert lines[1] == "0.0,0.0,1.0,2.0,3.0"
    with_pesq = emit_plotdata({"deepsc-s": _report("deepsc-s", 0, pesq=3.0)}, tmp_path / "p")
    assert any(p.name == "pesq_awgn.csv" for p in with_pesq)
    with pytest.raises(ValueError):
        emit_plotdata({}, tmp_path)


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tiny(eval_channels=["awgn"], snr_grid=[0.0, 6.0])
    (tmp_path / "cfg.json").write_text(cfg.to_json())
    run = tmp_path / "run"
    assert main(["train", "--config", str(tmp_path / "cfg.json"), "--out", str(run), "--seed", "9"]) == 0
    assert json.loads((run / "seed.json").read_text())["seed"] == 9
    assert main(["eval", "--config", str(run / "config.json"), "--out", str(run)]) == 0
    assert main(["classic", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "cl")]) == 0
    assert main(["plotdata", str(run / "metrics_deepsc-s.csv"), f"classic={tmp_path / 'cl' / 'metrics_classic.csv'}",
                 "--out", str(tmp_path / "plots")]) == 0
    header = (tmp_path / "plots" / "sdr_db_awgn.csv").read_text().splitlines()[0]
    assert header == "snr_db,deepsc-s,classic"
    capsys.readouterr()
    assert main(["flops", "--system", "cnn-only"]) == 0
    assert json.loads(capsys.readouterr().out)["total"] == 8_926_035_968
    assert main(["flops", "--system", "classic"]) == 2
    with pytest.raises(SystemExit):
        main(["train", "--config", str(tmp_path / "cfg.json")])
