"""End-to-end tests for the command-line interface.

Commands run in-process through ``cli.main`` so exit codes and stdout are
easy to assert; one test shells out to the installed console script to make
sure the entry point is wired up. A module-scoped workspace holds a small
generated corpus plus an overfit checkpoint shared by the read-only commands.
"""

import csv
import dataclasses
import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

import fillerspot as fs
from fillerspot.cli import main
from fillerspot.corpus import load_corpus, write_wav
from fillerspot.trainer import load_checkpoint


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    config = fs.desk_config(seed=6, num_auxiliary=2)
    config = dataclasses.replace(
        config,
        synth=dataclasses.replace(config.synth, clips=10, seed=6),
        train=dataclasses.replace(
            config.train,
            total_epochs=3,
            lr_drop_epochs=(),
            schedule=dataclasses.replace(
                config.train.schedule, start_epoch=2, period_epochs=1, num_auxiliary=2
            ),
        ),
    )
    config_path = base / "desk.yaml"
    fs.save_config(config, config_path)
    corpus_dir = base / "corpus"
    rc = main(["gen-synth", "--config", str(config_path), "--out", str(corpus_dir)])
    return {"base": base, "config": config, "config_path": config_path,
            "corpus_dir": corpus_dir, "gen_rc": rc}


@pytest.fixture(scope="module")
def train_clips(workspace):
    config = workspace["config"]
    return load_corpus(
        workspace["corpus_dir"] / "train.csv",
        workspace["corpus_dir"] / "audio",
        filler_lexicon=config.filler_lexicon,
        target_sample_rate=config.frontend.sample_rate,
    )


@pytest.fixture(scope="module")
def overfit_checkpoint(workspace, train_clips):
    """Checkpoint memorizing four training clips; fillers score near 1."""
    config = fs.desk_config(seed=4, num_auxiliary=2)
    config = dataclasses.replace(
        config,
        augment=fs.AugmentConfig(enabled=False),
        train=dataclasses.replace(
            config.train,
            total_epochs=120,
            lr_drop_epochs=(80, 100),
            schedule=dataclasses.replace(
                config.train.schedule, start_epoch=1000, num_auxiliary=2
            ),
        ),
    )
    out = workspace["base"] / "overfit"
    result = fs.train(train_clips[:4], [], config, out)
    return result.checkpoint_path


class TestGenSynth:
    def test_writes_corpus_layout(self, workspace):
        assert workspace["gen_rc"] == 0
        corpus = workspace["corpus_dir"]
        for split in ("train", "val", "test"):
            assert (corpus / f"{split}.csv").exists()
        assert len(list((corpus / "audio").glob("*.wav"))) == 10
        manifest = json.loads((corpus / "manifest.json").read_text())
        assert manifest["split_counts"] == {"train": 8, "val": 1, "test": 1}
        assert manifest["seed"] == 6

    def test_same_seed_same_bytes(self, workspace, tmp_path):
        again = tmp_path / "again"
        rc = main(["gen-synth", "--config", str(workspace["config_path"]), "--out", str(again)])
        assert rc == 0
        for split in ("train", "val", "test"):
            assert (again / f"{split}.csv").read_bytes() == (
                workspace["corpus_dir"] / f"{split}.csv"
            ).read_bytes()
        sample = "synth_0000.wav"
        assert (again / "audio" / sample).read_bytes() == (
            workspace["corpus_dir"] / "audio" / sample
        ).read_bytes()

    def test_seed_override_changes_corpus(self, workspace, tmp_path):
        other = tmp_path / "other"
        rc = main(["gen-synth", "--config", str(workspace["config_path"]),
                   "--seed", "7", "--out", str(other)])
        assert rc == 0
        assert (other / "train.csv").read_bytes() != (
            workspace["corpus_dir"] / "train.csv"
        ).read_bytes()

    def test_invalid_config_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("synth:\n  clips: 0\n")
        rc = main(["gen-synth", "--config", str(bad), "--out", str(tmp_path / "c")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_config_exits_one(self, tmp_path, capsys):
        rc = main(["gen-synth", "--config", str(tmp_path / "nope.yaml"),
                   "--out", str(tmp_path / "c")])
        assert rc == 1
        assert "not found" in capsys.readouterr().err


class TestTrain:
    def test_short_run_writes_artifacts(self, workspace, capsys):
        run_dir = workspace["base"] / "run"
        rc = main(["train", str(workspace["corpus_dir"]),
                   "--config", str(workspace["config_path"]), "--out", str(run_dir)])
        assert rc == 0
        assert (run_dir / "checkpoint_final.pkl").exists()
        assert (run_dir / "run_log.jsonl").exists()
        out = capsys.readouterr().out
        assert "best val F1" in out
        lines = (run_dir / "run_log.jsonl").read_text().splitlines()
        assert [json.loads(line)["epoch"] for line in lines] == [1, 2, 3]

    def test_missing_corpus_exits_one(self, workspace, tmp_path, capsys):
        rc = main(["train", str(tmp_path / "absent"),
                   "--config", str(workspace["config_path"]), "--out", str(tmp_path / "r")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")


class TestEval:
    def test_report_and_json(self, workspace, overfit_checkpoint, tmp_path):
        out_json = tmp_path / "score.json"
        rc = main(["eval", str(workspace["corpus_dir"]),
                   "--checkpoint", str(overfit_checkpoint),
                   "--split", "train", "--out", str(out_json)])
        assert rc == 0
        payload = json.loads(out_json.read_text())
        assert "filler" in payload and "non-filler" in payload
        for row in payload.values():
            for key in ("precision", "recall", "f1"):
                assert 0.0 <= row[key] <= 1.0

    def test_report_text_on_stdout(self, workspace, overfit_checkpoint, capsys):
        rc = main(["eval", str(workspace["corpus_dir"]),
                   "--checkpoint", str(overfit_checkpoint), "--split", "val"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "filler" in out and "P%" in out

    def test_compatible_config_accepted(self, workspace, overfit_checkpoint):
        rc = main(["eval", str(workspace["corpus_dir"]),
                   "--config", str(workspace["config_path"]),
                   "--checkpoint", str(overfit_checkpoint), "--split", "val"])
        assert rc == 0

    def test_incompatible_config_exits_one(self, workspace, overfit_checkpoint,
                                           tmp_path, capsys):
        other = fs.desk_config(seed=6, num_auxiliary=4)
        other_path = tmp_path / "wide.yaml"
        fs.save_config(other, other_path)
        rc = main(["eval", str(workspace["corpus_dir"]),
                   "--config", str(other_path),
                   "--checkpoint", str(overfit_checkpoint), "--split", "val"])
        assert rc == 1
        assert "auxiliary" in capsys.readouterr().err


class TestDetect:
    def test_overfit_recovers_single_filler(self, workspace, train_clips,
                                            overfit_checkpoint, tmp_path):
        clip = next(c for c in train_clips if c.clip_id == "synth_0002")
        truth = [e for e in clip.events if e.category_id == 0]
        assert len(truth) == 1
        wav = tmp_path / "single.wav"
        write_wav(wav, clip.samples, clip.sample_rate)
        out = tmp_path / "det.csv"
        rc = main(["detect", str(wav), "--checkpoint", str(overfit_checkpoint),
                   "--out", str(out)])
        assert rc == 0
        rows = _read_rows(out)
        assert len(rows) == 1
        assert rows[0]["clip_id"] == "single"
        assert rows[0]["category"] == "0"
        assert abs(float(rows[0]["onset_s"]) - truth[0].onset) < 0.1

    def test_silence_yields_empty_csv(self, overfit_checkpoint, workspace, tmp_path):
        sr = workspace["config"].frontend.sample_rate
        wav = tmp_path / "silence.wav"
        write_wav(wav, np.zeros(sr * 2, dtype=np.float32), sr)
        out = tmp_path / "det.csv"
        rc = main(["detect", str(wav), "--checkpoint", str(overfit_checkpoint),
                   "--out", str(out)])
        assert rc == 0
        assert out.read_text() == "clip_id,category,onset_s,duration_s,score\n"

    def test_threshold_one_yields_empty_csv(self, workspace, train_clips,
                                            overfit_checkpoint, tmp_path):
        clip = train_clips[0]
        wav = tmp_path / "clip.wav"
        write_wav(wav, clip.samples, clip.sample_rate)
        out = tmp_path / "det.csv"
        rc = main(["detect", str(wav), "--checkpoint", str(overfit_checkpoint),
                   "--threshold", "1.0", "--out", str(out)])
        assert rc == 0
        assert _read_rows(out) == []

    def test_unreadable_file_reported_others_processed(self, workspace, train_clips,
                                                       overfit_checkpoint, tmp_path,
                                                       capsys):
        clip = next(c for c in train_clips if c.clip_id == "synth_0002")
        good = tmp_path / "good.wav"
        write_wav(good, clip.samples, clip.sample_rate)
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"this is not a wav file")
        out = tmp_path / "det.csv"
        rc = main(["detect", str(good), str(bad),
                   "--checkpoint", str(overfit_checkpoint), "--out", str(out)])
        assert rc == 1
        assert "bad.wav" in capsys.readouterr().err
        rows = _read_rows(out)
        assert len(rows) == 1 and rows[0]["clip_id"] == "good"

    def test_missing_checkpoint_exits_one(self, tmp_path, capsys):
        rc = main(["detect", str(tmp_path / "x.wav"),
                   "--checkpoint", str(tmp_path / "no.pkl"),
                   "--out", str(tmp_path / "d.csv")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")


class TestFpReport:
    def test_table_and_json(self, workspace, overfit_checkpoint, tmp_path, capsys):
        out_json = tmp_path / "fp.json"
        rc = main(["fp-report", str(workspace["corpus_dir"]),
                   "--checkpoint", str(overfit_checkpoint),
                   "--split", "train", "--out", str(out_json)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "<silence>" in out and "total" in out
        payload = json.loads(out_json.read_text())
        assert set(payload) == {"epoch", "counts", "silence_fp", "total_fp", "promoted_words"}
        assert payload["total_fp"] == sum(payload["counts"].values()) + payload["silence_fp"]


class TestExportEmbeddings:
    def test_row_per_event(self, workspace, overfit_checkpoint, tmp_path):
        out = tmp_path / "emb.csv"
        rc = main(["export-embeddings", str(workspace["corpus_dir"]),
                   "--checkpoint", str(overfit_checkpoint),
                   "--split", "val", "--out", str(out)])
        assert rc == 0
        with open(workspace["corpus_dir"] / "val.csv", newline="") as fh:
            n_events = len(list(csv.DictReader(fh)))
        rows = _read_rows(out)
        assert len(rows) == n_events

    def test_header_and_category_bounds(self, workspace, overfit_checkpoint, tmp_path):
        out = tmp_path / "emb.csv"
        main(["export-embeddings", str(workspace["corpus_dir"]),
              "--checkpoint", str(overfit_checkpoint), "--split", "val",
              "--out", str(out)])
        checkpoint = load_checkpoint(overfit_checkpoint)
        dim = checkpoint.model.embedding_dim
        with open(out, newline="") as fh:
            header = next(csv.reader(fh))
        assert header == ["clip_id", "word", "category_id"] + [f"e{i}" for i in range(dim)]
        num_categories = 2 + checkpoint.config.model.num_auxiliary
        for row in _read_rows(out):
            assert 0 <= int(row["category_id"]) < num_categories

    def test_deterministic_bytes(self, workspace, overfit_checkpoint, tmp_path):
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        for path in (first, second):
            rc = main(["export-embeddings", str(workspace["corpus_dir"]),
                       "--checkpoint", str(overfit_checkpoint),
                       "--split", "test", "--out", str(path)])
            assert rc == 0
        assert first.read_bytes() == second.read_bytes()


def test_console_script_help():
    exe = shutil.which("fillerspot")
    assert exe is not None, "console script not installed"
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for command in ("gen-synth", "train", "eval", "detect", "fp-report", "export-embeddings"):
        assert command in proc.stdout
