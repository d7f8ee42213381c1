from __future__ import annotations

import json
import subprocess
import sys

import pytest

from logentropy.cli import CLIError, main, parse_orders, read_config_file, resolve_config
from logentropy.ngram import load_model


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture()
def spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"preset": "openstack_shape", "seed": 7}))
    return path


@pytest.fixture()
def pipeline(tmp_path, spec):
    assert run("gen", spec, "-o", tmp_path / "case") == 0
    assert run("gen", spec, "--baseline", "-o", tmp_path / "base") == 0
    assert run("train", tmp_path / "base/corpus.jsonl", "-o", tmp_path / "model.json") == 0
    return tmp_path


class TestConfig:
    def test_defaults(self):
        cfg = resolve_config({})
        assert (cfg.order, cfg.alpha, cfg.window_bytes, cfg.folds) == (5, 1.0, 4096, 10)
        assert cfg.hampel().k == 3.0 and cfg.hampel().one_sided

    def test_flags_beat_file_beat_defaults(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# settings\norder = 3\nalpha=0.5\nhampel-k = 4\none_sided = false\n")
        cfg = resolve_config({"order": 7}, str(path))
        assert (cfg.order, cfg.alpha, cfg.hampel_k, cfg.one_sided) == (7, 0.5, 4.0, False)
        assert cfg.window_bytes == 4096
        assert cfg.explicit == {"order", "alpha", "hampel_k", "one_sided"}

    def test_json_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"window_bytes": 1024, "seed": 3}))
        assert read_config_file(path) == {"window_bytes": 1024, "seed": 3}

    @pytest.mark.parametrize("text", ["colour = red\n", "order = many\n", "order\n", "one_sided = maybe\n"])
    def test_bad_file(self, tmp_path, text):
        path = tmp_path / "bad.cfg"
        path.write_text(text)
        with pytest.raises(CLIError):
            read_config_file(path)

    def test_environment_ignored(self, monkeypatch):
        monkeypatch.setenv("ORDER", "2")
        monkeypatch.setenv("LOGENTROPY_ORDER", "2")
        assert resolve_config({}).order == 5

    def test_parse_orders(self):
        assert parse_orders("1:8") == list(range(1, 9))
        assert parse_orders("2,5") == [2, 5]
        with pytest.raises(CLIError):
            parse_orders("0:3")


class TestGen:
    def test_no_failure(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"seed": 1, "duration": 30}))
        assert run("gen", path, "-o", tmp_path / "out") == 0
        assert json.loads((tmp_path / "out/truth.json").read_text()) == []
        assert "regions=0" in capsys.readouterr().out

    def test_deterministic(self, tmp_path, spec):
        run("gen", spec, "-o", tmp_path / "a")
        run("gen", spec, "-o", tmp_path / "b")
        for name in ("corpus.jsonl", "truth.json", "labels.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_bad_spec_names_field(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"nodes": [{"role": "master", "id": "m"}],
                                    "failure": {"kind": "combined", "target": "m", "onset": 1}}))
        assert run("gen", path, "-o", tmp_path / "out") == 1
        assert "nodes" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    def test_default_preset_with_seed_flag(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"preset": "default", "kind": "storage-node", "duration": 60}))
        assert run("gen", path, "--seed", 4, "-o", tmp_path / "a") == 0
        assert run("gen", path, "--seed", 5, "-o", tmp_path / "b") == 0
        assert (tmp_path / "a/corpus.jsonl").read_bytes() != (tmp_path / "b/corpus.jsonl").read_bytes()


class TestTrain:
    def test_summary(self, pipeline, capsys):
        assert run("train", pipeline / "base/corpus.jsonl", "--order", 3, "-o", pipeline / "m3.json.gz") == 0
        out = capsys.readouterr().out
        assert "order=3" in out and "vocab=" in out and "tokens=" in out
        assert load_model((pipeline / "m3.json.gz").read_bytes()).order == 3

    def test_default_order(self, pipeline):
        assert load_model((pipeline / "model.json").read_bytes()).order == 5

    def test_empty_corpus_warns(self, tmp_path, capsys):
        (tmp_path / "empty.log").write_bytes(b"")
        assert run("train", tmp_path / "empty.log", "-o", tmp_path / "m.json") == 0
        assert "warning" in capsys.readouterr().err
        assert load_model((tmp_path / "m.json").read_bytes()).vocab == set()

    def test_order_zero(self, pipeline):
        assert run("train", pipeline / "base/corpus.jsonl", "--order", 0, "-o", pipeline / "m0") == 1
        assert not (pipeline / "m0").exists()

    def test_unreadable(self, tmp_path):
        assert run("train", tmp_path / "missing.log", "-o", tmp_path / "m.json") == 1


class TestScore:
    def test_rows(self, pipeline):
        assert run("score", pipeline / "model.json", pipeline / "case/corpus.jsonl", "-o", pipeline / "t.csv") == 0
        lines = (pipeline / "t.csv").read_text().splitlines()
        assert lines[0] == "window,start,end,tokens,entropy"
        assert len(lines) == 53

    def test_training_text_under_mle_is_zero(self, tmp_path):
        (tmp_path / "c.log").write_text("job 1 done on node-1\n" * 300)
        assert run("train", tmp_path / "c.log", "--alpha", 0, "-o", tmp_path / "m.json") == 0
        assert run("score", tmp_path / "m.json", tmp_path / "c.log", "-o", tmp_path / "t.csv") == 0
        rows = (tmp_path / "t.csv").read_text().splitlines()[1:]
        assert len(rows) > 1 and all(r.endswith(",0.000000") for r in rows)

    def test_mle_unseen_names_window(self, tmp_path, capsys):
        (tmp_path / "train.log").write_text("job 1 done\n" * 50)
        (tmp_path / "test.log").write_text("job 1 done\n" * 50 + "disk on fire\n")
        run("train", tmp_path / "train.log", "--alpha", 0, "-o", tmp_path / "m.json")
        assert run("score", tmp_path / "m.json", tmp_path / "test.log", "--window-bytes", 100,
                   "-o", tmp_path / "t.csv") == 1
        assert "window 5" in capsys.readouterr().err
        assert not (tmp_path / "t.csv").exists()

    def test_missing_model(self, pipeline):
        assert run("score", pipeline / "nope.json", pipeline / "case/corpus.jsonl", "-o", pipeline / "t.csv") == 1

    def test_workers_do_not_change_output(self, pipeline):
        args = [pipeline / "model.json", pipeline / "case/corpus.jsonl"]
        run("score", *args, "-o", pipeline / "a.csv")
        run("score", *args, "--workers", 4, "-o", pipeline / "b.csv")
        assert (pipeline / "a.csv").read_bytes() == (pipeline / "b.csv").read_bytes()


class TestDetect:
    def test_case_study(self, pipeline):
        run("score", pipeline / "model.json", pipeline / "case/corpus.jsonl", "-o", pipeline / "t.csv")
        assert run("detect", pipeline / "t.csv", "--labels", pipeline / "case/labels.csv",
                   "-o", pipeline / "r.json") == 0
        report = json.loads((pipeline / "r.json").read_text())
        assert report["flagged"] == [17, 24, 25, 26, 27]
        assert report["metrics"]["f_measure"] == pytest.approx(0.8889, abs=1e-4)

    def test_constant_timeline(self, tmp_path):
        rows = ["window,start,end,tokens,entropy"] + [f"{i},{i},{i + 1},1,0.500000" for i in range(30)]
        (tmp_path / "t.csv").write_text("\n".join(rows) + "\n")
        assert run("detect", tmp_path / "t.csv", "-o", tmp_path / "r.json") == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["flagged"] == [] and "metrics" not in report

    def test_label_mismatch(self, tmp_path):
        rows = ["window,start,end,tokens,entropy"] + [f"{i},{i},{i + 1},1,0.5" for i in range(5)]
        (tmp_path / "t.csv").write_text("\n".join(rows) + "\n")
        (tmp_path / "l.csv").write_text("window,label\n0,normal\n1,normal\n")
        assert run("detect", tmp_path / "t.csv", "--labels", tmp_path / "l.csv", "-o", tmp_path / "r.json") == 1
        assert not (tmp_path / "r.json").exists()

    def test_flags_from_config(self, pipeline, tmp_path):
        run("score", pipeline / "model.json", pipeline / "case/corpus.jsonl", "-o", pipeline / "t.csv")
        (tmp_path / "d.cfg").write_text("hampel_k = 20\n")
        run("detect", pipeline / "t.csv", "--config", tmp_path / "d.cfg", "-o", tmp_path / "r.json")
        assert json.loads((tmp_path / "r.json").read_text())["flagged"] == [24, 25, 26, 27]
        run("detect", pipeline / "t.csv", "--config", tmp_path / "d.cfg", "--hampel-k", 3, "-o", tmp_path / "r.json")
        assert 17 in json.loads((tmp_path / "r.json").read_text())["flagged"]


class TestXval:
    def test_table(self, tmp_path):
        lines = [f"task {i} done on host-{i % 3}" if i % 2 else f"block {i} stored" for i in range(200)]
        (tmp_path / "c.log").write_text("\n".join(lines) + "\n")
        assert run("xval", tmp_path / "c.log", "--orders", "1:4", "-o", tmp_path / "x.csv") == 0
        rows = (tmp_path / "x.csv").read_text().splitlines()
        assert rows[0] == "order,mean,std" and len(rows) == 5
        means = [float(r.split(",")[1]) for r in rows[1:]]
        assert all(b <= a + 1e-12 for a, b in zip(means, means[1:]))
        assert run("xval", tmp_path / "c.log", "--orders", "1:4", "-o", tmp_path / "y.csv") == 0
        assert (tmp_path / "x.csv").read_bytes() == (tmp_path / "y.csv").read_bytes()

    def test_singleton_folds(self, tmp_path):
        (tmp_path / "c.log").write_text("".join(f"line {i}\n" for i in range(10)))
        assert run("xval", tmp_path / "c.log", "--orders", "1:2", "-o", tmp_path / "x.csv") == 0

    def test_too_few_records(self, tmp_path):
        (tmp_path / "c.log").write_text("a\nb\n")
        assert run("xval", tmp_path / "c.log", "-o", tmp_path / "x.csv") == 1


def test_usage_error_exits_nonzero():
    proc = subprocess.run([sys.executable, "-m", "logentropy.cli", "score"], capture_output=True)
    assert proc.returncode != 0


def test_inputs_untouched(pipeline):
    before = (pipeline / "case/corpus.jsonl").read_bytes()
    run("score", pipeline / "model.json", pipeline / "case/corpus.jsonl", "-o", pipeline / "t.csv")
    assert (pipeline / "case/corpus.jsonl").read_bytes() == before
