"""End-to-end runs of the command-line verbs on a small synthetic dataset."""
import shutil
import zlib

import pytest

from irisift import harness
from irisift.cli import main
from irisift.errors import FormatError, ParameterError
from irisift.fusion import parse_manifest, read_score_file


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert main(["synth", str(root), "--individuals", "2"]) == 0
    cfg = root / "irisift.cfg"
    assert main(["extract", str(root / "manifest.txt"), "--config", str(cfg)]) == 0
    return root, cfg


def snapshot(workdir):
    return {p.relative_to(workdir): p.read_bytes() for p in sorted(workdir.rglob("*")) if p.is_file()}


class TestExtract:
    def test_artifacts_written(self, dataset):
        root, _ = dataset
        work = root / "work"
        assert len(list((work / "iriscode").iterdir())) == 32
        assert len(list(work.glob("sift_D*/*.sift"))) == 32
        assert len(list((work / "annulus").iterdir())) == 32

    def test_single_image_manifest(self, dataset, tmp_path, capsys):
        root, _ = dataset
        line = (root / "manifest.txt").read_text().splitlines()[0]
        img = root / line.split()[4]
        (tmp_path / "m.txt").write_text(" ".join(line.split()[:4] + [str(img)]) + "\n")
        code, out, _ = run(capsys, "extract", tmp_path / "m.txt", "--config", root / "irisift.cfg",
                           "--workdir", tmp_path / "w")
        assert code == 0 and "processed=1 skipped=0 failed=0" in out
        assert len(list((tmp_path / "w").rglob("*.sift"))) == 1
        assert len(list((tmp_path / "w").rglob("*.iriscode"))) == 1

    def test_rerun_is_byte_identical(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        lines = (root / "manifest.txt").read_text().splitlines()[:3]
        m = tmp_path / "m.txt"
        m.write_text("\n".join(" ".join(ln.split()[:4] + [str(root / ln.split()[4])]) for ln in lines) + "\n")
        run(capsys, "extract", m, "--config", cfg, "--workdir", tmp_path / "w")
        first = snapshot(tmp_path / "w")
        run(capsys, "extract", m, "--config", cfg, "--workdir", tmp_path / "w")
        assert snapshot(tmp_path / "w") == first
        shutil.rmtree(tmp_path / "w")
        run(capsys, "extract", m, "--config", cfg, "--workdir", tmp_path / "w")
        assert snapshot(tmp_path / "w") == first

    def test_missing_image_skipped(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        line = (root / "manifest.txt").read_text().splitlines()[0].split()
        m = tmp_path / "m.txt"
        m.write_text(" ".join(line[:4] + [str(root / line[4])]) + "\n" + "9 left 1 1 nowhere.pgm\n")
        code, out, err = run(capsys, "extract", m, "--config", cfg, "--workdir", tmp_path / "w")
        assert code != 0
        assert "processed=1 skipped=1 failed=0" in out
        assert "nowhere.pgm" in err

    def test_segmentation_failure_skipped(self, dataset, tmp_path, capsys):
        from irisift.imaging import save_pgm
        import numpy as np

        save_pgm(tmp_path / "blank.pgm", np.full((240, 320), 0.5))
        (tmp_path / "m.txt").write_text("1 left 1 1 blank.pgm\n")
        code, out, _ = run(capsys, "extract", tmp_path / "m.txt", "--config", dataset[1],
                           "--workdir", tmp_path / "w")
        assert code != 0 and "skipped=1" in out


class TestEvaluate:
    def test_sift_counts_and_determinism(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        code, out, _ = run(capsys, "evaluate", root / "manifest.txt", "--config", cfg,
                           "--out-dir", tmp_path / "a")
        assert code == 0 and "genuine=64 impostor=16" in out
        run(capsys, "evaluate", root / "manifest.txt", "--config", cfg, "--out-dir", tmp_path / "b")
        a = (tmp_path / "a" / "scores_sift.txt").read_bytes()
        assert a == (tmp_path / "b" / "scores_sift.txt").read_bytes()
        rows = read_score_file(tmp_path / "a" / "scores_sift.txt")
        assert len(rows) == 80
        det = (tmp_path / "a" / "det_sift.txt").read_text().splitlines()
        assert det[0].split()[1:] == ["0.0", "1.0"] and det[-1].split()[1:] == ["1.0", "0.0"]

    def test_baseline(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        code, out, _ = run(capsys, "evaluate", root / "manifest.txt", "--config", cfg,
                           "--matcher", "baseline", "--out-dir", tmp_path)
        assert code == 0 and "EER=" in out
        scores = [r[3] for r in read_score_file(tmp_path / "scores_baseline.txt")]
        assert all(0 <= s <= 1 for s in scores)

    def test_fusion_requires_fit(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        code, _, err = run(capsys, "evaluate", root / "manifest.txt", "--config", cfg, "--matcher", "fusion",
                           "--fusion-params", tmp_path / "none.txt")
        assert code == 2 and "fit-fusion" in err

    def test_fit_then_fuse(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        params = tmp_path / "fp.txt"
        code, out, _ = run(capsys, "fit-fusion", root / "manifest.txt", "--config", cfg, "--fusion-params", params)
        assert code == 0 and params.exists() and "sift: mu=" in out
        code, out, _ = run(capsys, "evaluate", root / "manifest.txt", "--config", cfg, "--matcher", "fusion",
                           "--fusion-params", params, "--out-dir", tmp_path)
        assert code == 0 and "genuine=64 impostor=16" in out

    def test_missing_artifact_named(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        code, _, err = run(capsys, "evaluate", root / "manifest.txt", "--config", cfg,
                           "--workdir", tmp_path / "empty")
        assert code == 2 and "missing artifact" in err and ".sift" in err


class TestSweep:
    def test_single_point_grid(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        code, out, _ = run(capsys, "sweep", root / "manifest.txt", "--config", cfg, "--no-sweep-no-trim",
                           "--out", tmp_path / "s.txt")
        rows = [ln for ln in out.splitlines() if not ln.startswith("#")]
        assert code == 0 and len(rows) == 1 and rows[0].endswith("*")
        assert (tmp_path / "s.txt").read_text() == out

    def test_grid_with_untrimmed_row(self, dataset, capsys):
        root, cfg = dataset
        code, out, _ = run(capsys, "sweep", root / "manifest.txt", "--config", cfg,
                           "--sweep-angle", "10,18", "--sweep-length", "10,14")
        rows = [ln for ln in out.splitlines() if not ln.startswith("#")]
        assert code == 0 and len(rows) == 5
        assert sum(r.endswith("*") for r in rows) == 1
        assert rows[0].split()[2:4] == ["-", "-"]

    def test_trimming_row_wins_on_benchmark_pairs(self, dataset, monkeypatch):
        # replace ratio-test output with the synthetic line benchmark used by the acceptance gate
        import numpy as np
        from test_acceptance import _trial

        manifest = parse_manifest(dataset[0] / "manifest.txt")
        user = {e.ident: e.user for e in manifest.entries}

        def fake_pairs(self, template, probe):
            rng = np.random.default_rng(zlib.crc32(f"{template} {probe}".encode()))
            if user[template] == user[probe]:
                return _trial(rng, int(rng.integers(10, 31)), int(rng.integers(0, 41)))
            return _trial(rng, 0, int(rng.integers(5, 51)))

        monkeypatch.setattr(harness.TrialScorer, "pairs", fake_pairs)
        monkeypatch.setattr(harness.TrialScorer, "require", lambda *a: None)
        rows = harness.run_sweep(harness.RunConfig(), manifest)
        untrimmed = [r for r in rows if not r.trimmed]
        trimmed = [r for r in rows if r.trimmed]
        assert len(untrimmed) == 1 and len(trimmed) == 1
        assert trimmed[0].eer < untrimmed[0].eer and trimmed[0].best

    def test_empty_grid(self, dataset):
        manifest = parse_manifest(dataset[0] / "manifest.txt")
        with pytest.raises(ParameterError):
            harness.run_sweep(harness.RunConfig(sweep_contrast=[]), manifest)
        with pytest.raises(ParameterError):
            harness.run_sweep(harness.RunConfig(sweep_angle=[], sweep_no_trim=False), manifest)


class TestSingleImageVerbs:
    def test_segment(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        img = next((root / "images").iterdir())
        code, out, _ = run(capsys, "segment", img, "--config", cfg, "--out", tmp_path / "a.txt",
                           "--mask", tmp_path / "m.pgm")
        assert code == 0 and out.startswith("pupil ")
        assert (tmp_path / "a.txt").read_text() == out
        assert (tmp_path / "m.pgm").exists()

    def test_match_pair(self, dataset, tmp_path, capsys):
        root, cfg = dataset
        imgs = sorted((root / "images").iterdir())
        code, out, _ = run(capsys, "match-pair", imgs[0], imgs[4], "--config", cfg, "--dump", tmp_path / "d.txt")
        assert code == 0 and "sift_score=" in out and "baseline_hd=" in out
        score = int(out.split("sift_score=")[1].split()[0])
        assert (tmp_path / "d.txt").read_text().splitlines()[0].endswith(f"score={score}")

    def test_bad_image(self, tmp_path, capsys):
        (tmp_path / "x.pgm").write_bytes(b"garbage")
        code, _, err = run(capsys, "segment", tmp_path / "x.pgm")
        assert code == 2 and "error" in err


class TestConfig:
    def test_percent_and_fraction(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("contrast_threshold = 0.25/255\nlength_tolerance = 14  # percent\npupil_range = 10-50\n")
        cfg = harness.build_config(harness.read_config_file(p))
        assert cfg.sift.contrast_threshold == pytest.approx(0.25 / 255)
        assert cfg.sift.length_tolerance == pytest.approx(0.14)
        assert cfg.pupil_range == (10, 50)

    def test_ratio_mode(self):
        cfg = harness.build_config({"length_tolerance": "0.2", "length_tolerance_mode": "ratio"})
        assert cfg.sift.length_tolerance == pytest.approx(0.2)

    def test_unknown_key(self):
        with pytest.raises(FormatError):
            harness.build_config({"colour": "blue"})

    def test_bad_line(self, tmp_path):
        (tmp_path / "c.cfg").write_text("just words\n")
        with pytest.raises(FormatError):
            harness.read_config_file(tmp_path / "c.cfg")
