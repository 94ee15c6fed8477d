import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irisift.errors import FormatError, ParameterError, ValidationError
from irisift.fusion import (
    DatasetManifest,
    FusionParams,
    ManifestEntry,
    ScoreSet,
    compute_eer,
    det_points,
    enumerate_trials,
    fit_fusion_params,
    fuse,
    parse_manifest,
    read_fusion_params,
    read_score_file,
    split_users,
    tanh_normalize,
    trial_counts,
    write_fusion_params,
    write_manifest,
    write_score_file,
)

from oracles import sweep_eer


def synthetic_manifest(individuals, eyes=("left", "right")):
    return DatasetManifest([
        ManifestEntry(f"{u:03d}", eye, sess, smp, f"{u}_{eye}_{sess}_{smp}.pgm")
        for u in range(1, individuals + 1)
        for eye in eyes
        for sess in (1, 2)
        for smp in (1, 2, 3, 4)
    ])


class TestProtocol:
    @pytest.mark.parametrize("n,gen,imp", [(50, 1600, 19600), (150, 4800, 178800)])
    def test_published_counts(self, n, gen, imp):
        t = enumerate_trials(synthetic_manifest(n))
        assert (len(t.genuine), len(t.impostor)) == (gen, imp)

    def test_single_eye(self):
        t = enumerate_trials(synthetic_manifest(1, eyes=("left",)))
        assert (len(t.genuine), len(t.impostor)) == (16, 0)

    @settings(max_examples=10, deadline=None)
    @given(n=st.integers(1, 12))
    def test_count_formula(self, n):
        m = synthetic_manifest(n)
        t = enumerate_trials(m)
        assert (len(t.genuine), len(t.impostor)) == trial_counts(n)

    def test_trial_invariants(self):
        m = synthetic_manifest(3)
        ids = m.by_ident()
        t = enumerate_trials(m)
        for a, b in t.genuine:
            assert a != b and ids[a].user == ids[b].user
            assert (ids[a].session, ids[b].session) == (1, 2)
        for a, b in t.impostor:
            assert ids[a].user_id != ids[b].user_id and ids[a].eye == ids[b].eye
            assert ids[b].session == 2 and ids[b].sample == 1

    def test_missing_entries_listed(self):
        m = synthetic_manifest(2)
        m.entries = [e for e in m.entries if e.key != ("002", "left", 2, 3)]
        with pytest.raises(ValidationError, match="002 left 2 3"):
            enumerate_trials(m)

    def test_duplicates_rejected(self):
        e = ManifestEntry("1", "left", 1, 1, "a.pgm")
        with pytest.raises(ValidationError):
            DatasetManifest([e, e])

    def test_manifest_round_trip(self, tmp_path):
        m = synthetic_manifest(2)
        m = DatasetManifest([ManifestEntry(e.user_id, e.eye, e.session, e.sample, tmp_path / e.image)
                             for e in m.entries])
        write_manifest(tmp_path / "m.txt", m)
        back = parse_manifest(tmp_path / "m.txt")
        assert [e.key for e in back.entries] == [e.key for e in m.entries]
        assert back.entries[0].image == tmp_path / m.entries[0].image.name

    @pytest.mark.parametrize("line", ["1 left 1 1", "1 middle 1 1 a.pgm", "1 left 3 1 a.pgm", "1 left x 1 a.pgm"])
    def test_manifest_errors(self, tmp_path, line):
        (tmp_path / "m.txt").write_text(line + "\n")
        with pytest.raises(FormatError):
            parse_manifest(tmp_path / "m.txt")

    def test_split(self):
        dev, test = split_users([str(i) for i in range(1, 201)], 25, 25)
        assert dev == [str(i) for i in list(range(1, 26)) + list(range(176, 201))]
        assert len(test) == 150 and test[0] == "26"


class TestTanh:
    def test_centre_and_limits(self):
        p = FusionParams(3.0, 2.0)
        assert tanh_normalize(3.0, p) == 0.5
        assert tanh_normalize(1e6, p) == pytest.approx(1.0)
        assert tanh_normalize(-1e6, p) == pytest.approx(0.0)
        assert tanh_normalize(5.0, p) == pytest.approx(0.5 * (math.tanh(0.01) + 1))
        assert tanh_normalize(5.0, p) == pytest.approx(0.505, abs=1e-4)

    def test_bad_sigma(self):
        with pytest.raises(ParameterError):
            FusionParams(0.0, 0.0)
        with pytest.raises(ParameterError):
            tanh_normalize(1.0, SimpleNamespace(mu=0.0, sigma=0.0))
        with pytest.raises(ParameterError):
            fit_fusion_params([1.0])

    def test_fit(self):
        p = fit_fusion_params([1.0, 2.0, 3.0, 6.0])
        assert p.mu == 3.0 and p.sigma == pytest.approx(math.sqrt(14 / 3))

    def test_fuse_at_means(self):
        ps, pb = FusionParams(20.0, 5.0), FusionParams(0.6, 0.05)
        assert fuse(20.0, 0.4, ps, pb) == pytest.approx(1.0, abs=1e-15)

    def test_fuse_random_tables(self, rng):
        s, hd = rng.uniform(0, 100, 500), rng.uniform(0, 1, 500)
        ps, pb = FusionParams(30.0, 12.0), FusionParams(0.7, 0.08)
        expect = [0.5 * (math.tanh(0.01 * (a - 30.0) / 12.0) + 1) + 0.5 * (math.tanh(0.01 * ((1 - b) - 0.7) / 0.08) + 1)
                  for a, b in zip(s, hd)]
        np.testing.assert_allclose(fuse(s, hd, ps, pb), expect, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(a=st.floats(-1e3, 1e3), b=st.floats(-1e3, 1e3), mu=st.floats(-10, 10), sigma=st.floats(0.1, 10))
    def test_monotone(self, a, b, mu, sigma):
        p = FusionParams(mu, sigma)
        if a < b:
            assert tanh_normalize(a, p) <= tanh_normalize(b, p)


class TestEER:
    def test_separable(self):
        assert compute_eer(ScoreSet([1.0] * 5, [0.0] * 7))[0] == 0.0

    def test_indistinguishable(self):
        v = [0.1, 0.4, 0.4, 0.9]
        assert compute_eer(ScoreSet(v, v))[0] == pytest.approx(0.5)

    def test_hand_example(self):
        s = ScoreSet([0.9, 0.8, 0.7, 0.4], [0.6, 0.5, 0.3, 0.2])
        assert compute_eer(s)[0] == pytest.approx(0.25)
        assert sweep_eer(s.genuine.tolist(), s.impostor.tolist()) == pytest.approx(0.25)

    def test_empty(self):
        with pytest.raises(ParameterError):
            compute_eer(ScoreSet([], [1.0]))

    def test_matches_oracle(self, rng):
        for _ in range(200):
            g = rng.integers(0, 20, rng.integers(1, 30)).astype(float)
            i = rng.integers(0, 20, rng.integers(1, 30)).astype(float)
            assert compute_eer(ScoreSet(g, i))[0] == pytest.approx(sweep_eer(g.tolist(), i.tolist()), abs=1e-9)

    def test_monotone_invariance(self, rng):
        s = ScoreSet(rng.normal(1, 1, 80), rng.normal(0, 1, 120))
        e = compute_eer(s)[0]
        assert compute_eer(s.map(np.exp))[0] == pytest.approx(e, abs=1e-12)
        assert compute_eer(s.map(lambda v: tanh_normalize(v, FusionParams(1.0, 0.7))))[0] == pytest.approx(e, abs=1e-12)

    def test_det_points(self, rng):
        s = ScoreSet(rng.normal(1, 1, 50), rng.normal(0, 1, 60))
        pts = det_points(s)
        far = [p[0] for p in pts]
        frr = [p[1] for p in pts]
        assert pts[0] == (0.0, 1.0) and pts[-1] == (1.0, 0.0)
        assert far == sorted(far) and frr == sorted(frr, reverse=True)
        # the EER lies on the linear interpolation of the curve
        e = compute_eer(s)[0]
        for (f0, r0), (f1, r1) in zip(pts, pts[1:]):
            if (f0 - r0) < 0 <= (f1 - r1):
                a = (r0 - f0) / ((f1 - r1) - (f0 - r0))
                assert f0 + a * (f1 - f0) == pytest.approx(e, abs=1e-9)

    def test_det_two_scores(self):
        pts = det_points(ScoreSet([0.8], [0.2]))
        assert pts == [(0.0, 1.0), (0.0, 0.0), (1.0, 0.0)]

    def test_separable_det_has_zero_point(self):
        assert (0.0, 0.0) in det_points(ScoreSet([5, 6, 7], [1, 2]))


class TestFiles:
    def test_scores(self, tmp_path):
        rows = [("a", "b", "genuine", 0.1), ("a", "c", "impostor", 1 / 3)]
        write_score_file(tmp_path / "s.txt", rows)
        assert read_score_file(tmp_path / "s.txt") == rows

    def test_fusion_params(self, tmp_path):
        params = {"sift": FusionParams(12.5, 3.25), "baseline": FusionParams(0.7, 0.05)}
        write_fusion_params(tmp_path / "f.txt", params)
        assert read_fusion_params(tmp_path / "f.txt") == params
