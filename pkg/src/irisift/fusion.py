"""Verification protocol, tanh score normalisation, sum-rule fusion and error rates."""
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from irisift.errors import FormatError, ParameterError, ValidationError

EYES = ("left", "right")
SESSIONS = (1, 2)
SAMPLES = (1, 2, 3, 4)
TANH_SCALE = 0.01


@dataclass(frozen=True)
class ManifestEntry:
    user_id: str
    eye: str
    session: int
    sample: int
    image: Path
    annulus: Path | None = None

    @property
    def key(self):
        return (self.user_id, self.eye, self.session, self.sample)

    @property
    def ident(self):
        return f"{self.user_id}_{self.eye}_s{self.session}_{self.sample}"

    @property
    def user(self):
        """Each eye is a separate enrolled identity."""
        return (self.user_id, self.eye)


@dataclass
class DatasetManifest:
    entries: list

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.key in seen:
                raise ValidationError(f"duplicate manifest entry {e.key}")
            seen.add(e.key)

    def by_key(self):
        return {e.key: e for e in self.entries}

    def by_ident(self):
        return {e.ident: e for e in self.entries}

    def users(self):
        return sorted({e.user for e in self.entries})

    def select(self, user_ids):
        keep = set(user_ids)
        return DatasetManifest([e for e in self.entries if e.user_id in keep])


def parse_manifest(path):
    """Read ``user_id eye session sample image_path [annulus_path]`` lines.

    Relative paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    entries = []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (5, 6):
            raise FormatError(f"{path}:{n}: expected 5 or 6 fields, got {len(parts)}")
        user, eye, session, sample = parts[:4]
        if eye not in EYES:
            raise FormatError(f"{path}:{n}: eye must be left or right, got {eye!r}")
        try:
            session, sample = int(session), int(sample)
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: session and sample must be integers") from exc
        if session not in SESSIONS or sample not in SAMPLES:
            raise FormatError(f"{path}:{n}: session must be 1-2 and sample 1-4")
        image = base / parts[4]
        annulus = base / parts[5] if len(parts) == 6 else None
        entries.append(ManifestEntry(user, eye, session, sample, image, annulus))
    return DatasetManifest(entries)


def write_manifest(path, manifest):
    path = Path(path)
    lines = []
    for e in manifest.entries:
        fields = [e.user_id, e.eye, str(e.session), str(e.sample), _rel(e.image, path.parent)]
        if e.annulus is not None:
            fields.append(_rel(e.annulus, path.parent))
        lines.append(" ".join(fields))
    path.write_text("\n".join(lines) + "\n")


def _rel(p, base):
    try:
        return str(Path(p).relative_to(base))
    except ValueError:
        return str(p)


@dataclass
class TrialSet:
    """Template/probe identifier pairs."""

    genuine: list = field(default_factory=list)
    impostor: list = field(default_factory=list)


def enumerate_trials(manifest):
    """Genuine and impostor comparisons of the two-session protocol.

    Each eye is its own identity. Genuine: every session-1 sample against
    every session-2 sample of the same eye. Impostor: every session-1
    sample against session-2 sample 1 of the same eye of every other
    individual, so left eyes are only ever compared with left eyes.
    """
    index = manifest.by_key()
    users = manifest.users()
    missing = [
        (uid, eye, sess, smp)
        for uid, eye in users
        for sess in SESSIONS
        for smp in SAMPLES
        if (uid, eye, sess, smp) not in index
    ]
    if missing:
        listed = ", ".join(" ".join(map(str, m)) for m in missing)
        raise ValidationError(f"manifest is incomplete, missing: {listed}")

    trials = TrialSet()
    for uid, eye in users:
        for a in SAMPLES:
            template = index[(uid, eye, 1, a)].ident
            for b in SAMPLES:
                trials.genuine.append((template, index[(uid, eye, 2, b)].ident))
    for uid, eye in users:
        for a in SAMPLES:
            template = index[(uid, eye, 1, a)].ident
            for other, other_eye in users:
                if other_eye != eye or other == uid:
                    continue
                trials.impostor.append((template, index[(other, eye, 2, 1)].ident))
    return trials


@dataclass
class ScoreSet:
    """Genuine and impostor similarity scores (higher means more likely genuine)."""

    genuine: np.ndarray
    impostor: np.ndarray

    def __post_init__(self):
        self.genuine = np.asarray(self.genuine, dtype=np.float64)
        self.impostor = np.asarray(self.impostor, dtype=np.float64)

    def map(self, fn):
        return ScoreSet(fn(self.genuine), fn(self.impostor))


@dataclass(frozen=True)
class FusionParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")


def fit_fusion_params(genuine_scores):
    """Mean and sample standard deviation (n - 1) of genuine scores."""
    g = np.asarray(genuine_scores, dtype=np.float64)
    if g.size < 2:
        raise ParameterError("need at least two genuine scores to fit normalisation")
    return FusionParams(float(g.mean()), float(g.std(ddof=1)))


def tanh_normalize(s, p):
    """Tanh estimator mapped onto (0, 1): ``0.5 * (tanh(0.01 * (s - mu) / sigma) + 1)``."""
    if not p.sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {p.sigma}")
    return 0.5 * (np.tanh(TANH_SCALE * (np.asarray(s, dtype=np.float64) - p.mu) / p.sigma) + 1.0)


def baseline_similarity(hd):
    return 1.0 - np.asarray(hd, dtype=np.float64)


def fuse(sift_score, baseline_hd, p_sift, p_base):
    """Sum of the tanh-normalised SIFT score and baseline similarity (1 - HD)."""
    return tanh_normalize(sift_score, p_sift) + tanh_normalize(baseline_similarity(baseline_hd), p_base)


def _rates(scores):
    g = np.sort(scores.genuine)
    imp = np.sort(scores.impostor)
    if g.size == 0 or imp.size == 0:
        raise ParameterError("both genuine and impostor scores are required")
    thr = np.unique(np.concatenate([g, imp]))
    thr = np.append(thr, np.nextafter(thr[-1], np.inf))
    far = (imp.size - np.searchsorted(imp, thr, side="left")) / imp.size
    frr = np.searchsorted(g, thr, side="left") / g.size
    return thr, far, frr


def compute_eer(scores):
    """Equal error rate and the threshold where FAR meets FRR.

    FAR(t) is the share of impostor scores >= t and FRR(t) the share of
    genuine scores < t. Between the two thresholds where FAR - FRR changes
    sign, both rates are interpolated linearly.
    """
    thr, far, frr = _rates(scores)
    diff = far - frr
    j = int(np.argmax(diff <= 0))
    if diff[j] == 0 or j == 0:
        return float(far[j]), float(thr[j])
    a = diff[j - 1] / (diff[j - 1] - diff[j])
    eer = far[j - 1] + a * (far[j] - far[j - 1])
    return float(eer), float(thr[j - 1] + a * (thr[j] - thr[j - 1]))


def det_curve(scores):
    """(thresholds, FAR, FRR) with thresholds descending, from (0, 1) to (1, 0)."""
    thr, far, frr = _rates(scores)
    return thr[::-1], far[::-1], frr[::-1]


def det_points(scores):
    _, far, frr = det_curve(scores)
    return list(zip(far.tolist(), frr.tolist()))


def write_det_file(path, scores):
    thr, far, frr = det_curve(scores)
    lines = [f"{t!r} {a!r} {r!r}" for t, a, r in zip(thr.tolist(), far.tolist(), frr.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def write_score_file(path, rows):
    """``rows`` are (template_id, probe_id, label, score) tuples."""
    lines = [f"{t} {p} {label} {float(s)!r}" for t, p, label, s in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_score_file(path):
    rows = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4 or parts[2] not in ("genuine", "impostor"):
            raise FormatError(f"{path}:{n}: expected 'template probe genuine|impostor score'")
        rows.append((parts[0], parts[1], parts[2], float(parts[3])))
    return rows


def scores_from_rows(rows):
    by_label = defaultdict(list)
    for _, _, label, s in rows:
        by_label[label].append(s)
    return ScoreSet(by_label["genuine"], by_label["impostor"])


def write_fusion_params(path, params):
    """``params`` maps matcher name to :class:`FusionParams`."""
    lines = ["# fusion-params v1"]
    for name in sorted(params):
        lines.append(f"{name}_mu={params[name].mu!r}")
        lines.append(f"{name}_sigma={params[name].sigma!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_fusion_params(path):
    values = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        values[key.strip()] = float(val)
    out = {}
    for key in values:
        if key.endswith("_mu"):
            name = key[:-3]
            if f"{name}_sigma" not in values:
                raise FormatError(f"{path}: {name}_sigma missing")
            out[name] = FusionParams(values[key], values[f"{name}_sigma"])
    return out


def eer_percent(scores):
    return 100.0 * compute_eer(scores)[0]


def split_users(user_ids, head=25, tail=25):
    """Development users (first ``head`` and last ``tail``) and the remaining test users."""
    ids = sorted(set(user_ids), key=_natural_key)
    dev_idx = set(range(min(head, len(ids)))) | set(range(max(len(ids) - tail, 0), len(ids)))
    dev = [u for k, u in enumerate(ids) if k in dev_idx]
    test = [u for k, u in enumerate(ids) if k not in dev_idx]
    return dev, test


def _natural_key(s):
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


def trial_counts(individuals, eyes=2):
    """Expected (genuine, impostor) trial counts for a complete manifest."""
    return 16 * individuals * eyes, 4 * individuals * max(individuals - 1, 0) * eyes
