"""Batch pipeline: run configuration, per-image artifacts, trial scoring, sweeps."""
import logging
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

from irisift import baseline, fusion
from irisift.errors import FormatError, IrisiftError, ParameterError
from irisift.imaging import load_image
from irisift.keypoints import SiftFeatures, extract_features
from irisift.matching import match_descriptors, predominant_geometry, trim_matches
from irisift.scalespace import SiftParams, build_scale_space, length_tolerance_from_config
from irisift.segmentation import (
    DEFAULT_IRIS_RANGE,
    DEFAULT_PUPIL_RANGE,
    annulus_to_mask,
    detect_circles,
    load_manual_annulus,
    write_annulus,
)

log = logging.getLogger(__name__)

MATCHERS = ("sift", "baseline", "fusion")


class MissingArtifactError(IrisiftError):
    pass


@dataclass
class RunConfig:
    sift: SiftParams = field(default_factory=SiftParams)
    radial_res: int = baseline.RADIAL_RES
    angular_res: int = baseline.ANGULAR_RES
    wavelength: float = baseline.WAVELENGTH
    sigma_on_f: float = baseline.SIGMA_ON_F
    max_shift: int = baseline.MAX_SHIFT
    pupil_range: tuple = DEFAULT_PUPIL_RANGE
    iris_range: tuple = DEFAULT_IRIS_RANGE
    workdir: Path = Path("irisift-work")
    fusion_params: Path | None = None
    sweep_contrast: list = field(default_factory=lambda: [0.25 / 255])
    sweep_angle: list = field(default_factory=lambda: [18.0])
    sweep_length: list = field(default_factory=lambda: [0.14])
    sweep_no_trim: bool = True

    def fusion_params_path(self):
        return Path(self.fusion_params) if self.fusion_params else Path(self.workdir) / "fusion_params.txt"


def parse_number(text):
    """Float, optionally written as a fraction such as ``0.25/255``."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _parse_range(text):
    lo, _, hi = text.replace(",", "-").partition("-")
    return (int(lo), int(hi))


def _parse_bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise FormatError(f"not a boolean: {text!r}")


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise FormatError(f"{path}:{n}: expected 'key = value'")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


_SIFT_KEYS = {
    "sigma0": float,
    "scales_per_octave": int,
    "contrast_threshold": parse_number,
    "edge_threshold": float,
    "ratio_threshold": float,
    "angle_tolerance": float,
}


def build_config(values):
    """Make a :class:`RunConfig` from string key/value settings.

    Length tolerances are read in the configured ``length_tolerance_mode``
    (``percent`` by default, so ``14`` means 0.14).
    """
    values = dict(values)
    mode = values.pop("length_tolerance_mode", "percent")
    sift_kwargs = {}
    for key, conv in _SIFT_KEYS.items():
        if key in values:
            sift_kwargs[key] = conv(values.pop(key))
    if "length_tolerance" in values:
        sift_kwargs["length_tolerance"] = length_tolerance_from_config(values.pop("length_tolerance"), mode)
    if "num_octaves" in values:
        v = values.pop("num_octaves")
        sift_kwargs["num_octaves"] = v if v == "auto" else int(v)
    if "trim" in values:
        sift_kwargs["trim"] = _parse_bool(values.pop("trim"))
    cfg = RunConfig(sift=SiftParams(**sift_kwargs))

    for key in ("radial_res", "angular_res", "max_shift"):
        if key in values:
            setattr(cfg, key, int(values.pop(key)))
    for key in ("wavelength", "sigma_on_f"):
        if key in values:
            setattr(cfg, key, float(values.pop(key)))
    for key in ("pupil_range", "iris_range"):
        if key in values:
            setattr(cfg, key, _parse_range(values.pop(key)))
    if "workdir" in values:
        cfg.workdir = Path(values.pop("workdir"))
    if "fusion_params" in values:
        cfg.fusion_params = Path(values.pop("fusion_params"))
    if "sweep_contrast" in values:
        cfg.sweep_contrast = [parse_number(v) for v in values.pop("sweep_contrast").split(",")]
    if "sweep_angle" in values:
        cfg.sweep_angle = [float(v) for v in values.pop("sweep_angle").split(",")]
    if "sweep_length" in values:
        cfg.sweep_length = [length_tolerance_from_config(v, mode) for v in values.pop("sweep_length").split(",")]
    if "sweep_no_trim" in values:
        cfg.sweep_no_trim = _parse_bool(values.pop("sweep_no_trim"))
    if values:
        raise FormatError(f"unknown configuration keys: {', '.join(sorted(values))}")
    return cfg


@contextmanager
def atomic_output(path):
    """Yield a temporary path that replaces ``path`` once the block succeeds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


class ArtifactStore:
    """Where per-image extraction results live under the work directory."""

    def __init__(self, workdir):
        self.root = Path(workdir)

    def keypoints(self, ident, contrast_threshold):
        return self.root / f"sift_D{contrast_threshold:.6g}" / f"{ident}.sift"

    def iriscode(self, ident):
        return self.root / "iriscode" / f"{ident}.iriscode"

    def annulus(self, ident):
        return self.root / "annulus" / f"{ident}.annulus"


@dataclass
class RunSummary:
    processed: int = 0
    skipped: int = 0
    failed: int = 0
    messages: list = field(default_factory=list)

    @property
    def ok(self):
        return self.skipped == 0 and self.failed == 0

    def line(self):
        return f"processed={self.processed} skipped={self.skipped} failed={self.failed}"


def segment_entry(entry, img, config):
    if entry.annulus is not None:
        return load_manual_annulus(entry.annulus)
    return detect_circles(img, config.pupil_range, config.iris_range)


def extract_entry(entry, config, store, contrast_thresholds=None):
    """Write the annulus, keypoint file(s) and iris code of one manifest entry."""
    img = load_image(entry.image)
    annulus = segment_entry(entry, img, config)
    h, w = img.shape
    mask = annulus_to_mask(annulus, w, h)
    with atomic_output(store.annulus(entry.ident)) as tmp:
        write_annulus(tmp, annulus)

    thresholds = contrast_thresholds or [config.sift.contrast_threshold]
    space = build_scale_space(img, config.sift)
    for d in thresholds:
        params = replace(config.sift, contrast_threshold=d)
        feats = extract_features(img, params, mask=mask, space=space)
        with atomic_output(store.keypoints(entry.ident, d)) as tmp:
            feats.save(tmp)

    code = baseline.iris_code(img, annulus, config.radial_res, config.angular_res,
                              config.wavelength, config.sigma_on_f)
    with atomic_output(store.iriscode(entry.ident)) as tmp:
        baseline.write_iriscode(tmp, code)


def run_extract(config, manifest, contrast_thresholds=None):
    store = ArtifactStore(config.workdir)
    summary = RunSummary()
    for entry in manifest.entries:
        if not Path(entry.image).exists():
            summary.skipped += 1
            summary.messages.append(f"skip {entry.ident}: image not found: {entry.image}")
            log.warning(summary.messages[-1])
            continue
        try:
            extract_entry(entry, config, store, contrast_thresholds)
        except (IrisiftError, OSError) as exc:
            summary.skipped += 1
            summary.messages.append(f"skip {entry.ident}: {exc}")
            log.warning(summary.messages[-1])
            continue
        summary.processed += 1
    return summary


class TrialScorer:
    """Scores template/probe pairs from extracted artifacts."""

    def __init__(self, config, manifest, contrast_threshold=None):
        self.config = config
        self.store = ArtifactStore(config.workdir)
        self.idents = manifest.by_ident()
        self.contrast = config.sift.contrast_threshold if contrast_threshold is None else contrast_threshold
        self._features = lru_cache(maxsize=1024)(self._load_features)
        self._codes = lru_cache(maxsize=4096)(self._load_code)

    def require(self, matcher, idents):
        """Raise naming the first missing artifact needed by ``matcher``."""
        for ident in idents:
            paths = []
            if matcher in ("sift", "fusion"):
                paths.append(self.store.keypoints(ident, self.contrast))
            if matcher in ("baseline", "fusion"):
                paths.append(self.store.iriscode(ident))
            for p in paths:
                if not p.exists():
                    raise MissingArtifactError(f"missing artifact {p}; run 'extract' first")

    def _load_features(self, ident):
        return SiftFeatures.load(self.store.keypoints(ident, self.contrast))

    def _load_code(self, ident):
        return baseline.read_iriscode(self.store.iriscode(ident))

    def pairs(self, template, probe):
        return match_descriptors(self._features(template), self._features(probe),
                                 self.config.sift.ratio_threshold)

    def sift(self, template, probe, params=None):
        params = params or self.config.sift
        pairs = self.pairs(template, probe)
        if not params.trim:
            return float(len(pairs))
        return float(trim_matches(pairs, params.angle_tolerance, params.length_tolerance).score)

    def hamming(self, template, probe):
        return baseline.hamming_match(self._codes(template), self._codes(probe), self.config.max_shift)


def _all_idents(trials):
    seen = {}
    for t, p in trials.genuine + trials.impostor:
        seen.setdefault(t, None)
        seen.setdefault(p, None)
    return list(seen)


def score_trials(config, manifest, matcher, fusion_params=None):
    """Score every trial of the protocol; returns rows for a score file."""
    if matcher not in MATCHERS:
        raise ParameterError(f"unknown matcher {matcher!r}")
    if matcher == "fusion" and fusion_params is None:
        raise ParameterError("fusion needs fitted normalisation parameters; run 'fit-fusion' first")
    trials = fusion.enumerate_trials(manifest)
    scorer = TrialScorer(config, manifest)
    scorer.require(matcher, _all_idents(trials))
    rows = []
    for label, pairs in (("genuine", trials.genuine), ("impostor", trials.impostor)):
        for template, probe in pairs:
            if matcher == "sift":
                s = scorer.sift(template, probe)
            elif matcher == "baseline":
                s = float(fusion.baseline_similarity(scorer.hamming(template, probe)))
            else:
                s = float(fusion.fuse(scorer.sift(template, probe), scorer.hamming(template, probe),
                                      fusion_params["sift"], fusion_params["baseline"]))
            rows.append((template, probe, label, s))
    return rows


def fit_fusion(config, manifest):
    """Fit tanh normalisation on the genuine trials of ``manifest``."""
    trials = fusion.enumerate_trials(manifest)
    scorer = TrialScorer(config, manifest)
    scorer.require("fusion", _all_idents(trials))
    sift_g = [scorer.sift(t, p) for t, p in trials.genuine]
    base_g = [float(fusion.baseline_similarity(scorer.hamming(t, p))) for t, p in trials.genuine]
    return {"sift": fusion.fit_fusion_params(sift_g), "baseline": fusion.fit_fusion_params(base_g)}


@dataclass
class SweepRow:
    contrast: float
    angle_tol: float | None
    length_tol: float | None
    eer: float
    best: bool = False

    @property
    def trimmed(self):
        return self.angle_tol is not None


def run_sweep(config, manifest):
    """EER for every (D, angle tolerance, length tolerance) grid point.

    Ratio-test pairs are computed once per trial and D; trimming is applied
    to the cached pairs for each tolerance pair.
    """
    if not config.sweep_contrast or (not config.sweep_no_trim and not (config.sweep_angle and config.sweep_length)):
        raise ParameterError("sweep grid is empty")
    trials = fusion.enumerate_trials(manifest)
    labelled = [("genuine", t, p) for t, p in trials.genuine] + [("impostor", t, p) for t, p in trials.impostor]
    rows = []
    for d in config.sweep_contrast:
        scorer = TrialScorer(config, manifest, contrast_threshold=d)
        scorer.require("sift", _all_idents(trials))
        cached = []
        for label, t, p in labelled:
            pairs = scorer.pairs(t, p)
            cached.append((label, pairs, predominant_geometry(pairs)))
        if config.sweep_no_trim:
            rows.append(SweepRow(d, None, None, _eer_of(cached, lambda pairs, geo: len(pairs))))
        for et in config.sweep_angle:
            for el in config.sweep_length:
                def score(pairs, geo, et=et, el=el):
                    return trim_matches(pairs, et, el, geometry=geo).score
                rows.append(SweepRow(d, et, el, _eer_of(cached, score)))
    best = min(range(len(rows)), key=lambda i: rows[i].eer)
    rows[best].best = True
    return rows


def _eer_of(cached, score_fn):
    g, imp = [], []
    for label, pairs, geo in cached:
        (g if label == "genuine" else imp).append(score_fn(pairs, geo))
    return fusion.compute_eer(fusion.ScoreSet(g, imp))[0]


def format_sweep(rows):
    lines = ["# D D*255 eps_theta eps_l eer_percent best"]
    for r in rows:
        et = "-" if r.angle_tol is None else f"{r.angle_tol:g}"
        el = "-" if r.length_tol is None else f"{r.length_tol:g}"
        lines.append(f"{r.contrast:.6g} {r.contrast * 255:.4g} {et} {el} {100 * r.eer:.4f} {'*' if r.best else ''}".rstrip())
    return "\n".join(lines) + "\n"
