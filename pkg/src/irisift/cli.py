"""Command-line entry point: ``irisift <verb> ...``."""
import argparse
import logging
import sys
from pathlib import Path

from irisift import baseline, fusion, harness
from irisift.errors import IrisiftError
from irisift.imaging import load_image, save_pgm
from irisift.keypoints import extract_features
from irisift.matching import match_features, write_match_dump
from irisift.segmentation import annulus_to_mask, detect_circles, load_manual_annulus, write_annulus

log = logging.getLogger("irisift")

# flag name -> config key
_CONFIG_FLAGS = {
    "sigma0": "sigma0",
    "scales_per_octave": "scales_per_octave",
    "contrast_threshold": "contrast_threshold",
    "edge_threshold": "edge_threshold",
    "ratio_threshold": "ratio_threshold",
    "angle_tolerance": "angle_tolerance",
    "length_tolerance": "length_tolerance",
    "length_tolerance_mode": "length_tolerance_mode",
    "num_octaves": "num_octaves",
    "radial_res": "radial_res",
    "angular_res": "angular_res",
    "wavelength": "wavelength",
    "sigma_on_f": "sigma_on_f",
    "max_shift": "max_shift",
    "pupil_range": "pupil_range",
    "iris_range": "iris_range",
    "workdir": "workdir",
    "fusion_params": "fusion_params",
    "sweep_contrast": "sweep_contrast",
    "sweep_angle": "sweep_angle",
    "sweep_length": "sweep_length",
}


def _add_config_args(p):
    g = p.add_argument_group("configuration (overrides --config)")
    g.add_argument("--config", type=Path, help="key = value configuration file")
    for flag in _CONFIG_FLAGS:
        g.add_argument("--" + flag.replace("_", "-"), dest=flag, metavar="V")
    g.add_argument("--no-trim", action="store_true", help="disable trimming of false matches")
    g.add_argument("--no-sweep-no-trim", action="store_true", help="omit the untrimmed row from sweeps")


def _add_manifest_args(p):
    p.add_argument("manifest", type=Path)
    p.add_argument("--split", choices=("all", "dev", "test"), default="all",
                   help="dev = first and last --dev-size individuals, test = the rest")
    p.add_argument("--dev-size", type=int, default=25)


def load_run_config(args):
    values = harness.read_config_file(args.config) if getattr(args, "config", None) else {}
    for flag, key in _CONFIG_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    if getattr(args, "no_trim", False):
        values["trim"] = "false"
    if getattr(args, "no_sweep_no_trim", False):
        values["sweep_no_trim"] = "false"
    return harness.build_config(values)


def load_manifest(args):
    manifest = fusion.parse_manifest(args.manifest)
    if args.split == "all":
        return manifest
    dev, test = fusion.split_users([e.user_id for e in manifest.entries], args.dev_size, args.dev_size)
    return manifest.select(dev if args.split == "dev" else test)


def cmd_extract(args):
    config = load_run_config(args)
    manifest = load_manifest(args)
    thresholds = config.sweep_contrast if args.sweep_grid else None
    if thresholds and config.sift.contrast_threshold not in thresholds:
        thresholds = [config.sift.contrast_threshold, *thresholds]
    summary = harness.run_extract(config, manifest, thresholds)
    for msg in summary.messages:
        print(msg, file=sys.stderr)
    print(summary.line())
    return 0 if summary.ok else 1


def cmd_fit_fusion(args):
    config = load_run_config(args)
    params = harness.fit_fusion(config, load_manifest(args))
    out = config.fusion_params_path()
    with harness.atomic_output(out) as tmp:
        fusion.write_fusion_params(tmp, params)
    for name in sorted(params):
        print(f"{name}: mu={params[name].mu:.6g} sigma={params[name].sigma:.6g}")
    print(f"wrote {out}")
    return 0


def cmd_evaluate(args):
    config = load_run_config(args)
    manifest = load_manifest(args)
    params = None
    if args.matcher == "fusion":
        path = config.fusion_params_path()
        if not path.exists():
            raise IrisiftError(f"no fusion parameters at {path}; run 'fit-fusion' on the development split first")
        params = fusion.read_fusion_params(path)
    rows = harness.score_trials(config, manifest, args.matcher, params)
    out_dir = Path(args.out_dir) if args.out_dir else Path(config.workdir)
    scores = fusion.scores_from_rows(rows)
    with harness.atomic_output(out_dir / f"scores_{args.matcher}.txt") as tmp:
        fusion.write_score_file(tmp, rows)
    with harness.atomic_output(out_dir / f"det_{args.matcher}.txt") as tmp:
        fusion.write_det_file(tmp, scores)
    eer, thr = fusion.compute_eer(scores)
    print(f"matcher={args.matcher} genuine={scores.genuine.size} impostor={scores.impostor.size}")
    print(f"EER={eer:.4f} threshold={thr:.6g}")
    return 0


def cmd_sweep(args):
    config = load_run_config(args)
    rows = harness.run_sweep(config, load_manifest(args))
    table = harness.format_sweep(rows)
    if args.out:
        with harness.atomic_output(args.out) as tmp:
            tmp.write_text(table)
    print(table, end="")
    return 0


def cmd_segment(args):
    config = load_run_config(args)
    img = load_image(args.image)
    annulus = detect_circles(img, config.pupil_range, config.iris_range)
    p, i = annulus.pupil, annulus.iris
    print(f"pupil {p.cx:g} {p.cy:g} {p.radius:g}")
    print(f"iris {i.cx:g} {i.cy:g} {i.radius:g}")
    if args.out:
        write_annulus(args.out, annulus)
    if args.mask:
        h, w = img.shape
        save_pgm(args.mask, annulus_to_mask(annulus, w, h))
    return 0


def _annulus_for(image, annulus_path, config):
    if annulus_path:
        return load_manual_annulus(annulus_path)
    return detect_circles(image, config.pupil_range, config.iris_range)


def cmd_match_pair(args):
    config = load_run_config(args)
    img_a, img_b = load_image(args.template), load_image(args.probe)
    ann_a = _annulus_for(img_a, args.template_annulus, config)
    ann_b = _annulus_for(img_b, args.probe_annulus, config)
    feats = []
    for img, ann in ((img_a, ann_a), (img_b, ann_b)):
        h, w = img.shape
        feats.append(extract_features(img, config.sift, mask=annulus_to_mask(ann, w, h)))
    result = match_features(feats[0], feats[1], config.sift)
    hd = baseline.hamming_match(
        baseline.iris_code(img_a, ann_a, config.radial_res, config.angular_res, config.wavelength, config.sigma_on_f),
        baseline.iris_code(img_b, ann_b, config.radial_res, config.angular_res, config.wavelength, config.sigma_on_f),
        config.max_shift,
    )
    print(f"keypoints template={len(feats[0])} probe={len(feats[1])}")
    print(f"sift_score={result.score}")
    print(f"baseline_hd={hd:.4f}")
    if args.dump:
        write_match_dump(args.dump, result)
    return 0


def cmd_synth(args):
    from irisift.synthetic import synthetic_eye

    out = Path(args.out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    lines = []
    for u in range(1, args.individuals + 1):
        for e, eye in enumerate(fusion.EYES):
            eye_seed = 1000 * u + e
            for session in fusion.SESSIONS:
                for sample in fusion.SAMPLES:
                    img, _, _ = synthetic_eye(eye_seed, eye_seed * 100 + session * 10 + sample)
                    name = f"images/{u:03d}_{eye}_s{session}_{sample}.pgm"
                    save_pgm(out / name, img)
                    lines.append(f"{u:03d} {eye} {session} {sample} {name}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    (out / "irisift.cfg").write_text(
        "# synthetic eyes are 320x240 with an iris radius of 80 px\n"
        "pupil_range = 15-60\niris_range = 65-110\n"
        f"workdir = {(out / 'work').as_posix()}\n"
    )
    print(f"wrote {len(lines)} images and {out / 'manifest.txt'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="irisift", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("extract", help="segment, extract keypoints and iris codes for a manifest")
    _add_manifest_args(p)
    _add_config_args(p)
    p.add_argument("--sweep-grid", action="store_true", help="also extract keypoints for every sweep D")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit-fusion", help="fit tanh normalisation on genuine scores")
    _add_manifest_args(p)
    _add_config_args(p)
    p.set_defaults(func=cmd_fit_fusion)

    p = sub.add_parser("evaluate", help="score the protocol and report EER")
    _add_manifest_args(p)
    _add_config_args(p)
    p.add_argument("--matcher", choices=harness.MATCHERS, default="sift")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="EER over a grid of D and trimming tolerances")
    _add_manifest_args(p)
    _add_config_args(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("segment", help="detect pupil and iris circles in one image")
    p.add_argument("image", type=Path)
    _add_config_args(p)
    p.add_argument("--out", type=Path, help="annulus file to write")
    p.add_argument("--mask", type=Path, help="mask PGM to write")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("match-pair", help="compare two images with both matchers")
    p.add_argument("template", type=Path)
    p.add_argument("probe", type=Path)
    p.add_argument("--template-annulus", type=Path)
    p.add_argument("--probe-annulus", type=Path)
    p.add_argument("--dump", type=Path, help="write the retained matches here")
    _add_config_args(p)
    p.set_defaults(func=cmd_match_pair)

    p = sub.add_parser("synth", help="write a synthetic two-session dataset")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--individuals", type=int, default=2)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IrisiftError, OSError) as exc:
        print(f"irisift {args.verb}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
