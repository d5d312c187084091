"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 input error, 4 internal invariant
violation. Errors print one line: ``error: <module>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .attacks import AttackError, apply_attack, parse_attack, parse_attack_file
from .frames import FrameStoreError, FrameSequence, load_sequence, write_sequence
from .metrics import MetricError, report
from .pipeline import histogram_csv, histogram_svg, run_demo, segment_sequence
from .segment import GmmParams, SegmentError, decode_mask_rle, encode_mask_rle
from .selective import (ContainerError, EncryptedContainer, decrypt_containers, encrypt_sequence,
                        generate_keys, read_keys, write_keys)
from .threat import (CvssVector, adt_enumerate, adt_evaluate, cvss_base_score, load_adt,
                     load_catalog, load_cvss_assessment, load_risk_matrix, render_report)
from .threat.catalog import CatalogError
from .threat.cvss import CvssError, severity

log = logging.getLogger("demis")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3, 4

_MODULES = {
    FrameStoreError: "frame_store",
    SegmentError: "roi_segment",
    ContainerError: "selective_crypto",
    AttackError: "attack_sim",
    MetricError: "visual_metrics",
    CvssError: "threat_model",
    CatalogError: "threat_model",
}

# defaults applied after merging --config, so explicit flags always win
DEFAULTS = {
    "format": "png",
    "method": None,
    "threshold": 25.0,
    "morph_radius": 1,
    "tau": 0.9,
    "frames": "all",
    "n_frames": 10,
    "size": 64,
}


class UsageError(Exception):
    pass


def _mask_dir_files(d: Path) -> list[Path]:
    files = sorted(d.glob("mask_*.rle"))
    if not files:
        raise FrameStoreError(f"{d}: no mask_*.rle files")
    return files


def _seed_or_entropy(seed):
    return int(seed) if seed is not None else int.from_bytes(os.urandom(4), "little")


def _write_run(out: Path, command: str, **info) -> None:
    info = {k: (str(v) if isinstance(v, Path) else v) for k, v in info.items()}
    (out / "run.json").write_text(json.dumps({"command": command, **info}, indent=2,
                                             sort_keys=True) + "\n")


def _parse_selection(text: str, n: int):
    from .attacks import parse_frames
    sel = parse_frames(text)
    return list(range(n)) if sel is None else list(sel)


# -- commands ----------------------------------------------------------------

def cmd_segment(a) -> int:
    background = a.background or ("dynamic" if a.method == "motiondiff" else "static")
    seq = load_sequence(a.input, None, background_kind=background)
    gmm = GmmParams()
    masks = segment_sequence(seq, a.method, gmm_params=gmm, threshold=a.threshold,
                             morph_radius=a.morph_radius, override=a.override)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(masks):
        (out / f"mask_{i:04d}.rle").write_bytes(encode_mask_rle(m))
    _write_run(out, "segment", method=a.method or segment_method_default(seq),
               threshold=a.threshold, morph_radius=a.morph_radius, frames=len(masks))
    print(f"{len(masks)} masks written to {out}")
    return EXIT_OK


def segment_method_default(seq: FrameSequence) -> str:
    return "gmm" if seq.background_kind == "static" else "motiondiff"


def cmd_encrypt(a) -> int:
    seq = load_sequence(a.input, None, fps=a.fps or 25)
    masks = [decode_mask_rle(p.read_bytes()) for p in _mask_dir_files(Path(a.masks))]
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    if a.keys:
        keys = read_keys(a.keys)
        seed = None
    else:
        seed = a.seed
        keys = generate_keys(seed)
        write_keys(keys, out / "keys.txt")
    fg, bg = encrypt_sequence(seq, masks, keys, encrypt_bg=a.encrypt_bg)
    fg.write(out / "fg.demis")
    bg.write(out / "bg.demis")
    _write_run(out, "encrypt", seed=seed, encrypt_bg=a.encrypt_bg, frames=len(seq))
    print(f"wrote {out / 'fg.demis'} and {out / 'bg.demis'}")
    return EXIT_OK


def cmd_attack(a) -> int:
    try:
        specs = [parse_attack(s) for s in (a.attack or [])]
        if a.attack_file:
            specs += parse_attack_file(Path(a.attack_file).read_text())
    except AttackError as exc:
        raise UsageError(f"attack: {exc}") from None
    if not specs:
        raise UsageError("attack: give --attack SPEC or --attack-file FILE")
    seed = _seed_or_entropy(a.seed)
    container = EncryptedContainer.read(a.fg)
    specs = [replace(s, seed=seed) if s.seed is None else s for s in specs]
    for spec in specs:
        container = apply_attack(container, spec)
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    container.write(out)
    (out.parent / (out.name + ".run.json")).write_text(json.dumps(
        {"command": "attack", "seed": seed, "attacks": [str(s) for s in specs]},
        indent=2, sort_keys=True) + "\n")
    print(f"attacked container written to {out}")
    return EXIT_OK


def cmd_decrypt(a) -> int:
    fg = EncryptedContainer.read(a.fg)
    bg = EncryptedContainer.read(a.bg)
    keys = read_keys(a.keys)
    seq, flags = decrypt_containers(fg, bg, keys)
    out = Path(a.out)
    write_sequence(seq, out, a.format)
    with open(out / "flags.csv", "w") as fh:
        fh.write("frame,deficit,surplus\n")
        for i, f in enumerate(flags):
            fh.write(f"{i},{int(f.deficit)},{int(f.surplus)}\n")
    bad = sum(not f.clean for f in flags)
    if bad:
        log.warning("%d frame(s) had payload length anomalies (see flags.csv)", bad)
    print(f"{len(seq)} frames written to {out}")
    return EXIT_OK


def cmd_analyze(a) -> int:
    orig = load_sequence(a.original)
    att = load_sequence(a.attacked)
    sel = _parse_selection(a.frames, len(orig))
    rep = report(orig, att, sel)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(rep.to_csv())
    for i in sel[:1] if a.histograms else []:
        frames = {"original": orig.frames[i], "attacked": att.frames[i]}
        (out / "histogram.csv").write_text(histogram_csv(frames))
        for label, frame in frames.items():
            for ch in ("r", "g", "b"):
                (out / f"hist_{label}_{ch}.svg").write_text(histogram_svg(frame, ch, f"frame {i} {label}"))
    sys.stdout.write(rep.to_csv())
    return EXIT_OK


def _ids(text):
    return [s.strip() for s in (text or "").split(",") if s.strip()]


def cmd_adt(a) -> int:
    tree = load_adt(a.tree)
    attacks, defenses = _ids(a.attacks), _ids(a.defenses)
    result = {"satisfied": attacks, "active": defenses,
              "compromised": adt_evaluate(tree, attacks, defenses)}
    if a.enumerate:
        result["minimal_attack_sets"] = sorted(sorted(s) for s in adt_enumerate(tree, None, defenses))
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if a.out:
        Path(a.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_cvss(a) -> int:
    v = CvssVector.parse(a.vector)
    score = cvss_base_score(v)
    print(f"{score:.1f}" if not a.verbose else f"{score:.1f} {severity(score)} {v}")
    return EXIT_OK


def cmd_report(a) -> int:
    catalog = load_catalog(a.catalog)
    risk = load_risk_matrix(catalog, a.risk)
    cvss = load_cvss_assessment(a.cvss_file)
    adt_result = None
    if a.adt_result:
        adt_result = json.loads(Path(a.adt_result).read_text())
    metrics = None
    if a.metrics:
        metrics = {Path(p).stem: _read_metric_csv(Path(p)) for p in a.metrics}
    md, js = render_report(catalog, risk, cvss, adt_result, metrics, seed=a.seed)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "threat_report.md").write_text(md)
    (out / "threat_report.json").write_text(js)
    print(f"report written to {out}")
    return EXIT_OK


def _read_metric_csv(path: Path):
    import csv as _csv
    from .metrics import MetricReport, MetricRow
    try:
        rows = list(_csv.DictReader(path.read_text().splitlines()))
        return MetricReport([MetricRow(int(r["frame"]), float(r["entropy_orig"]),
                                       float(r["entropy_att"]), float(r["mse"]), float(r["ssim"]))
                             for r in rows])
    except (OSError, KeyError, ValueError) as exc:
        raise MetricError(f"{path}: not a metric report CSV ({exc})") from None


def cmd_demo(a) -> int:
    seed = _seed_or_entropy(a.seed)
    res = run_demo(a.out, seed, n_frames=a.n_frames, size=a.size, tau=a.tau)
    sys.stdout.write(res["tables"]["entropy"])
    print(f"seed {seed}; outputs in {a.out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="demis", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON file supplying defaults for any flag")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("segment", help="compute FG masks for a frame directory")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--method", choices=("gmm", "motiondiff"))
    s.add_argument("--background", choices=("static", "dynamic"))
    s.add_argument("--override", action="store_true", help="allow a method/background mismatch")
    s.add_argument("--threshold", type=float)
    s.add_argument("--morph-radius", type=int)
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("encrypt", help="selectively encrypt a sequence into FG/BG containers")
    s.add_argument("--input", required=True)
    s.add_argument("--masks", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, help="derive keys from a seed (test mode)")
    s.add_argument("--keys", help="existing key file")
    s.add_argument("--encrypt-bg", action="store_true")
    s.add_argument("--fps", type=int)
    s.set_defaults(func=cmd_encrypt)

    s = sub.add_parser("attack", help="tamper with an FG container")
    s.add_argument("--fg", required=True)
    s.add_argument("--attack", action="append", help="kind[:param=value,...][@frames]")
    s.add_argument("--attack-file")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("decrypt", help="rebuild frames from FG+BG containers")
    s.add_argument("--fg", required=True)
    s.add_argument("--bg", required=True)
    s.add_argument("--keys", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("png", "ppm"))
    s.set_defaults(func=cmd_decrypt)

    s = sub.add_parser("analyze", help="entropy/MSE/SSIM between two sequences")
    s.add_argument("--original", required=True)
    s.add_argument("--attacked", required=True)
    s.add_argument("--frames")
    s.add_argument("--out", required=True)
    s.add_argument("--histograms", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("adt", help="evaluate an attack-defense tree")
    s.add_argument("--tree", help="ADT JSON (default: bundled tree)")
    s.add_argument("--attacks", help="comma-separated satisfied attack leaf ids")
    s.add_argument("--defenses", help="comma-separated active defense leaf ids")
    s.add_argument("--enumerate", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_adt)

    s = sub.add_parser("cvss", help="CVSS v3.1 base score of a vector")
    s.add_argument("vector")
    s.set_defaults(func=cmd_cvss)

    s = sub.add_parser("report", help="render the threat report")
    s.add_argument("--out", required=True)
    s.add_argument("--catalog")
    s.add_argument("--risk")
    s.add_argument("--cvss-file")
    s.add_argument("--adt-result")
    s.add_argument("--metrics", nargs="*")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("demo", help="full pipeline on bundled synthetic sequences")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--tau", type=float)
    s.add_argument("--n-frames", type=int)
    s.add_argument("--size", type=int)
    s.set_defaults(func=cmd_demo)
    return p


def _apply_config(args: argparse.Namespace) -> None:
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"config {args.config}: expected a JSON object")
        for k, v in cfg.items():
            k = k.replace("-", "_")
            if getattr(args, k, None) in (None, False):
                setattr(args, k, v)
    for k, v in DEFAULTS.items():
        if getattr(args, k, None) is None and hasattr(args, k):
            setattr(args, k, v)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(args)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except tuple(_MODULES) as exc:
        module = next(m for cls, m in _MODULES.items() if isinstance(exc, cls))
        print(f"error: {module}: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}",
              file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # invariant violations and bugs
        print(f"error: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
