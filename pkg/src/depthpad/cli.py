"""Command line front end.

Subcommands:
  simulate  - run the camera-geometry scene sweep, write CSV and an SVG plot
  demo      - synthetic end-to-end pipeline (labels, motion features,
              recurrence, fusion, losses, scores) reported as JSON
  metrics   - compute PAD metrics from a records CSV, reported as JSON

Settings resolve as command line > config file > defaults. The config file is
flat "key = value" text with '#' comments. Exit codes: 0 success, 2 usage
error, 3 data error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import depthlabel, geometry, metrics
from .features import OffBlockWeights, conv2d, off_block
from .recurrent import ConvGruCell, convgru_run, fuse_depth
from .supervision import BinaryHead, multi_frame_report


class UsageError(Exception):
    """Bad flags or config file; maps to exit code 2."""


class DataError(Exception):
    """Bad input data or an unusable scene; maps to exit code 3."""


# All recognized config-file fields with their parsers and defaults.
def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_names(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


CONFIG_FIELDS = {
    "f": (float, 1.0), "z": (float, 2.0),
    "fa": (float, 1.0), "fb": (float, 1.0),
    "za": (float, 2.0), "zb": (float, 4.0),
    "d1": (float, 0.4), "d2": (float, 1.0),
    "dx": (float, 0.3), "dv": (float, 0.05),
    "theta": (float, math.pi / 12),
    "ul1": (float, 1.0), "um1": (float, 1.3), "ur1": (float, 0.7),
    "dv_schedule": (_parse_floats, [0.05, 0.1, -0.05, 0.02]),
    "scenes": (_parse_names, ["real", "print", "replay", "rotated"]),
    "frames": (int, 5),
    "seed": (int, 0),
    "out": (str, "."),
    "alpha": (float, 0.8),
    "beta": (float, 0.9),
    "threshold": (float, 0.5),
    "oracle": (_parse_bool, False),
}


def parse_config_file(path) -> dict:
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected 'key = value', "
                             f"got {line!r}")
        key, _, text = line.partition("=")
        key = key.strip()
        if key not in CONFIG_FIELDS:
            raise UsageError(f"{path}:{line_no}: unknown field {key!r}")
        parser, _ = CONFIG_FIELDS[key]
        try:
            values[key] = parser(text.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{line_no}: bad value for {key!r}: {exc}")
    return values


class Settings:
    """Resolved settings: command line beats config file beats defaults."""

    def __init__(self, args: argparse.Namespace):
        self._file = parse_config_file(args.config) if args.config else {}
        self._args = args

    def get(self, key: str):
        cli_value = getattr(self._args, key, None)
        if cli_value is not None:
            return cli_value
        if key in self._file:
            return self._file[key]
        return CONFIG_FIELDS[key][1]


# -- SVG emission -----------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_line_plot(path, series: dict, title: str, x_label: str, y_label: str,
                  width: int = 640, height: int = 420) -> None:
    """Minimal native SVG: axes, one polyline per series, inline legend.

    series maps a name to a list of (x, y) points; y may be None for gaps.
    """
    margin = 56
    xs = [x for points in series.values() for x, y in points if y is not None]
    ys = [y for points in series.values() for x, y in points if y is not None]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.2f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.2f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>',
        f'<text x="16" y="{height / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {height / 2:.2f})">{y_label}</text>',
        f'<text x="{margin}" y="{height - margin + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="10">{x_lo:.2f}</text>',
        f'<text x="{width - margin}" y="{height - margin + 16}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="10">'
        f'{x_hi:.2f}</text>',
        f'<text x="{margin - 6}" y="{sy(y_lo):.2f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_lo:.3f}</text>',
        f'<text x="{margin - 6}" y="{sy(y_hi):.2f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_hi:.3f}</text>',
    ]
    for idx, (name, points) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        runs, current = [], []
        for x, y in points:
            if y is None:
                if current:
                    runs.append(current)
                current = []
            else:
                current.append((sx(x), sy(y)))
        if current:
            runs.append(current)
        for run in runs:
            coords = " ".join(f"{px:.2f},{py:.2f}" for px, py in run)
            parts.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            for px, py in run:
                parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.5" '
                             f'fill="{color}"/>')
        label = name if runs else f"{name} (flat, no ratio)"
        parts.append(f'<text x="{width - margin + 4}" y="{margin + 14 * idx}" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{color}" text-anchor="end">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# -- simulate ---------------------------------------------------------------

SCENE_NAMES = ("real", "print", "replay", "rotated")


def _build_scene(name: str, s: Settings):
    if name == "real":
        return geometry.RealSceneConfig(f=s.get("f"), z=s.get("z"),
                                        d1=s.get("d1"), d2=s.get("d2"),
                                        dx=s.get("dx"))
    common = dict(fa=s.get("fa"), fb=s.get("fb"), za=s.get("za"),
                  zb=s.get("zb"), d1=s.get("d1"), d2=s.get("d2"))
    if name == "print":
        return geometry.AttackSceneConfig(dx=0.0, **common)
    if name == "replay":
        return geometry.AttackSceneConfig(dx=s.get("dx"), **common)
    if name == "rotated":
        return geometry.AttackSceneConfig(dx=s.get("dx"), theta=s.get("theta"),
                                          ul1=s.get("ul1"), um1=s.get("um1"),
                                          ur1=s.get("ur1"), **common)
    raise UsageError(f"unknown scene type {name!r}; choose from {SCENE_NAMES}")


def cmd_simulate(args: argparse.Namespace) -> int:
    s = Settings(args)
    frames = s.get("frames")
    if frames < 2:
        raise UsageError(f"--frames must be at least 2, got {frames}")
    scenes = s.get("scenes")
    for name in scenes:
        if name not in SCENE_NAMES:
            raise UsageError(f"unknown scene type {name!r}; choose from {SCENE_NAMES}")
    schedule = list(itertools.islice(itertools.cycle(s.get("dv_schedule")),
                                     frames - 1))
    out_dir = Path(s.get("out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    results = {}
    for name in scenes:
        cfg = _build_scene(name, s)
        per_scene_schedule = schedule if name in ("print", "replay") else None
        try:
            results[name] = geometry.simulate_sequence(cfg, frames,
                                                       per_scene_schedule)
        except ValueError as exc:
            raise DataError(f"scene {name!r} cannot be simulated: {exc}")

    csv_path = out_dir / "simulation.csv"
    geometry.write_sweep_csv(csv_path, results)
    series = {
        name: [(rec.frame, rec.estimate.ratio) for rec in records]
        for name, records in results.items()
    }
    svg_path = out_dir / "simulation.svg"
    svg_line_plot(svg_path, series, "Estimated relative depth per frame",
                  "frame", "estimated d1/d2")
    print(f"wrote {csv_path}")
    print(f"wrote {svg_path}")
    return 0


# -- demo ---------------------------------------------------------------------

DEMO_SURFACE = {"amplitude": 8.0, "center": (16.0, 16.0), "radius": 12.0,
                "grid_size": 65}
DEMO_REDUCE_CHANNELS = 16
DEMO_FUSE_CHANNELS = 32


def _demo_frames(base: np.ndarray, n_frames: int) -> list[np.ndarray]:
    """Three-channel frame stack; motion is a vertical roll per frame."""
    channels = [base * scale for scale in (0.5, 0.75, 1.0)]
    frames = []
    for t in range(n_frames):
        rolled = [np.roll(c, t, axis=0) for c in channels]
        frames.append(np.stack(rolled, axis=2))
    return frames


def run_demo(alpha: float, beta: float, frames: int, seed: int,
             oracle: bool) -> dict:
    if frames < 2:
        raise UsageError(f"--frames must be at least 2, got {frames}")
    if not 0.0 <= alpha <= 1.0 or not 0.0 <= beta <= 1.0:
        raise UsageError("alpha and beta must lie in [0, 1]")
    n_steps = frames - 1
    grid = depthlabel.GRID_SIZE

    surface = depthlabel.synthesize_face_surface(**DEMO_SURFACE)
    living_label = depthlabel.generate_living_depth(surface)
    spoof_label = depthlabel.spoof_depth(grid)
    mask = depthlabel.mask_from_depth(living_label)
    masks = [mask] * n_steps
    labels = {"living": [living_label.values] * n_steps,
              "spoof": [spoof_label.values] * n_steps}

    if oracle:
        head = BinaryHead.zeroed(n_steps * grid * grid)
        fused = {"living": labels["living"], "spoof": labels["spoof"]}
    else:
        head = BinaryHead.seeded(n_steps * grid * grid, seed=seed + 3)
        off_weights = OffBlockWeights.seeded(
            3, reduce_channels=DEMO_REDUCE_CHANNELS,
            out_channels=DEMO_FUSE_CHANNELS, seed=seed + 1)
        cell = ConvGruCell.seeded(input_channels=DEMO_FUSE_CHANNELS,
                                  hidden_channels=1, scale=0.1, seed=seed + 2)
        single_kernel = (np.random.default_rng(seed)
                         .standard_normal((1, 1, 3, 1)))
        # A planar ramp stands in for the flat printed texture.
        ramp = np.tile(np.linspace(0.0, 1.0, grid)[:, None], (1, grid))
        bases = {"living": living_label.values, "spoof": ramp}
        fused = {}
        for kind, base in bases.items():
            frame_stack = _demo_frames(base, frames)
            single = [1.0 / (1.0 + np.exp(-conv2d(f, single_kernel)[:, :, 0]))
                      for f in frame_stack]
            motion = [off_block(frame_stack[t], frame_stack[t + 1], None,
                                off_weights) for t in range(n_steps)]
            states = convgru_run(cell, np.zeros((grid, grid, 1)), motion)
            fused[kind] = [fuse_depth(single[t + 1], states[t][:, :, 0], alpha)
                           for t in range(n_steps)]

    reports, scores, b_hats, depth_terms = {}, {}, {}, {}
    for kind, binary_label in (("living", 1), ("spoof", 0)):
        report, b_hat = multi_frame_report(fused[kind], labels[kind], head,
                                           binary_label, beta)
        reports[kind] = report
        b_hats[kind] = b_hat
        depth_terms[kind] = metrics.masked_depth_term(fused[kind], masks)
        scores[kind] = metrics.living_score(b_hat, fused[kind], masks, beta)

    result = {
        "command": "demo",
        "seed": seed,
        "oracle": oracle,
        "params": {"alpha": alpha, "beta": beta, "frames": frames,
                   "grid": grid, "reduce_channels": DEMO_REDUCE_CHANNELS,
                   "fuse_channels": DEMO_FUSE_CHANNELS,
                   "surface": {"amplitude": DEMO_SURFACE["amplitude"],
                               "center": list(DEMO_SURFACE["center"]),
                               "radius": DEMO_SURFACE["radius"],
                               "grid_size": DEMO_SURFACE["grid_size"]}},
    }
    for kind in ("living", "spoof"):
        result[kind] = {"losses": reports[kind].as_dict(),
                        "b_hat": b_hats[kind],
                        "depth_term": depth_terms[kind],
                        "score": scores[kind]}
    result["score_gap"] = scores["living"] - scores["spoof"]
    if oracle:
        result["oracle_gap_ok"] = bool(result["score_gap"]
                                       >= 0.5 * (1.0 - beta))
    return result


def cmd_demo(args: argparse.Namespace) -> int:
    s = Settings(args)
    oracle = bool(getattr(args, "oracle", False)) or s.get("oracle")
    report = run_demo(alpha=s.get("alpha"), beta=s.get("beta"),
                      frames=s.get("frames"), seed=s.get("seed"),
                      oracle=oracle)
    out_dir = Path(s.get("out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "demo.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    print(f"wrote {path}")
    print(f"living score {report['living']['score']:.6f}, "
          f"spoof score {report['spoof']['score']:.6f}, "
          f"gap {report['score_gap']:.6f}")
    if oracle and not report["oracle_gap_ok"]:
        raise DataError("oracle-injected score gap fell below 0.5 * (1 - beta)")
    return 0


# -- metrics -----------------------------------------------------------------

def cmd_metrics(args: argparse.Namespace) -> int:
    s = Settings(args)
    try:
        records = metrics.read_records_csv(args.records)
    except OSError as exc:
        raise DataError(f"cannot read records file: {exc}")
    except ValueError as exc:
        raise DataError(f"bad records file {args.records}: {exc}")
    try:
        summary = metrics.metrics_summary(records, s.get("threshold"))
    except ValueError as exc:
        raise DataError(str(exc))
    out_dir = Path(s.get("out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "metrics.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    print(f"wrote {path}", file=sys.stderr)
    return 0


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthpad",
        description="Temporal-depth anti-spoofing numerics: scene sweeps, "
                    "a synthetic pipeline demo, and PAD metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value settings file")
        p.add_argument("--seed", type=int, help="deterministic seed")
        p.add_argument("--out", help="output directory (default .)")

    p_sim = sub.add_parser("simulate", help="camera-geometry scene sweep")
    common(p_sim)
    p_sim.add_argument("--frames", type=int, help="frames per scene (>= 2)")
    p_sim.set_defaults(func=cmd_simulate)

    p_demo = sub.add_parser("demo", help="synthetic end-to-end pipeline demo")
    common(p_demo)
    p_demo.add_argument("--frames", type=int, help="frames N_f (>= 2)")
    p_demo.add_argument("--alpha", type=float,
                        help="single-frame weight in depth fusion")
    p_demo.add_argument("--beta", type=float,
                        help="binary weight in losses and score")
    p_demo.add_argument("--oracle", action="store_true", default=None,
                        help="inject ground-truth depth maps and a zeroed head")
    p_demo.set_defaults(func=cmd_demo)

    p_met = sub.add_parser("metrics", help="PAD metrics from a records CSV")
    common(p_met)
    p_met.add_argument("records", help="CSV with columns score,label,attack_kind")
    p_met.add_argument("--threshold", type=float,
                       help="acceptance threshold on the score")
    p_met.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


def cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli()
