"""Command-line entry point: ``byzcent run | verify | gen-instance``.

Exit codes: 0 success, 2 configuration error, 3 property violation,
4 runtime integrity error. Log verbosity comes from ``BYZCENT_LOG_LEVEL``.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import __version__
from .aggregators import AGGREGATORS, AggregationIntegrityError
from .attacks import ATTACK_KINDS, AttackError, AttackSpec
from .dataio import DataFormatError, Dataset, load_csv, load_idx, synth_blobs
from .evaluation import (
    InstanceError,
    format_ratio,
    gen_box_lb_instance,
    gen_convex_lb_instance,
    gen_random_instance,
    write_layout_file,
)
from .flsim import SCHEMES, PartitionError, RoundRecord, TrainConfig, TrainingError, iter_training, run_metadata
from .flsim.training import MODES
from .verify import SUITES, run_suites

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3
EXIT_INTEGRITY = 4

CSV_COLUMNS = ("round", "accuracy", "loss", "rad_cov", "nonfaulty_diameter", "approx_ratio", "elapsed_ms")

log = logging.getLogger("byzcent")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {raw!r}")


def _parse_floats(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.split(","))


def _parse_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.split(",") if v.strip())


def _enum(*choices: str) -> Callable[[str], str]:
    def parse(raw: str) -> str:
        if raw not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}, got {raw!r}")
        return raw

    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None


SCHEMA: dict[str, Key] = {
    "dataset.type": Key(_enum("idx", "csv", "synth")),
    "dataset.train_images": Key(str),
    "dataset.train_labels": Key(str),
    "dataset.test_images": Key(str),
    "dataset.test_labels": Key(str),
    "dataset.path": Key(str),
    "dataset.test_path": Key(str),
    "dataset.class_count": Key(int, 10),
    "dataset.test_fraction": Key(float, 0.2),
    "dataset.synth_d": Key(int, 20),
    "dataset.synth_classes": Key(int, 4),
    "dataset.synth_per_class": Key(int, 100),
    "dataset.synth_spread": Key(float, 1.0),
    "clients.n": Key(int, 10),
    "clients.t": Key(int, 3),
    "attack.kind": Key(_enum(*ATTACK_KINDS), "none"),
    "attack.f": Key(int, 0),
    "attack.value": Key(_parse_floats),
    "attack.sigma": Key(float, 1.0),
    "attack.direction": Key(_parse_floats),
    "attack.magnitude": Key(float, 1.0),
    "aggregator.name": Key(_enum(*sorted(AGGREGATORS)), "mda"),
    "aggregator.eps": Key(float, 1e-4),
    "training.mode": Key(_enum(*MODES), "fedsgd"),
    "training.rounds": Key(int, 100),
    "training.lr": Key(float, 0.01),
    "training.local_steps": Key(int, 1),
    "training.batch_size": Key(int, 32),
    "training.metrics": Key(_parse_bool, True),
    "partition.scheme": Key(_enum(*SCHEMES), "homogeneous"),
    "model.hidden": Key(_parse_ints, (32, 16)),
    "seed": Key(int, 0),
    "output.csv_path": Key(str, "run.csv"),
    "output.svg_path": Key(str),
}

REQUIRED_BY_DATASET = {
    "idx": ("dataset.train_images", "dataset.train_labels"),
    "csv": ("dataset.path",),
    "synth": (),
}


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines against :data:`SCHEMA`; ``#`` starts a comment line.

    Path values are kept as written; :func:`resolve_path` anchors them.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {s!r}")
        key, value = (part.strip() for part in s.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    if "dataset.type" not in raw:
        raise ConfigError("missing required key 'dataset.type'")

    cfg: dict[str, Any] = {}
    for key, spec in SCHEMA.items():
        if key not in raw:
            cfg[key] = spec.default
            continue
        try:
            value = spec.parse(raw[key])
        except ValueError as exc:
            if key == "aggregator.name":
                raise ConfigError(
                    f"unknown aggregator {raw[key]!r}; valid names: {', '.join(sorted(AGGREGATORS))}"
                ) from None
            raise ConfigError(f"{key}: {exc}") from None
        cfg[key] = value
    for key in REQUIRED_BY_DATASET[cfg["dataset.type"]]:
        if cfg[key] is None:
            raise ConfigError(f"dataset.type = {cfg['dataset.type']} requires {key!r}")
    return cfg


def load_config(path) -> tuple[dict[str, Any], Path]:
    """Parsed config and the directory its relative paths are anchored to."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text), path.parent


def resolve_path(base_dir: Path, value: Optional[str]) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base_dir / p


def config_hash(cfg: dict[str, Any]) -> str:
    """Hash of every setting that can change the results (output paths excluded)."""
    keys = sorted(k for k in cfg if not k.startswith("output."))
    canon = "\n".join(f"{k}={cfg[k]!r}" for k in keys)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_train_config(cfg: dict[str, Any]) -> TrainConfig:
    try:
        attack = AttackSpec(
            kind=cfg["attack.kind"],
            f=cfg["attack.f"],
            value=cfg["attack.value"],
            sigma=cfg["attack.sigma"],
            direction=cfg["attack.direction"],
            magnitude=cfg["attack.magnitude"],
        )
        return TrainConfig(
            mode=cfg["training.mode"],
            rounds=cfg["training.rounds"],
            lr=cfg["training.lr"],
            n=cfg["clients.n"],
            t=cfg["clients.t"],
            aggregator=cfg["aggregator.name"],
            eps=cfg["aggregator.eps"],
            attack=attack,
            partition=cfg["partition.scheme"],
            local_steps=cfg["training.local_steps"],
            batch_size=cfg["training.batch_size"],
            seed=cfg["seed"],
            hidden=cfg["model.hidden"],
            track_metrics=cfg["training.metrics"],
        )
    except (AttackError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_datasets(cfg: dict[str, Any], base_dir: Path = Path(".")) -> tuple[Dataset, Dataset]:
    kind = cfg["dataset.type"]
    classes = cfg["dataset.class_count"]

    def p(key):
        return resolve_path(base_dir, cfg[key])

    if kind == "idx":
        train = load_idx(p("dataset.train_images"), p("dataset.train_labels"), classes)
        if cfg["dataset.test_images"] and cfg["dataset.test_labels"]:
            return train, load_idx(p("dataset.test_images"), p("dataset.test_labels"), classes)
        return train.split(cfg["dataset.test_fraction"], cfg["seed"])
    if kind == "csv":
        train = load_csv(p("dataset.path"), classes)
        if cfg["dataset.test_path"]:
            return train, load_csv(p("dataset.test_path"), classes)
        return train.split(cfg["dataset.test_fraction"], cfg["seed"])
    data = synth_blobs(
        cfg["dataset.synth_d"], cfg["dataset.synth_classes"], cfg["dataset.synth_per_class"], cfg["dataset.synth_spread"], cfg["seed"]
    )
    return data.split(cfg["dataset.test_fraction"], cfg["seed"])


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------


def format_row(rec: RoundRecord) -> str:
    return ",".join(
        [
            str(rec.round),
            repr(rec.accuracy),
            repr(rec.loss),
            repr(rec.rad_cov),
            repr(rec.nonfaulty_diameter),
            format_ratio(rec.approx_ratio),
            f"{rec.elapsed_ms:.3f}",
        ]
    )


def csv_header(cfg: dict[str, Any], train_cfg: TrainConfig) -> list[str]:
    lines = [f"# byzcent {__version__}", f"# config_hash={config_hash(cfg)}", f"# seed={cfg['seed']}"]
    lines += [f"# config {k}={cfg[k]!r}" for k in sorted(cfg)]
    lines += [f"# decision {k}={v}" for k, v in run_metadata(train_cfg).items()]
    lines.append(",".join(CSV_COLUMNS))
    return lines


def render_svg(records: Sequence[RoundRecord], title: str = "") -> str:
    """Two polylines against round: accuracy (left scale) and rad_cov (right scale, normalized)."""
    w, h, pad = 640, 360, 48
    rounds = [r.round for r in records] or [1]
    x0, x1 = min(rounds), max(max(rounds), min(rounds) + 1)
    radii = [r.rad_cov for r in records if math.isfinite(r.rad_cov)]
    rmax = max(radii) if radii and max(radii) > 0 else 1.0

    def px(rd: float) -> float:
        return pad + (rd - x0) / (x1 - x0) * (w - 2 * pad)

    def py(frac: float) -> float:
        return h - pad - frac * (h - 2 * pad)

    acc_pts = " ".join(f"{px(r.round):.2f},{py(r.accuracy):.2f}" for r in records)
    rad_pts = " ".join(f"{px(r.round):.2f},{py(r.rad_cov / rmax):.2f}" for r in records if math.isfinite(r.rad_cov))
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
            f'<rect width="{w}" height="{h}" fill="white"/>',
            f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>',
            f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>',
            f'<text x="{w / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{title}</text>',
            f'<text x="{w / 2}" y="{h - 12}" text-anchor="middle" font-size="12">round ({x0} to {x1})</text>',
            f'<text x="{pad - 6}" y="{pad}" text-anchor="end" font-size="11">1.0</text>',
            f'<text x="{pad - 6}" y="{h - pad}" text-anchor="end" font-size="11">0</text>',
            f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{acc_pts}"/>',
            f'<polyline fill="none" stroke="#d62728" stroke-width="1.5" points="{rad_pts}"/>',
            f'<text x="{w - pad}" y="{pad - 8}" text-anchor="end" font-size="11" fill="#1f77b4">accuracy</text>',
            f'<text x="{w - pad}" y="{pad + 6}" text-anchor="end" font-size="11" fill="#d62728">'
            f"rad_cov / {rmax:.4g}</text>",
            "</svg>",
            "",
        ]
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_run(config_path, seed: Optional[int] = None, out: Optional[str] = None) -> int:
    try:
        cfg, base_dir = load_config(config_path)
        if seed is not None:
            cfg["seed"] = seed
        train_cfg = build_train_config(cfg)
        train, test = load_datasets(cfg, base_dir)
    except (ConfigError, DataFormatError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    csv_path = Path(out) if out is not None else resolve_path(base_dir, cfg["output.csv_path"])
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    records: list[RoundRecord] = []
    status = EXIT_OK
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(csv_header(cfg, train_cfg)) + "\n")
        try:
            for rec in iter_training(train_cfg, train, test):
                records.append(rec)
                fh.write(format_row(rec) + "\n")
                fh.flush()
                log.info("round %d accuracy %.4f rad_cov %.4g", rec.round, rec.accuracy, rec.rad_cov)
        except PartitionError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            status = EXIT_CONFIG
        except TrainingError as exc:
            cause = exc.__cause__
            kind = "integrity error" if isinstance(cause, AggregationIntegrityError) else "runtime error"
            print(f"{kind}: {exc}", file=sys.stderr)
            status = EXIT_INTEGRITY
    if cfg["output.svg_path"] and records:
        title = f"{train_cfg.mode} {train_cfg.aggregator} {train_cfg.attack.kind} f={train_cfg.attack.f}"
        resolve_path(base_dir, cfg["output.svg_path"]).write_text(render_svg(records, title), encoding="utf-8")
    if status == EXIT_OK:
        print(f"wrote {len(records)} rounds to {csv_path}")
    return status


def cmd_verify(suite: str, seed: int = 0, trials: int = 100, out: Optional[str] = None) -> int:
    if suite not in SUITES + ("all",):
        print(f"config error: unknown suite {suite!r}; valid suites: {', '.join(SUITES + ('all',))}", file=sys.stderr)
        return EXIT_CONFIG
    if trials < 1:
        print("config error: --trials must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    reports = run_suites(suite, seed, trials)
    text = "\n".join(line for r in reports for line in r.lines()) + "\n"
    print(text, end="")
    if out:
        Path(out).write_text(text, encoding="utf-8")
    return EXIT_OK if all(r.ok for r in reports) else EXIT_VIOLATION


def cmd_gen_instance(kind: str, n: int, t: int, d: int, out: str, seed: int = 0, x: float = 1.0, eps: float = 1.0) -> int:
    try:
        if kind == "box_lb":
            layout, truth = gen_box_lb_instance(n, t, d, x)
        elif kind == "convex_lb":
            layout, truth = gen_convex_lb_instance(n, t, d, eps)
        elif kind == "random":
            layout, truth = gen_random_instance(n, t, d, seed)
        else:
            raise InstanceError(f"unknown instance kind {kind!r}; valid kinds: box_lb, convex_lb, random")
    except (InstanceError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_layout_file(out, layout, truth)
    print(f"wrote {kind} layout (n={n}, t={t}, d={d}, m={layout.m}) to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="byzcent", description="Byzantine-tolerant centroid aggregation toolkit")
    ap.add_argument("--version", action="version", version=f"byzcent {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train with a config file and write per-round CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--out", help="override output.csv_path")

    ver = sub.add_parser("verify", help="run randomized property suites")
    ver.add_argument("suite", nargs="?", default="all", help=f"one of {', '.join(SUITES)}, all")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--trials", type=int, default=100)
    ver.add_argument("--out", help="also write the report to this file")

    gen = sub.add_parser("gen-instance", help="write a layout file")
    gen.add_argument("kind", choices=("box_lb", "convex_lb", "random"))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--t", type=int, required=True)
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--x", type=float, default=1.0, help="box_lb coordinate scale")
    gen.add_argument("--eps", type=float, default=1.0, help="convex_lb offset")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("BYZCENT_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.seed, args.out)
    if args.command == "verify":
        return cmd_verify(args.suite, args.seed, args.trials, args.out)
    return cmd_gen_instance(args.kind, args.n, args.t, args.d, args.out, args.seed, args.x, args.eps)


if __name__ == "__main__":
    sys.exit(main())
