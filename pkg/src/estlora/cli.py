"""Command-line front-end.

Subcommands: analyze, discrepancy, plan, render, stats, bake, bake-all.
Settings can come from a TOML config file ([gate] and [io] tables);
command-line flags always win. Exit codes: 0 success, 2 bad input,
3 I/O failure. Output files are written atomically, so a failed run
never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

from . import adapter_io, energy, gate, schedule_export, style_discrepancy
from .errors import InputError
from .jsonio import atomic_write_text, dumps

log = logging.getLogger(__name__)

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_GATE_KEYS = {"alpha", "steps", "d", "selector", "k_fraction", "w_content", "w_style"}
_IO_KEYS = {"content", "style", "out", "schedule", "out_dir", "csv"}


def _setup_logging() -> None:
    name = os.environ.get("EST_LORA_LOG", "warn").lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        print(
            f"warning: unknown EST_LORA_LOG value {name!r}, using 'warn'",
            file=sys.stderr,
        )
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise InputError(f"{path}: no such config file") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: malformed TOML: {exc}") from None
    for section, allowed in (("gate", _GATE_KEYS), ("io", _IO_KEYS)):
        table = cfg.get(section, {})
        if not isinstance(table, dict):
            raise InputError(f"{path}: [{section}] must be a table")
        unknown = set(table) - allowed
        if unknown:
            raise InputError(f"{path}: unknown [{section}] keys: {sorted(unknown)}")
    extra = set(cfg) - {"gate", "io"}
    if extra:
        raise InputError(f"{path}: unknown config sections: {sorted(extra)}")
    return cfg


def _pick(flag_value, cfg: dict, section: str, key: str, default=None):
    if flag_value is not None:
        return flag_value
    table = cfg.get(section, {})
    if key in table:
        return table[key]
    return default


def _require(value, flag: str):
    if value is None:
        raise InputError(f"missing required {flag}")
    return value


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        print(text)
    else:
        atomic_write_text(out_path, text)


def _load_pair(content_path: str, style_path: str) -> adapter_io.AlignedPair:
    content = adapter_io.load_adapter(content_path, role="content")
    style = adapter_io.load_adapter(style_path, role="style")
    return adapter_io.align(content, style)


def _read_schedule(path: str) -> gate.SelectionSchedule:
    with open(path, "r", encoding="utf-8") as fh:
        return gate.schedule_from_json(fh.read())


def _resolve_d(args, cfg: dict) -> float:
    has_emb = args.style_emb is not None or args.content_emb is not None
    if args.d is not None and has_emb:
        raise InputError("--d conflicts with --style-emb/--content-emb")
    if has_emb:
        if args.style_emb is None or args.content_emb is None:
            raise InputError("--style-emb and --content-emb must be given together")
        score = style_discrepancy.discrepancy(
            style_discrepancy.load_embedding(args.style_emb),
            style_discrepancy.load_embedding(args.content_emb),
        )
        return score.d
    d = _pick(args.d, cfg, "gate", "d", 0.5)
    d = float(d)
    if not 0.0 <= d <= 1.0:
        raise InputError(f"--d must be in [0, 1], got {d}")
    return d


def _gate_config(args, cfg: dict, d: float) -> gate.GateConfig:
    kwargs = {
        "alpha": float(_pick(args.alpha, cfg, "gate", "alpha", 1.5)),
        "steps": int(_pick(args.steps, cfg, "gate", "steps", 50)),
        "d_score": d,
        "selector": _pick(args.selector, cfg, "gate", "selector", "est"),
        "k_fraction": float(_pick(args.k_fraction, cfg, "gate", "k_fraction", 0.1)),
        "direct_weights": (
            float(_pick(args.w_content, cfg, "gate", "w_content", 0.5)),
            float(_pick(args.w_style, cfg, "gate", "w_style", 0.5)),
        ),
    }
    return gate.GateConfig(**kwargs)


def _cmd_analyze(args, cfg: dict) -> int:
    content = _require(_pick(args.content, cfg, "io", "content"), "--content")
    style = _require(_pick(args.style, cfg, "io", "style"), "--style")
    pair = _load_pair(content, style)
    reports = energy.energy_report(pair, method=args.method)
    _emit(energy.report_to_json(reports), _pick(args.out, cfg, "io", "out"))
    return 0


def _cmd_discrepancy(args, cfg: dict) -> int:
    if args.d is not None:
        if args.style_emb is not None or args.content_emb is not None:
            raise InputError("--d conflicts with --style-emb/--content-emb")
        d = float(args.d)
        if not 0.0 <= d <= 1.0:
            raise InputError(f"--d must be in [0, 1], got {d}")
        obj = {"d": d, "raw_sq_distance": 4.0 * (1.0 - d)}
    else:
        if args.style_emb is None or args.content_emb is None:
            raise InputError("need --style-emb and --content-emb, or --d")
        score = style_discrepancy.discrepancy(
            style_discrepancy.load_embedding(args.style_emb),
            style_discrepancy.load_embedding(args.content_emb),
        )
        obj = {"d": score.d, "raw_sq_distance": score.raw_sq_distance}
    print(dumps(obj))
    return 0


def _cmd_plan(args, cfg: dict) -> int:
    content = _require(_pick(args.content, cfg, "io", "content"), "--content")
    style = _require(_pick(args.style, cfg, "io", "style"), "--style")
    pair = _load_pair(content, style)
    config = _gate_config(args, cfg, _resolve_d(args, cfg))
    reports = energy.energy_report(pair)
    out_path = _pick(args.out, cfg, "io", "out")
    csv_path = _pick(args.csv, cfg, "io", "csv")
    if config.selector == "est":
        schedule = gate.plan(pair, reports, config)
    else:
        schedule = gate.plan_baseline(pair, reports, config)
    if isinstance(schedule, gate.MergePlan):
        if csv_path is not None:
            raise InputError("direct_merge produces no schedule CSV")
        _emit(dumps(gate.merge_plan_to_obj(schedule)), out_path)
        return 0
    _emit(gate.schedule_to_json(schedule), out_path)
    if csv_path is not None:
        atomic_write_text(csv_path, gate.schedule_to_csv(schedule))
    return 0


def _cmd_render(args, cfg: dict) -> int:
    schedule = _read_schedule(_require(_pick(args.schedule, cfg, "io", "schedule"), "--schedule"))
    out = _require(_pick(args.out, cfg, "io", "out"), "--out")
    schedule_export.render_heatmap(schedule, out)
    return 0


def _cmd_stats(args, cfg: dict) -> int:
    schedule = _read_schedule(_require(_pick(args.schedule, cfg, "io", "schedule"), "--schedule"))
    stats = schedule_export.stats(schedule)
    _emit(dumps(schedule_export.stats_to_obj(stats)), _pick(args.out, cfg, "io", "out"))
    return 0


def _cmd_bake(args, cfg: dict) -> int:
    content = _require(_pick(args.content, cfg, "io", "content"), "--content")
    style = _require(_pick(args.style, cfg, "io", "style"), "--style")
    pair = _load_pair(content, style)
    schedule = _read_schedule(_require(_pick(args.schedule, cfg, "io", "schedule"), "--schedule"))
    out = _require(_pick(args.out, cfg, "io", "out"), "--out")
    baked = schedule_export.bake(pair, schedule, args.step)
    adapter_io.write_adapter(baked, out)
    return 0


def _cmd_bake_all(args, cfg: dict) -> int:
    content = _require(_pick(args.content, cfg, "io", "content"), "--content")
    style = _require(_pick(args.style, cfg, "io", "style"), "--style")
    pair = _load_pair(content, style)
    schedule = _read_schedule(_require(_pick(args.schedule, cfg, "io", "schedule"), "--schedule"))
    out_dir = _require(_pick(args.out_dir, cfg, "io", "out_dir"), "--out-dir")
    manifest = schedule_export.bake_all(pair, schedule, out_dir, force=args.force)
    log.info("baked %d step adapters into %s", manifest["steps"], out_dir)
    return 0


def _add_pair_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--content", help="content (subject) adapter file")
    p.add_argument("--style", help="style adapter file")


def _add_gate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="time-term weight (default 1.5)")
    p.add_argument("--steps", type=int, help="denoising step count (default 50)")
    p.add_argument("--d", type=float, help="style similarity score in [0, 1]")
    p.add_argument("--style-emb", help="style embedding JSON (alternative to --d)")
    p.add_argument("--content-emb", help="content embedding JSON (alternative to --d)")
    p.add_argument(
        "--selector",
        choices=sorted(gate.SELECTORS),
        help="selection strategy (default est)",
    )
    p.add_argument("--k-fraction", type=float, help="top-k fraction for klora_like")
    p.add_argument("--w-content", type=float, help="content weight for direct_merge")
    p.add_argument("--w-style", type=float, help="style weight for direct_merge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="est-lora",
        description="Training-free LoRA fusion planner: per-layer, per-step "
        "selection between a subject and a style adapter.",
    )
    parser.add_argument("--config", help="TOML config file with [gate]/[io] tables")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="compute per-layer energies for a pair")
    _add_pair_flags(p)
    p.add_argument("--method", choices=("gram", "direct"), default="gram")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("discrepancy", help="style discrepancy score from embeddings")
    p.add_argument("--style-emb", help="style embedding JSON")
    p.add_argument("--content-emb", help="content embedding JSON")
    p.add_argument("--d", type=float, help="bypass embeddings with a fixed score")
    p.set_defaults(func=_cmd_discrepancy)

    p = sub.add_parser("plan", help="produce a selection schedule")
    _add_pair_flags(p)
    _add_gate_flags(p)
    p.add_argument("--out", help="schedule JSON path (default stdout)")
    p.add_argument("--csv", help="also write the schedule as CSV")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("render", help="render a schedule to a PGM heatmap")
    p.add_argument("--schedule", help="schedule JSON file")
    p.add_argument("--out", help="output PGM path")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("stats", help="summary statistics of a schedule")
    p.add_argument("--schedule", help="schedule JSON file")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("bake", help="write the merged adapter for one step")
    _add_pair_flags(p)
    p.add_argument("--schedule", help="schedule JSON file")
    p.add_argument("--step", type=int, required=True, help="step index")
    p.add_argument("--out", help="output adapter path")
    p.set_defaults(func=_cmd_bake)

    p = sub.add_parser("bake-all", help="write one adapter per step plus a manifest")
    _add_pair_flags(p)
    p.add_argument("--schedule", help="schedule JSON file")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--force", action="store_true", help="allow a non-empty directory")
    p.set_defaults(func=_cmd_bake_all)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
