"""Schedule rendering, summary statistics, and per-step adapter baking."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .adapter_io import AlignedPair, LoraAdapter, write_adapter
from .errors import InputError
from .gate import STYLE, SUBJECT, SelectionSchedule, schedule_digest
from .jsonio import atomic_write_bytes, atomic_write_text, dumps

_PGM_STYLE = 0
_PGM_SUBJECT = 255


@dataclass(frozen=True)
class ScheduleStats:
    per_step_style_fraction: tuple[float, ...]
    overall_style_fraction: float
    per_layer_onset: dict[str, int | None]  # None encodes "never"


def heatmap_bytes(schedule: SelectionSchedule) -> bytes:
    """Binary PGM: width L, height T, 0 = style, 255 = subject.

    Row 0 is the first denoising step.
    """
    height, width = schedule.choices.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    pixels = np.where(schedule.choices == SUBJECT, _PGM_SUBJECT, _PGM_STYLE)
    return header + pixels.astype(np.uint8).tobytes()


def render_heatmap(schedule: SelectionSchedule, path: str) -> None:
    atomic_write_bytes(path, heatmap_bytes(schedule))


def parse_heatmap(data: bytes) -> np.ndarray:
    """Invert heatmap_bytes back into a (T, L) choice matrix."""
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise InputError("not a P5 heatmap produced by this package")
    dims = parts[1].split()
    if len(dims) != 2:
        raise InputError(f"bad PGM dimension line {parts[1]!r}")
    try:
        width, height = int(dims[0]), int(dims[1])
    except ValueError:
        raise InputError(f"bad PGM dimension line {parts[1]!r}") from None
    payload = parts[3]
    if len(payload) != width * height:
        raise InputError(
            f"PGM payload is {len(payload)} bytes, expected {width * height}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    bad = ~np.isin(pixels, (_PGM_STYLE, _PGM_SUBJECT))
    if bad.any():
        raise InputError("PGM contains pixel values other than 0 and 255")
    return np.where(pixels == _PGM_SUBJECT, SUBJECT, STYLE).astype(np.int8)


def stats(schedule: SelectionSchedule) -> ScheduleStats:
    style_mask = schedule.choices == STYLE
    per_step = tuple(float(v) for v in style_mask.mean(axis=1))
    overall = float(np.mean(np.asarray(per_step)))
    onsets: dict[str, int | None] = {}
    any_style = style_mask.any(axis=0)
    first_style = style_mask.argmax(axis=0)
    for j, key in enumerate(schedule.ordered_keys):
        onsets[key] = int(first_style[j]) if any_style[j] else None
    return ScheduleStats(
        per_step_style_fraction=per_step,
        overall_style_fraction=overall,
        per_layer_onset=onsets,
    )


def stats_to_obj(s: ScheduleStats) -> dict:
    return {
        "per_step_style_fraction": list(s.per_step_style_fraction),
        "overall_style_fraction": s.overall_style_fraction,
        "per_layer_onset": {
            key: ("never" if step is None else step)
            for key, step in s.per_layer_onset.items()
        },
    }


def _check_pair_matches(pair: AlignedPair, schedule: SelectionSchedule) -> None:
    if pair.ordered_keys != schedule.ordered_keys:
        raise InputError(
            "schedule layer keys do not match the aligned adapter pair; "
            f"schedule has {len(schedule.ordered_keys)} keys, "
            f"pair has {len(pair.ordered_keys)}"
        )


def bake(pair: AlignedPair, schedule: SelectionSchedule, step_index: int) -> LoraAdapter:
    """Adapter for one step: each layer's tensors bit-copied from the
    selected source. No arithmetic blending."""
    _check_pair_matches(pair, schedule)
    if not 0 <= step_index < schedule.steps:
        raise InputError(
            f"step {step_index} out of range for {schedule.steps} steps"
        )
    row = schedule.choices[step_index]
    layers = {}
    for j, key in enumerate(schedule.ordered_keys):
        source = pair.content if row[j] == SUBJECT else pair.style
        layers[key] = source.layers[key]
    return LoraAdapter(
        layers=layers,
        source_path="",
        role_tag="merged",
        passthrough={},
        metadata=None,
    )


def bake_all(
    pair: AlignedPair,
    schedule: SelectionSchedule,
    out_dir: str,
    force: bool = False,
) -> dict:
    """One adapter per step plus a manifest, written into out_dir."""
    _check_pair_matches(pair, schedule)
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not force:
        raise InputError(f"output directory {out_dir!r} is not empty (use force)")
    os.makedirs(out_dir, exist_ok=True)
    files = []
    digests = []
    for i in range(schedule.steps):
        name = f"step_{i}.safetensors"
        path = os.path.join(out_dir, name)
        write_adapter(bake(pair, schedule, i), path)
        with open(path, "rb") as fh:
            digests.append(hashlib.sha256(fh.read()).hexdigest())
        files.append(name)
    manifest = {
        "steps": schedule.steps,
        "files": files,
        "sha256": digests,
        "schedule_digest": schedule_digest(schedule),
    }
    atomic_write_text(os.path.join(out_dir, "manifest.json"), dumps(manifest))
    return manifest
