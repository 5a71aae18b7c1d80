"""Shared fixtures and an independent adapter-file builder.

The builder here writes the safetensors layout by hand, on purpose: load
tests must not depend on the package's own writer being correct.
"""

from __future__ import annotations

import json
import struct
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def encode_values(arr: np.ndarray, dtype: str) -> bytes:
    """Row-major little-endian element bytes for one tensor."""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if dtype == "F32":
        return arr.astype("<f4").tobytes()
    if dtype == "F16":
        return arr.astype("<f2").tobytes()
    if dtype == "BF16":
        bits = np.ascontiguousarray(arr, dtype=np.float32).view(np.uint32)
        rounded = (bits + 0x7FFF + ((bits >> 16) & 1)) >> 16
        return rounded.astype("<u2").tobytes()
    raise ValueError(f"unknown dtype {dtype}")


def build_container_bytes(
    entries: dict[str, tuple[str, tuple[int, ...], bytes]],
    metadata: dict[str, str] | None = None,
    order: list[str] | None = None,
) -> bytes:
    """entries: name -> (dtype, shape, raw_bytes); offsets follow `order`
    (default: sorted names, matching the writer convention)."""
    names = order if order is not None else sorted(entries)
    header: dict[str, object] = {}
    if metadata is not None:
        header["__metadata__"] = metadata
    chunks = []
    offset = 0
    for name in names:
        dtype, shape, raw = entries[name]
        header[name] = {
            "dtype": dtype,
            "shape": list(shape),
            "data_offsets": [offset, offset + len(raw)],
        }
        chunks.append(raw)
        offset += len(raw)
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    return struct.pack("<Q", len(blob)) + blob + b"".join(chunks)


def write_container(path, entries, metadata=None, order=None) -> None:
    path.write_bytes(build_container_bytes(entries, metadata, order))


def tensor_entry(arr: np.ndarray, dtype: str = "F32"):
    arr = np.asarray(arr, dtype=np.float64)
    return (dtype, tuple(arr.shape), encode_values(arr, dtype))


def lora_entries(
    rng: np.random.Generator,
    layer_shapes: list[tuple[str, int, int, int]],
    dialect: str = "down_up",
    alpha: float | None = None,
    dtype: str = "F32",
    scale: float = 1.0,
) -> dict:
    """Adapter entries for (key, m, n, r) layer shapes, one naming dialect."""
    down_sfx, up_sfx = {
        "down_up": (".lora_down.weight", ".lora_up.weight"),
        "ab": (".lora_A.weight", ".lora_B.weight"),
    }[dialect]
    entries = {}
    for key, m, n, r in layer_shapes:
        entries[key + down_sfx] = tensor_entry(
            scale * rng.standard_normal((r, n)), dtype
        )
        entries[key + up_sfx] = tensor_entry(
            scale * rng.standard_normal((m, r)), dtype
        )
        if alpha is not None:
            entries[key + ".alpha"] = tensor_entry(np.asarray(alpha), dtype)
    return entries


def write_pair(
    tmp_path,
    seed: int,
    layer_shapes: list[tuple[str, int, int, int]],
    alpha: float | None = None,
    dtype: str = "F32",
):
    """A (content, style) adapter file pair over the same layer set."""
    rng = np.random.default_rng(seed)
    content = tmp_path / "content.safetensors"
    style = tmp_path / "style.safetensors"
    write_container(content, lora_entries(rng, layer_shapes, alpha=alpha, dtype=dtype))
    write_container(style, lora_entries(rng, layer_shapes, alpha=alpha, dtype=dtype))
    return content, style


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def make_reports(keys, e_content, e_style):
    from estlora.energy import LayerEnergyReport

    return [
        LayerEnergyReport(key=k, e_content=float(c), e_style=float(s))
        for k, c, s in zip(keys, e_content, e_style)
    ]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # One line per acceptance criterion, printed after the dot output so the
    # verdicts survive pytest's stdout capture.
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.line(line)
