"""LoRA adapter container I/O, factor pairing, and two-adapter alignment.

Adapters are stored in the safetensors container layout: an 8-byte
little-endian header length, a JSON header mapping tensor names to
``{"dtype", "shape", "data_offsets"}``, then one contiguous data buffer.
Raw tensor bytes are kept verbatim on every record so a load/write cycle
is bit-exact, including bf16 payloads that float64 widening would
otherwise launder.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import AdapterFormatError, AlignmentError
from .jsonio import atomic_write_bytes

log = logging.getLogger(__name__)

_DTYPE_NBYTES = {"F32": 4, "F16": 2, "BF16": 2}

# recognized factor-key dialects, tried in order
_DOWN_SUFFIXES = (".lora_down.weight", ".lora_A.weight")
_UP_SUFFIXES = (".lora_up.weight", ".lora_B.weight")
_ALPHA_SUFFIX = ".alpha"


@dataclass(frozen=True)
class TensorRecord:
    """One named tensor: dtype tag, shape, and its raw row-major bytes."""

    name: str
    dtype: str
    shape: tuple[int, ...]
    data: bytes

    def __post_init__(self) -> None:
        if self.dtype not in _DTYPE_NBYTES:
            raise AdapterFormatError(
                f"tensor {self.name!r}: unsupported dtype {self.dtype!r}"
            )
        expected = math.prod(self.shape) * _DTYPE_NBYTES[self.dtype]
        if expected != len(self.data):
            raise AdapterFormatError(
                f"tensor {self.name!r}: shape {self.shape} implies "
                f"{expected} bytes, buffer has {len(self.data)}"
            )

    def as_f64(self) -> np.ndarray:
        """Decode to float64, shape preserved."""
        if self.dtype == "F32":
            flat = np.frombuffer(self.data, dtype="<f4")
        elif self.dtype == "F16":
            flat = np.frombuffer(self.data, dtype="<f2")
        else:  # BF16: widen via the upper half of an f32 bit pattern
            bits = np.frombuffer(self.data, dtype="<u2").astype(np.uint32) << 16
            flat = bits.view(np.float32)
        return flat.astype(np.float64).reshape(self.shape)

    @classmethod
    def from_f64(cls, name: str, values: np.ndarray, dtype: str = "F32") -> "TensorRecord":
        """Encode a float64 array into a record (finite values only)."""
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if dtype == "F32":
            data = arr.astype("<f4").tobytes()
        elif dtype == "F16":
            data = arr.astype("<f2").tobytes()
        elif dtype == "BF16":
            bits = arr.astype(np.float32).view(np.uint32)
            # round to nearest even in the dropped half
            rounded = (bits + 0x7FFF + ((bits >> 16) & 1)) >> 16
            data = rounded.astype("<u2").tobytes()
        else:
            raise AdapterFormatError(f"unsupported dtype {dtype!r}")
        return cls(name=name, dtype=dtype, shape=tuple(arr.shape), data=data)


@dataclass(frozen=True)
class LoraLayer:
    """A paired low-rank factor set for one layer.

    ``down`` is the input-side factor A (r × n), ``up`` the output-side
    factor B (m × r); the effective update is (alpha / rank) · B · A.
    """

    key: str
    down: TensorRecord
    up: TensorRecord
    rank: int
    alpha: float
    alpha_record: TensorRecord | None = None

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    @property
    def delta_shape(self) -> tuple[int, int]:
        return (self.up.shape[0], self.down.shape[1])

    def down_matrix(self) -> np.ndarray:
        return self.down.as_f64()

    def up_matrix(self) -> np.ndarray:
        return self.up.as_f64()


@dataclass
class LoraAdapter:
    layers: dict[str, LoraLayer]
    source_path: str
    role_tag: str
    passthrough: dict[str, TensorRecord] = field(default_factory=dict)
    metadata: dict[str, str] | None = None


@dataclass(frozen=True)
class AlignedPair:
    """Two adapters restricted to their shared, lexicographically ordered keys."""

    ordered_keys: tuple[str, ...]
    content: LoraAdapter
    style: LoraAdapter
    skipped_keys: tuple[str, ...]


def _read_container(path: str) -> tuple[dict[str, TensorRecord], dict[str, str] | None]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise AdapterFormatError(f"{path}: no such file") from None
    if len(blob) < 8:
        raise AdapterFormatError(f"{path}: file shorter than the 8-byte header length")
    (header_len,) = struct.unpack("<Q", blob[:8])
    if 8 + header_len > len(blob):
        raise AdapterFormatError(
            f"{path}: header length {header_len} exceeds file size {len(blob)}"
        )
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise AdapterFormatError(f"{path}: malformed JSON header: {exc}") from None
    if not isinstance(header, dict):
        raise AdapterFormatError(f"{path}: header is not a JSON object")

    buf = blob[8 + header_len :]
    metadata = header.pop("__metadata__", None)
    if metadata is not None:
        if not isinstance(metadata, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
        ):
            raise AdapterFormatError(f"{path}: __metadata__ must map strings to strings")

    records: dict[str, TensorRecord] = {}
    for name, desc in header.items():
        if not isinstance(desc, dict):
            raise AdapterFormatError(f"{path}: tensor {name!r}: entry is not an object")
        try:
            dtype = desc["dtype"]
            shape = desc["shape"]
            offsets = desc["data_offsets"]
        except KeyError as exc:
            raise AdapterFormatError(
                f"{path}: tensor {name!r}: missing field {exc.args[0]!r}"
            ) from None
        if dtype not in _DTYPE_NBYTES:
            raise AdapterFormatError(
                f"{path}: tensor {name!r}: unsupported dtype {dtype!r}"
            )
        if not isinstance(shape, list) or not all(
            isinstance(d, int) and d >= 0 for d in shape
        ):
            raise AdapterFormatError(f"{path}: tensor {name!r}: bad shape {shape!r}")
        if (
            not isinstance(offsets, list)
            or len(offsets) != 2
            or not all(isinstance(o, int) for o in offsets)
        ):
            raise AdapterFormatError(
                f"{path}: tensor {name!r}: bad data_offsets {offsets!r}"
            )
        begin, end = offsets
        if not (0 <= begin <= end <= len(buf)):
            raise AdapterFormatError(
                f"{path}: tensor {name!r}: data_offsets [{begin}, {end}] "
                f"outside buffer of {len(buf)} bytes"
            )
        expected = math.prod(shape) * _DTYPE_NBYTES[dtype]
        if end - begin != expected:
            raise AdapterFormatError(
                f"{path}: tensor {name!r}: {end - begin} bytes for shape "
                f"{shape} {dtype}, expected {expected}"
            )
        records[name] = TensorRecord(
            name=name, dtype=dtype, shape=tuple(shape), data=bytes(buf[begin:end])
        )
    return records, metadata


def write_container(
    path: str,
    records: dict[str, TensorRecord],
    metadata: dict[str, str] | None = None,
) -> None:
    """Write records in key-sorted order with no inter-tensor padding."""
    header: dict[str, object] = {}
    if metadata is not None:
        header["__metadata__"] = metadata
    offset = 0
    chunks: list[bytes] = []
    for name in sorted(records):
        rec = records[name]
        end = offset + len(rec.data)
        header[name] = {
            "dtype": rec.dtype,
            "shape": list(rec.shape),
            "data_offsets": [offset, end],
        }
        chunks.append(rec.data)
        offset = end
    header_bytes = json.dumps(header, separators=(",", ":"), sort_keys=False).encode(
        "utf-8"
    )
    blob = struct.pack("<Q", len(header_bytes)) + header_bytes + b"".join(chunks)
    atomic_write_bytes(path, blob)


def _alpha_value(record: TensorRecord, key: str) -> float:
    if len(record.shape) > 1 or math.prod(record.shape) != 1:
        raise AdapterFormatError(
            f"layer {key!r}: alpha tensor has shape {record.shape}, expected a scalar"
        )
    return float(record.as_f64().reshape(-1)[0])


def _pair_layers(
    records: dict[str, TensorRecord], path: str
) -> tuple[dict[str, LoraLayer], dict[str, TensorRecord]]:
    downs: dict[str, TensorRecord] = {}
    ups: dict[str, TensorRecord] = {}
    alphas: dict[str, TensorRecord] = {}
    rest: dict[str, TensorRecord] = {}

    for name, rec in records.items():
        for suffix, bucket in (
            (_DOWN_SUFFIXES[0], downs),
            (_DOWN_SUFFIXES[1], downs),
            (_UP_SUFFIXES[0], ups),
            (_UP_SUFFIXES[1], ups),
            (_ALPHA_SUFFIX, alphas),
        ):
            if name.endswith(suffix):
                key = name[: -len(suffix)]
                # both naming dialects claiming the same layer is ambiguous
                if key in bucket:
                    raise AdapterFormatError(
                        f"{path}: layer {key!r}: duplicate factor {name!r}"
                    )
                bucket[key] = rec
                break
        else:
            rest[name] = rec

    layers: dict[str, LoraLayer] = {}
    for key in sorted(downs):
        down = downs[key]
        up = ups.pop(key, None)
        if up is None:
            raise AdapterFormatError(
                f"{path}: layer {key!r}: down factor present without matching up factor"
            )
        if len(down.shape) != 2 or len(up.shape) != 2:
            raise AdapterFormatError(
                f"{path}: layer {key!r}: factor matrices must be 2-D, "
                f"got {down.shape} and {up.shape}"
            )
        rank = down.shape[0]
        if rank < 1:
            raise AdapterFormatError(f"{path}: layer {key!r}: rank must be >= 1")
        if up.shape[1] != rank:
            raise AdapterFormatError(
                f"{path}: layer {key!r}: rank mismatch, down is {down.shape}, "
                f"up is {up.shape}"
            )
        alpha_rec = alphas.pop(key, None)
        alpha = _alpha_value(alpha_rec, key) if alpha_rec is not None else float(rank)
        layers[key] = LoraLayer(
            key=key,
            down=down,
            up=up,
            rank=rank,
            alpha=alpha,
            alpha_record=alpha_rec,
        )

    for key, rec in ups.items():
        raise AdapterFormatError(
            f"{path}: layer {key!r}: up factor present without matching down factor"
        )
    # alpha scalars without a factor pair stay as opaque passthrough
    rest.update({rec.name: rec for rec in alphas.values()})
    return layers, rest


def load_adapter(path: str, role: str = "content") -> LoraAdapter:
    """Load an adapter file; unrecognized tensors are kept for lossless rewrite."""
    records, metadata = _read_container(path)
    layers, passthrough = _pair_layers(records, path)
    if not layers:
        raise AdapterFormatError(f"{path}: no LoRA layers found")
    log.info("loaded %s: %d layers, %d passthrough tensors", path, len(layers), len(passthrough))
    return LoraAdapter(
        layers=layers,
        source_path=path,
        role_tag=role,
        passthrough=passthrough,
        metadata=metadata,
    )


def write_adapter(adapter: LoraAdapter, path: str) -> None:
    """Serialize an adapter; tensors round-trip bit-identically."""
    records: dict[str, TensorRecord] = {}
    for layer in adapter.layers.values():
        records[layer.down.name] = layer.down
        records[layer.up.name] = layer.up
        if layer.alpha_record is not None:
            records[layer.alpha_record.name] = layer.alpha_record
    for name, rec in adapter.passthrough.items():
        if name in records:
            raise AdapterFormatError(f"duplicate tensor name {name!r}")
        records[name] = rec
    write_container(path, records, adapter.metadata)


def align(content: LoraAdapter, style: LoraAdapter) -> AlignedPair:
    """Restrict two adapters to their shared keys, sorted lexicographically."""
    shared = sorted(content.layers.keys() & style.layers.keys())
    if not shared:
        raise AlignmentError("adapters share no layers")
    for key in shared:
        c_shape = content.layers[key].delta_shape
        s_shape = style.layers[key].delta_shape
        if c_shape != s_shape:
            raise AlignmentError(
                f"layer {key!r}: update shape mismatch, "
                f"content {c_shape} vs style {s_shape}"
            )
    skipped = sorted(content.layers.keys() ^ style.layers.keys())
    for key in skipped:
        log.warning("layer %r present in only one adapter, skipped", key)
    return AlignedPair(
        ordered_keys=tuple(shared),
        content=content,
        style=style,
        skipped_keys=tuple(skipped),
    )
