"""Versioned binary checkpoints.

Layout: magic bytes "SLOC", format version u32, then a sequence of
tag-length-value records, all little-endian:

    tag: u32, length: u64, payload: length bytes

Tags: 1 config JSON (UTF-8), 2 step index (u64), 3 RNG state JSON,
4 parameter array, 5/6 optimizer first/second moment arrays,
7 optimizer step count (u64).  Array payloads are: name length u16,
name UTF-8, ndim u8, dims u64 each, float64 data.

Arrays are written sorted by name, so save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

MAGIC = b"SLOC"
VERSION = 1

_TAG_CONFIG = 1
_TAG_STEP = 2
_TAG_RNG = 3
_TAG_PARAM = 4
_TAG_ADAM_M = 5
_TAG_ADAM_V = 6
_TAG_ADAM_T = 7


@dataclass
class Checkpoint:
    config: dict
    step: int = 0
    rng_state: dict | None = None
    params: dict = field(default_factory=dict)
    opt_m: dict = field(default_factory=dict)
    opt_v: dict = field(default_factory=dict)
    opt_t: int = 0
    version: int = VERSION


def _pack_array(name: str, arr: np.ndarray) -> bytes:
    nb = name.encode("utf-8")
    head = struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim)
    head += b"".join(struct.pack("<Q", d) for d in arr.shape)
    return head + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _unpack_array(payload: bytes):
    (nlen,) = struct.unpack_from("<H", payload, 0)
    name = payload[2 : 2 + nlen].decode("utf-8")
    off = 2 + nlen
    (ndim,) = struct.unpack_from("<B", payload, off)
    off += 1
    shape = struct.unpack_from(f"<{ndim}Q", payload, off)
    off += 8 * ndim
    arr = np.frombuffer(payload, dtype="<f8", offset=off).reshape(shape).copy()
    return name, arr


def _record(tag: int, payload: bytes) -> bytes:
    return struct.pack("<IQ", tag, len(payload)) + payload


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    chunks = [MAGIC, struct.pack("<I", ckpt.version)]
    chunks.append(_record(_TAG_CONFIG, json.dumps(ckpt.config, sort_keys=True).encode("utf-8")))
    chunks.append(_record(_TAG_STEP, struct.pack("<Q", ckpt.step)))
    if ckpt.rng_state is not None:
        chunks.append(_record(_TAG_RNG, json.dumps(ckpt.rng_state, sort_keys=True).encode("utf-8")))
    chunks.append(_record(_TAG_ADAM_T, struct.pack("<Q", ckpt.opt_t)))
    for tag, group in ((_TAG_PARAM, ckpt.params), (_TAG_ADAM_M, ckpt.opt_m), (_TAG_ADAM_V, ckpt.opt_v)):
        for name in sorted(group):
            chunks.append(_record(tag, _pack_array(name, group[name])))
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise InputError(f"{path} is not a checkpoint (bad magic {raw[:4]!r})")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise InputError(f"unsupported checkpoint version {version}")
    ckpt = Checkpoint(config={}, version=version)
    off = 8
    while off < len(raw):
        tag, length = struct.unpack_from("<IQ", raw, off)
        off += 12
        payload = raw[off : off + length]
        if len(payload) != length:
            raise InputError(f"truncated checkpoint record at offset {off}")
        off += length
        if tag == _TAG_CONFIG:
            ckpt.config = json.loads(payload.decode("utf-8"))
        elif tag == _TAG_STEP:
            (ckpt.step,) = struct.unpack("<Q", payload)
        elif tag == _TAG_RNG:
            ckpt.rng_state = json.loads(payload.decode("utf-8"))
        elif tag == _TAG_ADAM_T:
            (ckpt.opt_t,) = struct.unpack("<Q", payload)
        elif tag == _TAG_PARAM:
            name, arr = _unpack_array(payload)
            ckpt.params[name] = arr
        elif tag == _TAG_ADAM_M:
            name, arr = _unpack_array(payload)
            ckpt.opt_m[name] = arr
        elif tag == _TAG_ADAM_V:
            name, arr = _unpack_array(payload)
            ckpt.opt_v[name] = arr
        else:
            raise InputError(f"unknown checkpoint record tag {tag}")
    return ckpt


def rng_state_to_json(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return json.loads(json.dumps(state, default=int))


def rng_from_json(state: dict) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)
