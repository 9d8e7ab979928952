"""Checkpoint container: one JSON header line, then a float32 payload.

The header records the model kind, training stage, seed, configuration,
and a manifest of (name, shape, byte offset) for every tensor, in name
order. The payload is the little-endian float32 concatenation of those
tensors, row-major. Loading into an existing parameter set is strict:
every discrepancy (missing, unexpected, or reshaped tensor) is reported,
per tensor, in one error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .layers import ParamSet

PAYLOAD_DTYPE = "<f4"


@dataclass(frozen=True)
class Checkpoint:
    kind: str
    stage: str
    seed: int
    config: dict
    arrays: dict[str, np.ndarray]


def save_checkpoint(path, params: ParamSet, *, kind: str, stage: str,
                    seed: int, config: dict) -> None:
    manifest = []
    chunks = []
    offset = 0
    for name in params.names:
        # asarray, not ascontiguousarray: the latter promotes 0-d to (1,)
        arr = np.asarray(params[name].value, dtype=PAYLOAD_DTYPE)
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += len(chunks[-1])
    header = {
        "kind": kind,
        "stage": stage,
        "seed": int(seed),
        "config": config,
        "dtype": PAYLOAD_DTYPE,
        "manifest": manifest,
        "payload_bytes": offset,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + b"".join(chunks)
    Path(path).write_bytes(blob)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint file not found: {path}")
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise DataError(f"checkpoint {path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"checkpoint {path}: bad header ({exc})") from exc
    for key in ("kind", "stage", "seed", "config", "dtype", "manifest", "payload_bytes"):
        if key not in header:
            raise DataError(f"checkpoint {path}: header missing {key!r}")
    if header["dtype"] != PAYLOAD_DTYPE:
        raise DataError(f"checkpoint {path}: unsupported dtype {header['dtype']!r}")
    payload = raw[newline + 1:]
    if len(payload) != header["payload_bytes"]:
        raise DataError(
            f"checkpoint {path}: payload is {len(payload)} bytes, "
            f"header declares {header['payload_bytes']}"
        )
    arrays = {}
    itemsize = np.dtype(PAYLOAD_DTYPE).itemsize
    for entry in header["manifest"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + count * itemsize
        if end > len(payload):
            raise DataError(f"checkpoint {path}: tensor {name!r} overruns payload")
        flat = np.frombuffer(payload, dtype=PAYLOAD_DTYPE, count=count, offset=offset)
        arrays[name] = flat.astype(np.float64).reshape(shape)
    return Checkpoint(kind=header["kind"], stage=header["stage"],
                      seed=int(header["seed"]), config=header["config"], arrays=arrays)


def apply_checkpoint(params: ParamSet, ckpt: Checkpoint) -> None:
    """Copy checkpoint tensors into ``params``; raises DataError listing
    every mismatched tensor if the two disagree anywhere."""
    problems = []
    model_names = set(params.names)
    ckpt_names = set(ckpt.arrays)
    for name in sorted(model_names - ckpt_names):
        problems.append(f"{name}: missing from checkpoint")
    for name in sorted(ckpt_names - model_names):
        problems.append(f"{name}: unexpected in checkpoint")
    for name in sorted(model_names & ckpt_names):
        have = params[name].value.shape
        got = ckpt.arrays[name].shape
        if have != got:
            problems.append(f"{name}: checkpoint shape {got} vs model shape {have}")
    if problems:
        raise DataError("checkpoint does not fit model:\n  " + "\n  ".join(problems))
    params.set_values(ckpt.arrays)
