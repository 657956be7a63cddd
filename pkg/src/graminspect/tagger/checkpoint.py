"""Checkpoint file: magic line, one-line JSON manifest, raw little-endian payload."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig

MAGIC = b"GRAMINSPECT-CKPT-1\n"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Integrity failure: bad magic, version, truncation or checksum."""


class FingerprintError(CheckpointError):
    """Checkpoint was built for a different model configuration."""


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    seed: int = 0
    epoch: int = 0
    train: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()

    def require(self, config: ModelConfig | None = None, variant: str | None = None) -> None:
        if config is not None and config.fingerprint() != self.fingerprint:
            raise FingerprintError(
                f"checkpoint fingerprint {self.fingerprint} != expected {config.fingerprint()}")
        if variant is not None and variant != self.config.variant:
            raise FingerprintError(
                f"checkpoint {self.fingerprint} is a variant-{self.config.variant} model, "
                f"variant {variant} requested")


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    tensors, chunks, offset = [], [], 0
    for name in sorted(ckpt.params):
        arr = np.ascontiguousarray(ckpt.params[name], dtype="<f8")
        raw = arr.tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "dtype": "float64-le",
                        "offset": offset, "nbytes": len(raw),
                        "sha256": hashlib.sha256(raw).hexdigest()})
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "version": FORMAT_VERSION,
        "fingerprint": ckpt.fingerprint,
        "seed": ckpt.seed,
        "epoch": ckpt.epoch,
        "config": ckpt.config.to_dict(),
        "train": ckpt.train,
        "tensors": tensors,
    }
    head = json.dumps(manifest, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return MAGIC + head + b"\n" + b"".join(chunks)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(ckpt))


def parse_checkpoint(blob: bytes) -> Checkpoint:
    if not blob.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    nl = blob.find(b"\n", len(MAGIC))
    if nl < 0:
        raise CheckpointError("truncated checkpoint manifest")
    try:
        manifest = json.loads(blob[len(MAGIC):nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint manifest ({exc})") from None
    if manifest.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {manifest.get('version')!r}")
    payload = blob[nl + 1:]
    expected = sum(t["nbytes"] for t in manifest["tensors"])
    if len(payload) != expected:
        raise CheckpointError(f"checkpoint payload is {len(payload)} bytes, manifest says {expected}")
    params = {}
    for t in manifest["tensors"]:
        raw = payload[t["offset"]:t["offset"] + t["nbytes"]]
        if hashlib.sha256(raw).hexdigest() != t["sha256"]:
            raise CheckpointError(f"checksum mismatch in tensor {t['name']!r}")
        params[t["name"]] = np.frombuffer(raw, dtype="<f8").reshape(t["shape"]).astype(np.float64)
    config = ModelConfig.from_dict(manifest["config"])
    if config.fingerprint() != manifest["fingerprint"]:
        raise FingerprintError("manifest fingerprint does not match its own config")
    return Checkpoint(config, params, manifest["seed"], manifest["epoch"], manifest.get("train", {}))


def load_checkpoint(path, expect: ModelConfig | None = None) -> Checkpoint:
    with open(path, "rb") as fh:
        ckpt = parse_checkpoint(fh.read())
    ckpt.require(expect)
    return ckpt
