"""Model checkpoints: JSON manifest + raw float32 little-endian blob.

The manifest records the resolved model config, the fusion spec (when one is
attached), and the name/shape of every parameter in store order; the blob is
the concatenation of those parameters cast to '<f4'.  A sha256 of the blob
in the manifest catches corruption and manifest/blob mismatches.
"""

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import BadValue, KeyMismatch, ShapeMismatch
from .fusion import FusionSpec, attach_fusion
from .models import ModelConfig, build_model

FORMAT = "gridbench-checkpoint-v1"


def _paths(base):
    base = Path(base)
    return base.with_suffix(".json"), base.with_suffix(".bin")


def save_checkpoint(model, base) -> tuple:
    manifest_path, blob_path = _paths(base)
    params = model.parameters()
    blob = b"".join(np.ascontiguousarray(p.data, dtype="<f4").tobytes()
                    for p in params)
    manifest = {
        "format": FORMAT,
        "config": asdict(model.config),
        "fusion": (asdict(model.fusion_spec)
                   if model.fusion_spec is not None else None),
        "params": [{"name": p.name, "shape": list(p.data.shape)}
                   for p in params],
        "dtype": "<f4",
        "checksum": hashlib.sha256(blob).hexdigest(),
    }
    blob_path.write_bytes(blob)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True)
                             + "\n")
    return manifest_path, blob_path


def load_checkpoint(base):
    manifest_path, blob_path = _paths(base)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != FORMAT:
        raise BadValue(f"unrecognized checkpoint format {manifest.get('format')!r}")
    blob = blob_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != manifest["checksum"]:
        raise BadValue("checkpoint blob fails its manifest checksum")

    model = build_model(ModelConfig(**manifest["config"]))
    if manifest["fusion"] is not None:
        fusion = dict(manifest["fusion"])
        fusion["covariate_names"] = tuple(fusion["covariate_names"])
        fusion["lag_per_covariate"] = tuple(fusion["lag_per_covariate"])
        attach_fusion(model, FusionSpec(**fusion))

    params = model.parameters()
    names = [p.name for p in params]
    saved = [entry["name"] for entry in manifest["params"]]
    if names != saved:
        raise KeyMismatch(
            f"checkpoint parameter names disagree with rebuilt model "
            f"(first difference at index "
            f"{next(i for i, (a, b) in enumerate(zip(saved + ['<end>'], names + ['<end>'])) if a != b)})")

    offset = 0
    for p, entry in zip(params, manifest["params"]):
        shape = tuple(entry["shape"])
        if shape != p.data.shape:
            raise ShapeMismatch(
                f"{p.name}: manifest shape {shape} != model shape {p.data.shape}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        chunk = blob[offset:offset + 4 * count]
        if len(chunk) != 4 * count:
            raise BadValue("checkpoint blob shorter than manifest shapes imply")
        p.data = np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(shape)
        offset += 4 * count
    if offset != len(blob):
        raise BadValue("checkpoint blob longer than manifest shapes imply")
    return model
