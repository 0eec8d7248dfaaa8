"""Batch image-embedding extraction into the FETv1 feature-file format.

The default backbone is Inception-V3 with its 2048-wide global-pool
activations.  Pretrained weights are used when they can be loaded; in an
offline environment the extractor falls back to a deterministically seeded
random initialization of the same architecture and records exactly which
model produced the file in the manifest sidecar — feature values are then
meaningless as image semantics but remain valid, reproducible embeddings
for format-level work.

Preprocessing is pinned (and version-stamped in the manifest) because
distance values are sensitive to it: RGB, bilinear resize to 299x299,
scale to [0, 1], normalize with mean 0.5 / std 0.5 per channel.
"""

from __future__ import annotations

import functools
import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

FET_MAGIC = b"FETv1\n"
EMBED_DIM = 2048
INPUT_SIZE = 299
PREPROCESSING = "rgb-bilinear-299x299-scale01-normalize(0.5,0.5)/v1"
FALLBACK_SEED = 0
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tiff", ".webp"}


class ExtractionError(RuntimeError):
    """No usable images were found in the input directory."""


@dataclass(frozen=True)
class ExtractionManifest:
    input_dir: str
    images: tuple[str, ...]
    skipped: tuple[str, ...]
    dim: int
    model: str
    preprocessing: str
    batch: int

    def to_dict(self) -> dict:
        return {
            "input_dir": self.input_dir,
            "images": list(self.images),
            "skipped": list(self.skipped),
            "dim": self.dim,
            "model": self.model,
            "preprocessing": self.preprocessing,
            "batch": self.batch,
        }


@functools.lru_cache(maxsize=1)
def load_model(seed: int = FALLBACK_SEED) -> tuple[torch.nn.Module, str]:
    """Inception-V3 trunk with the classifier head removed.

    Tries the pretrained weights first; any failure (typically: offline and
    no local cache) falls back to a seeded random initialization, with the
    identifier recording which one the caller got.
    """
    from torchvision import models

    torch.manual_seed(seed)
    try:
        model = models.inception_v3(weights=models.Inception_V3_Weights.IMAGENET1K_V1)
        identifier = "torchvision/inception_v3/IMAGENET1K_V1"
    except Exception as exc:
        warnings.warn(
            f"pretrained weights unavailable ({exc.__class__.__name__}); "
            f"falling back to a seeded untrained backbone",
            stacklevel=2,
        )
        torch.manual_seed(seed)
        model = models.inception_v3(weights=None, init_weights=True, aux_logits=True)
        identifier = f"torchvision/inception_v3/untrained-seed{seed}"
    model.fc = torch.nn.Identity()
    model.eval()
    return model, identifier


def list_images(input_dir: Path) -> list[str]:
    """Relative paths of candidate images, sorted lexicographically."""
    return sorted(
        p.relative_to(input_dir).as_posix()
        for p in input_dir.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def load_image(path: Path) -> np.ndarray:
    """Decode and preprocess one image to a (3, 299, 299) float32 array."""
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    arr = (arr - 0.5) / 0.5
    return arr.transpose(2, 0, 1)


def write_features(path: Path, ids: list[str], vectors: np.ndarray) -> None:
    """FETv1 binary writer (little-endian, float32 payload)."""
    with open(path, "wb") as fh:
        fh.write(FET_MAGIC)
        fh.write(struct.pack("<II", len(ids), vectors.shape[1]))
        for image_id, vec in zip(ids, vectors):
            encoded = image_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(vec.astype("<f4").tobytes())


def extract(
    input_dir: str | Path,
    out: str | Path,
    batch: int = 8,
    seed: int = FALLBACK_SEED,
) -> ExtractionManifest:
    """Embed every decodable image under ``input_dir`` and write ``out``.

    Undecodable files are skipped with a warning and listed in the
    manifest; an empty usable set raises ExtractionError.  Inference is
    single-threaded and seeded, so reruns produce byte-identical files.
    """
    input_dir = Path(input_dir)
    out = Path(out)
    if batch < 1:
        raise ValueError("batch must be at least 1")
    candidates = list_images(input_dir)

    usable: list[str] = []
    skipped: list[str] = []
    arrays: list[np.ndarray] = []
    for rel in candidates:
        try:
            arrays.append(load_image(input_dir / rel))
            usable.append(rel)
        except Exception:
            warnings.warn(f"skipping undecodable image {rel}", stacklevel=2)
            skipped.append(rel)
    if not usable:
        raise ExtractionError(f"no decodable images under {input_dir}")

    model, identifier = load_model(seed)
    torch.set_num_threads(1)
    vectors = np.empty((len(usable), EMBED_DIM), dtype=np.float32)
    with torch.no_grad():
        for start in range(0, len(usable), batch):
            chunk = np.stack(arrays[start : start + batch])
            feats = model(torch.from_numpy(chunk))
            vectors[start : start + chunk.shape[0]] = feats.numpy()

    write_features(out, usable, vectors)
    manifest = ExtractionManifest(
        input_dir=str(input_dir),
        images=tuple(usable),
        skipped=tuple(skipped),
        dim=EMBED_DIM,
        model=identifier,
        preprocessing=PREPROCESSING,
        batch=batch,
    )
    with open(out.with_name(out.name + ".manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2)
        fh.write("\n")
    return manifest
