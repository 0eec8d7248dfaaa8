"""Frechet distance between Gaussian feature fits, and the greedy
leave-one-out filter that prunes generated records whose removal strictly
lowers the distance to the real set.

The distance is d^2 = ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 sqrt(S_a S_b)).
The cross term is evaluated through the symmetric product
sqrt(S_a)^T S_b sqrt(S_a) so only symmetric eigendecompositions are ever
taken; tiny negative eigenvalues (roundoff) are clamped to zero and larger
ones rejected.  When either covariance is near-singular (an eigenvalue
below 1e-10), a jitter of 1e-6 * I is added to both covariances before the
square root — the standard fallback, applied symmetrically.

Feature file format ``FETv1`` (little-endian binary):
magic ``FETv1\\n``, u32 record count, u32 dim, then per record
[u32 id byte-length, id UTF-8 bytes, dim x float32].  A CSV fallback with
header ``image_id,v0,v1,...`` is also supported.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .anno import DataWarning

_MAGIC = b"FETv1\n"
_SINGULAR_EIG = 1e-10
_JITTER = 1e-6


class NumericalError(ArithmeticError):
    """The eigendecomposition produced results outside tolerance."""


@dataclass(frozen=True)
class FeatureSet:
    """Per-image embedding vectors, all sharing one dimension."""

    dim: int
    ids: tuple[str, ...]
    vectors: np.ndarray  # (n, dim) float64

    def __post_init__(self) -> None:
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise ValueError(f"vectors must be (n, {self.dim}), got {v.shape}")
        if len(self.ids) != v.shape[0]:
            raise ValueError("ids and vectors disagree in length")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vectors must be finite")
        object.__setattr__(self, "vectors", v)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class GaussianStats:
    """Sample mean and unbiased covariance of a feature set."""

    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be (d,), cov must be (d, d)")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("stats must be finite")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ValueError("covariance must be symmetric (tolerance 1e-10)")
        if np.any(np.diag(cov) < -1e-12):
            raise ValueError("covariance diagonal must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_stats(fs: FeatureSet) -> GaussianStats:
    """Sample mean and unbiased (n-1 denominator) covariance."""
    if fs.n < 2:
        raise ValueError(f"insufficient samples: need at least 2 records, got {fs.n}")
    mean = fs.vectors.mean(axis=0)
    centered = fs.vectors - mean
    cov = centered.T @ centered / (fs.n - 1)
    return GaussianStats(mean=mean, cov=0.5 * (cov + cov.T), n=fs.n)


def _psd_sqrt(mat: np.ndarray, scale: float) -> np.ndarray:
    """Square root of a symmetric PSD matrix via eigendecomposition."""
    vals, vecs = np.linalg.eigh(mat)
    tol = 1e-6 * max(1.0, scale)
    if vals[0] < -tol:
        raise NumericalError(f"matrix not PSD within tolerance (eigenvalue {vals[0]:.3e})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Frechet distance between two Gaussian fits, clamped >= 0."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    cov_a, cov_b = a.cov, b.cov
    min_eig = min(np.linalg.eigvalsh(cov_a)[0], np.linalg.eigvalsh(cov_b)[0])
    if min_eig < _SINGULAR_EIG:
        eye = _JITTER * np.eye(a.dim)
        cov_a = cov_a + eye
        cov_b = cov_b + eye

    scale = max(float(np.abs(cov_a).max()), float(np.abs(cov_b).max()), 1.0)
    root_a = _psd_sqrt(cov_a, scale)
    inner = root_a @ cov_b @ root_a
    inner = 0.5 * (inner + inner.T)
    vals = np.linalg.eigh(inner)[0]
    tol = 1e-6 * max(1.0, float(np.abs(vals).max(initial=0.0)))
    if vals.size and vals[0] < -tol:
        raise NumericalError(f"cross-covariance product not PSD (eigenvalue {vals[0]:.3e})")
    trace_sqrt = float(np.sqrt(np.clip(vals, 0.0, None)).sum())

    diff = a.mean - b.mean
    d2 = float(diff @ diff) + float(np.trace(cov_a) + np.trace(cov_b)) - 2.0 * trace_sqrt
    return max(d2, 0.0)


def _downdate(mean: np.ndarray, scatter: np.ndarray, n: int, x: np.ndarray):
    """Remove one vector from (mean, scatter-about-mean, n) in O(d^2)."""
    d = x - mean
    new_mean = (n * mean - x) / (n - 1)
    new_scatter = scatter - np.outer(d, d) * (n / (n - 1))
    return new_mean, new_scatter, n - 1


@dataclass(frozen=True)
class FidFilterResult:
    kept: FeatureSet
    removed_ids: tuple[str, ...]
    trace: tuple[float, ...]
    initial_fid: float
    final_fid: float
    truncated: bool  # the pass stopped early to keep at least 2 records


def fid_filter(generated: FeatureSet, real: FeatureSet, passes: int = 1) -> FidFilterResult:
    """One greedy pass (or several) over the generated records in input
    order, permanently removing any record whose removal strictly lowers
    the distance to the real set.

    ``trace`` records the current distance after every decision; the final
    distance never exceeds the initial one.  The pass stops early (with
    ``truncated`` set) rather than let the set shrink below 2 records.
    """
    if generated.n < 3:
        raise ValueError(f"need at least 3 generated records to filter, got {generated.n}")
    if passes < 1:
        raise ValueError("passes must be >= 1")

    real_stats = fit_stats(real)
    mean = generated.vectors.mean(axis=0)
    centered = generated.vectors - mean
    scatter = centered.T @ centered
    n = generated.n

    def stats_of(m, s, k) -> GaussianStats:
        cov = s / (k - 1)
        return GaussianStats(mean=m, cov=0.5 * (cov + cov.T), n=k)

    current = frechet_distance(stats_of(mean, scatter, n), real_stats)
    initial = current
    alive = list(range(generated.n))
    removed: list[str] = []
    trace: list[float] = []
    truncated = False

    for _ in range(passes):
        removed_this_pass = False
        for idx in list(alive):
            if n <= 2:
                truncated = True
                break
            cand_mean, cand_scatter, cand_n = _downdate(
                mean, scatter, n, generated.vectors[idx]
            )
            cand = frechet_distance(stats_of(cand_mean, cand_scatter, cand_n), real_stats)
            if cand < current:
                mean, scatter, n = cand_mean, cand_scatter, cand_n
                current = cand
                alive.remove(idx)
                removed.append(generated.ids[idx])
                removed_this_pass = True
            trace.append(current)
        if truncated or not removed_this_pass:
            break

    kept = FeatureSet(
        dim=generated.dim,
        ids=tuple(generated.ids[i] for i in alive),
        vectors=generated.vectors[alive],
    )
    return FidFilterResult(
        kept=kept,
        removed_ids=tuple(removed),
        trace=tuple(trace),
        initial_fid=initial,
        final_fid=current,
        truncated=truncated,
    )


def fid_filter_threshold(
    generated: FeatureSet, real: FeatureSet, max_delta: float
) -> FidFilterResult:
    """Single-sweep variant: drop every record whose leave-one-out distance
    improvement over the full set exceeds ``max_delta``.  Informal
    companion to :func:`fid_filter`; not part of the acceptance surface.
    """
    if generated.n < 3:
        raise ValueError(f"need at least 3 generated records to filter, got {generated.n}")
    real_stats = fit_stats(real)
    full = fit_stats(generated)
    initial = frechet_distance(full, real_stats)
    mean = generated.vectors.mean(axis=0)
    centered = generated.vectors - mean
    scatter = centered.T @ centered

    alive: list[int] = []
    removed: list[str] = []
    trace: list[float] = []
    for idx in range(generated.n):
        m, s, k = _downdate(mean, scatter, generated.n, generated.vectors[idx])
        cov = s / (k - 1)
        cand = frechet_distance(GaussianStats(mean=m, cov=0.5 * (cov + cov.T), n=k), real_stats)
        delta = initial - cand
        trace.append(cand)
        if delta > max_delta and generated.n - len(removed) > 2:
            removed.append(generated.ids[idx])
        else:
            alive.append(idx)

    kept = FeatureSet(
        dim=generated.dim,
        ids=tuple(generated.ids[i] for i in alive),
        vectors=generated.vectors[alive],
    )
    final = frechet_distance(fit_stats(kept), real_stats) if kept.n >= 2 else float("nan")
    return FidFilterResult(
        kept=kept,
        removed_ids=tuple(removed),
        trace=tuple(trace),
        initial_fid=initial,
        final_fid=final,
        truncated=False,
    )


def save_features(fs: FeatureSet, path: str | Path) -> None:
    """Write the FETv1 binary format (vectors stored as float32)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", fs.n, fs.dim))
        for i, image_id in enumerate(fs.ids):
            encoded = image_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(fs.vectors[i].astype("<f4").tobytes())


def load_features(path: str | Path, fmt: str = "fet") -> FeatureSet:
    """Read a feature file; fmt is ``fet`` (binary) or ``csv``."""
    if fmt == "csv":
        return _load_features_csv(path)
    if fmt != "fet":
        raise ValueError(f"unknown feature format {fmt!r}")
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a FETv1 file (bad magic {magic!r})")
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError(f"{path}: truncated header")
        n, dim = struct.unpack("<II", header)
        if dim == 0:
            raise ValueError(f"{path}: zero feature dimension")
        ids = []
        vectors = np.empty((n, dim), dtype=np.float64)
        for i in range(n):
            raw_len = fh.read(4)
            if len(raw_len) != 4:
                raise ValueError(f"{path}: truncated at record {i}")
            (id_len,) = struct.unpack("<I", raw_len)
            raw_id = fh.read(id_len)
            raw_vec = fh.read(4 * dim)
            if len(raw_id) != id_len or len(raw_vec) != 4 * dim:
                raise ValueError(f"{path}: truncated at record {i}")
            ids.append(raw_id.decode("utf-8"))
            vectors[i] = np.frombuffer(raw_vec, dtype="<f4")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after {n} records")
    if len(set(ids)) != len(ids):
        warnings.warn(f"{path}: duplicate image ids in feature file", DataWarning)
    return FeatureSet(dim=dim, ids=tuple(ids), vectors=vectors)


def save_features_csv(fs: FeatureSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("image_id," + ",".join(f"v{i}" for i in range(fs.dim)) + "\n")
        for i, image_id in enumerate(fs.ids):
            row = ",".join(repr(float(v)) for v in fs.vectors[i])
            fh.write(f"{image_id},{row}\n")


def _load_features_csv(path: str | Path) -> FeatureSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[0] != "image_id":
            raise ValueError(f"{path}: CSV feature file must start with an image_id header")
        dim = len(header) - 1
        if dim == 0:
            raise ValueError(f"{path}: no feature columns")
        ids = []
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim + 1} columns")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    if len(set(ids)) != len(ids):
        warnings.warn(f"{path}: duplicate image ids in feature file", DataWarning)
    return FeatureSet(dim=dim, ids=tuple(ids), vectors=np.asarray(rows, dtype=np.float64))
