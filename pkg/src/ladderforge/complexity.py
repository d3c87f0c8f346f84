"""Spatiotemporal complexity features computed from luma planes.

Each frame is tiled into ``w x w`` blocks (default 32, zero-padded at the
borders).  A block's texture energy is the weighted sum of the absolute AC
coefficients of its orthonormal 2-D DCT-II:

    H = sum over (i, j) != (0, 0) of exp(|((i*j) / w^2)^2 - 1|) * |coef(i, j)|

The DC term is excluded so constant blocks score zero.  Frame-level values
normalise block sums by ``block_count * w^2``; the temporal gradient compares
co-located block energies of consecutive frames; brightness is the plain mean
of the unpadded luma samples.  Segment values are per-frame means, with the
gradient averaged only over frames that have a predecessor.

The transform is evaluated as two exact basis-matrix products (``A @ X @
A.T``), which is numerically the textbook DCT-II definition, just vectorised.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import IO, Iterable, Union

import numpy as np

from .errors import LadderforgeError
from .media import LumaFrame, VideoSequence

__all__ = [
    "DEFAULT_BLOCK_SIZE",
    "FrameComplexity",
    "SegmentFeatures",
    "ComplexityError",
    "BlockSizeMismatch",
    "DimensionMismatch",
    "EmptySequence",
    "block_texture_energy",
    "frame_complexity",
    "segment_features",
    "write_features_csv",
    "read_features_csv",
]

DEFAULT_BLOCK_SIZE = 32

FEATURES_CSV_HEADER = ("segment_id", "E_Y", "h", "L_Y")


class ComplexityError(LadderforgeError):
    pass


class BlockSizeMismatch(ComplexityError):
    pass


class DimensionMismatch(ComplexityError):
    pass


class EmptySequence(ComplexityError):
    pass


@dataclass(frozen=True)
class FrameComplexity:
    """Per-frame complexity: texture energy, temporal gradient, mean luma."""

    texture_energy: float
    temporal_gradient: float
    brightness: float

    def __post_init__(self):
        for name in ("texture_energy", "temporal_gradient", "brightness"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
        if self.brightness > 255:
            raise ValueError(f"brightness must be <= 255, got {self.brightness}")


@dataclass(frozen=True)
class SegmentFeatures:
    """Segment-level means of the per-frame complexity values.

    ``temporal_gradient`` is 0 for single-frame segments.  These three
    numbers are the model inputs everywhere downstream.
    """

    texture_energy: float
    temporal_gradient: float
    brightness: float

    def __post_init__(self):
        for name in ("texture_energy", "temporal_gradient", "brightness"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
        if self.brightness > 255:
            raise ValueError(f"brightness must be <= 255, got {self.brightness}")


@lru_cache(maxsize=8)
def _dct_basis(size: int) -> np.ndarray:
    """Orthonormal DCT-II basis: A[i, x] = a_i * cos(pi * (2x+1) * i / (2w))."""
    x = np.arange(size)
    basis = np.cos(math.pi * (2.0 * x[None, :] + 1.0) * x[:, None] / (2.0 * size))
    basis *= math.sqrt(2.0 / size)
    basis[0, :] = math.sqrt(1.0 / size)
    basis.setflags(write=False)
    return basis


@lru_cache(maxsize=8)
def _ac_weights(size: int) -> np.ndarray:
    """exp(|((i*j)/w^2)^2 - 1|) with the DC entry zeroed out."""
    ij = np.arange(size)[:, None] * np.arange(size)[None, :]
    weights = np.exp(np.abs((ij / (size * size)) ** 2 - 1.0))
    weights[0, 0] = 0.0
    weights.setflags(write=False)
    return weights


def _as_plane(frame: Union[LumaFrame, np.ndarray]) -> np.ndarray:
    samples = frame.samples if isinstance(frame, LumaFrame) else frame
    plane = np.asarray(samples, dtype=np.float64)
    if plane.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D luma plane, got shape {plane.shape}")
    return plane


def block_texture_energy(block: np.ndarray, block_size: int | None = None) -> float:
    """Texture energy of one square luma tile.

    The tile must already be exactly ``block_size`` (or square, if the size
    is left implicit); border padding is the caller's job.
    """
    tile = np.asarray(block, dtype=np.float64)
    if tile.ndim != 2 or tile.shape[0] != tile.shape[1]:
        raise BlockSizeMismatch(f"tile must be square, got shape {tile.shape}")
    size = tile.shape[0]
    if block_size is not None and size != block_size:
        raise BlockSizeMismatch(f"tile is {size}x{size}, expected {block_size}x{block_size}")
    basis = _dct_basis(size)
    # Removing the tile mean leaves the AC coefficients unchanged but keeps
    # the excluded DC term from leaking rounding noise into them, so constant
    # tiles score exactly zero.
    tile = tile - tile.mean()
    coeffs = basis @ tile @ basis.T
    return float(np.sum(_ac_weights(size) * np.abs(coeffs)))


def _block_energies(plane: np.ndarray, block_size: int) -> np.ndarray:
    """Texture energies of all blocks of a frame, row-major block order."""
    h, w = plane.shape
    by = math.ceil(h / block_size)
    bx = math.ceil(w / block_size)
    if (by * block_size, bx * block_size) != (h, w):
        padded = np.zeros((by * block_size, bx * block_size))
        padded[:h, :w] = plane
        plane = padded
    blocks = (
        plane.reshape(by, block_size, bx, block_size)
        .swapaxes(1, 2)
        .reshape(by * bx, block_size, block_size)
    )
    blocks = blocks - blocks.mean(axis=(1, 2), keepdims=True)  # see block_texture_energy
    basis = _dct_basis(block_size)
    coeffs = basis @ blocks @ basis.T
    return np.einsum("kij,ij->k", np.abs(coeffs), _ac_weights(block_size))


def frame_complexity(
    frame: Union[LumaFrame, np.ndarray],
    prev: Union[LumaFrame, np.ndarray, None] = None,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> FrameComplexity:
    """Complexity of one frame, optionally against its predecessor.

    The temporal gradient is the normalised sum of absolute differences of
    co-located block energies; it is 0 when ``prev`` is absent.
    """
    plane = _as_plane(frame)
    energies = _block_energies(plane, block_size)
    denom = energies.size * block_size * block_size
    gradient = 0.0
    if prev is not None:
        prev_plane = _as_plane(prev)
        if prev_plane.shape != plane.shape:
            raise DimensionMismatch(
                f"previous frame is {prev_plane.shape}, current is {plane.shape}"
            )
        gradient = float(np.sum(np.abs(energies - _block_energies(prev_plane, block_size))) / denom)
    return FrameComplexity(
        texture_energy=float(energies.sum() / denom),
        temporal_gradient=gradient,
        brightness=float(plane.mean()),
    )


def segment_features(
    seq: Union[VideoSequence, Iterable[Union[LumaFrame, np.ndarray]]],
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> SegmentFeatures:
    """Mean complexity features of a whole segment.

    Block energies are computed once per frame and reused for the gradient
    of the following frame, so a segment costs one transform pass.
    """
    frames = seq.frames if isinstance(seq, VideoSequence) else list(seq)
    if not frames:
        raise EmptySequence("cannot compute features of an empty sequence")
    textures: list[float] = []
    gradients: list[float] = []
    brightnesses: list[float] = []
    prev_energies: np.ndarray | None = None
    for frame in frames:
        plane = _as_plane(frame)
        energies = _block_energies(plane, block_size)
        denom = energies.size * block_size * block_size
        textures.append(float(energies.sum() / denom))
        brightnesses.append(float(plane.mean()))
        if prev_energies is not None:
            if prev_energies.size != energies.size:
                raise DimensionMismatch("all frames of a segment must share dimensions")
            gradients.append(float(np.sum(np.abs(energies - prev_energies)) / denom))
        prev_energies = energies
    return SegmentFeatures(
        texture_energy=float(np.mean(textures)),
        temporal_gradient=float(np.mean(gradients)) if gradients else 0.0,
        brightness=float(np.mean(brightnesses)),
    )


def write_features_csv(
    rows: Iterable[tuple[str, SegmentFeatures]],
    out: IO[str],
    *,
    comment: str | None = None,
) -> None:
    """Write one ``segment_id,E_Y,h,L_Y`` row per segment.

    An optional ``comment`` is emitted first as a ``#``-prefixed line; the
    matching reader skips such lines.
    """
    if comment is not None:
        out.write(f"# {comment}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(FEATURES_CSV_HEADER)
    for segment_id, features in rows:
        writer.writerow(
            [
                segment_id,
                repr(features.texture_energy),
                repr(features.temporal_gradient),
                repr(features.brightness),
            ]
        )


def read_features_csv(source: Union[str, IO[str]]) -> list[tuple[str, SegmentFeatures]]:
    """Read a features CSV, preserving row order.

    ``source`` is an open text stream or the CSV text itself.  Raises
    ComplexityError on a missing/incorrect header or a bad row; the message
    carries the offending line number.
    """
    text = source if not isinstance(source, str) else io.StringIO(source)
    numbered = [
        (lineno, line)
        for lineno, line in enumerate(text, start=1)
        if line.strip() and not line.startswith("#")
    ]
    rows = list(csv.reader(line for _, line in numbered))
    if not rows or tuple(rows[0]) != FEATURES_CSV_HEADER:
        raise ComplexityError(
            f"features CSV must start with header {','.join(FEATURES_CSV_HEADER)}"
        )
    out: list[tuple[str, SegmentFeatures]] = []
    seen: set[str] = set()
    for (lineno, _), row in zip(numbered[1:], rows[1:]):
        if len(row) != 4:
            raise ComplexityError(f"features CSV row {lineno}: expected 4 fields, got {len(row)}")
        segment_id = row[0]
        if segment_id in seen:
            raise ComplexityError(f"features CSV row {lineno}: duplicate segment id {segment_id!r}")
        seen.add(segment_id)
        try:
            features = SegmentFeatures(float(row[1]), float(row[2]), float(row[3]))
        except ValueError as exc:
            raise ComplexityError(f"features CSV row {lineno}: {exc}") from None
        out.append((segment_id, features))
    return out
