"""Shared independent oracles used by the unit and acceptance suites.

Everything in here deliberately re-derives results from first principles
(explicit loops, dense quadrature, exhaustive search) instead of calling the
library paths it checks.
"""

from __future__ import annotations

import math

import numpy as np


# --------------------------------------------------------------- Y4M writer


def write_reference_y4m(
    planes: list[np.ndarray],
    colorspace: str = "420",
    fps: tuple[int, int] = (30, 1),
    chroma_value: int = 128,
    extra_tags: str = "",
) -> bytes:
    """Independent minimal Y4M writer (not the library serializer).

    ``planes`` are (h, w) uint8 luma arrays; chroma planes are filled with a
    constant.  Subsampled chroma dimensions round up like common tools do.
    """
    h, w = planes[0].shape
    if colorspace == "mono":
        chroma = b""
    else:
        family = "420" if colorspace.startswith("420") else colorspace
        sx, sy = {"420": (2, 2), "422": (2, 1), "444": (1, 1)}[family]
        size = math.ceil(w / sx) * math.ceil(h / sy)
        chroma = bytes([chroma_value]) * (2 * size)
    header = f"YUV4MPEG2 W{w} H{h} F{fps[0]}:{fps[1]}{extra_tags} C{colorspace}\n"
    blob = bytearray(header.encode("ascii"))
    for plane in planes:
        blob += b"FRAME\n"
        blob += plane.astype(np.uint8).tobytes()
        blob += chroma
    return bytes(blob)


# -------------------------------------------------------------- DCT oracles


def dct2_direct(block: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT-II straight from the definition.

    For each output (i, j) the quadruple sum is evaluated against explicit
    cosine tables; no basis-matrix products, no FFT.
    """
    x = np.asarray(block, dtype=np.float64)
    n = x.shape[0]
    grid = np.arange(n)
    cos = np.cos(math.pi * (2.0 * grid[None, :] + 1.0) * grid[:, None] / (2.0 * n))
    scale = np.full(n, math.sqrt(2.0 / n))
    scale[0] = math.sqrt(1.0 / n)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = scale[i] * scale[j] * np.sum(x * np.outer(cos[i], cos[j]))
    return out


def block_energy_direct(block: np.ndarray) -> float:
    """Weighted AC-magnitude sum over the direct DCT, DC excluded."""
    coeffs = dct2_direct(block)
    n = coeffs.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == 0 and j == 0:
                continue
            weight = math.exp(abs(((i * j) / (n * n)) ** 2 - 1.0))
            total += weight * abs(coeffs[i, j])
    return total


def frame_energy_direct(plane: np.ndarray, block_size: int) -> tuple[list[float], float]:
    """Per-block direct energies (row-major) and the normalised frame value."""
    h, w = plane.shape
    by = math.ceil(h / block_size)
    bx = math.ceil(w / block_size)
    energies = []
    for iy in range(by):
        for ix in range(bx):
            tile = np.zeros((block_size, block_size))
            chunk = plane[
                iy * block_size: (iy + 1) * block_size,
                ix * block_size: (ix + 1) * block_size,
            ]
            tile[: chunk.shape[0], : chunk.shape[1]] = chunk
            energies.append(block_energy_direct(tile))
    return energies, sum(energies) / (len(energies) * block_size * block_size)


# ----------------------------------------------------- pruning interpreter


def prune_oracle(qualities: list[float], v_j: float, v_t: float) -> list[int]:
    """Line-by-line interpreter of the elimination procedure.

    Returns kept 0-based indices.  Written as an explicit program counter
    over the pseudocode statements, independent of the library's loop.
    """
    m = len(qualities)
    kept = [0]
    u = 0
    if qualities[0] >= v_t:
        return kept
    t = 1
    while t <= m - 1:
        if qualities[t] - qualities[u] >= v_j:
            kept.append(t)
            u = t
            if qualities[t] >= v_t:
                return kept
        t = t + 1
    return kept


# ------------------------------------------------ resolution search oracle


def select_oracle(
    entries: dict[tuple[int, float], tuple[float, float]],
    resolutions: list[int],
    bitrate: float,
    tau_l: float,
) -> tuple[int, bool]:
    """Exhaustive feasible-argmax with lower-resolution tie-break."""
    feasible = [
        (r, entries[(r, bitrate)][0])
        for r in resolutions
        if entries[(r, bitrate)][1] <= tau_l
    ]
    if feasible:
        best_r, best_v = feasible[0]
        for r, v in feasible[1:]:
            if v > best_v:
                best_r, best_v = r, v
        return best_r, False
    best_r = resolutions[0]
    best_t = entries[(best_r, bitrate)][1]
    for r in resolutions[1:]:
        t = entries[(r, bitrate)][1]
        if t < best_t:
            best_r, best_t = r, t
    return best_r, True


# ------------------------------------------------------- BD metric oracles


def _lstsq_cubic(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cubic coefficients (ascending powers) via an explicit normal solve."""
    vander = np.stack([np.ones_like(x), x, x**2, x**3], axis=1)
    coeffs, _, _, _ = np.linalg.lstsq(vander, y, rcond=None)
    return coeffs


def _eval_cubic(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    return coeffs[0] + coeffs[1] * x + coeffs[2] * x**2 + coeffs[3] * x**3


def _trapezoid_mean(values: np.ndarray, lo: float, hi: float) -> float:
    dx = (hi - lo) / (values.size - 1)
    integral = float(np.sum((values[1:] + values[:-1]) * 0.5 * dx))
    return integral / (hi - lo)


def bd_rate_oracle(
    ref: list[tuple[float, float]], test: list[tuple[float, float]], samples: int = 100_001
) -> float:
    """Dense-sampling BD-rate: independent fit, trapezoid quadrature."""
    ref_rate = np.log10([p[0] for p in ref])
    ref_q = np.array([p[1] for p in ref])
    test_rate = np.log10([p[0] for p in test])
    test_q = np.array([p[1] for p in test])
    p_ref = _lstsq_cubic(ref_q, ref_rate)
    p_test = _lstsq_cubic(test_q, test_rate)
    lo = max(ref_q.min(), test_q.min())
    hi = min(ref_q.max(), test_q.max())
    grid = np.linspace(lo, hi, samples)
    diff = _eval_cubic(p_test, grid) - _eval_cubic(p_ref, grid)
    return (10.0 ** _trapezoid_mean(diff, lo, hi) - 1.0) * 100.0


def bd_quality_oracle(
    ref: list[tuple[float, float]], test: list[tuple[float, float]], samples: int = 100_001
) -> float:
    """Dense-sampling BD-quality along the log-rate axis."""
    ref_rate = np.log10([p[0] for p in ref])
    ref_q = np.array([p[1] for p in ref])
    test_rate = np.log10([p[0] for p in test])
    test_q = np.array([p[1] for p in test])
    p_ref = _lstsq_cubic(ref_rate, ref_q)
    p_test = _lstsq_cubic(test_rate, test_q)
    lo = max(ref_rate.min(), test_rate.min())
    hi = min(ref_rate.max(), test_rate.max())
    grid = np.linspace(lo, hi, samples)
    diff = _eval_cubic(p_test, grid) - _eval_cubic(p_ref, grid)
    return _trapezoid_mean(diff, lo, hi)


def random_rd_pairs(
    rng: np.random.Generator, n_points: int = 5, quality_base: float = 40.0
) -> list[tuple[float, float]]:
    """A plausible RD curve: geometric-ish rates, increasing quality."""
    rates = np.cumprod(rng.uniform(1.6, 2.8, n_points)) * rng.uniform(0.1, 0.4)
    qualities = quality_base + np.cumsum(rng.uniform(1.0, 8.0, n_points))
    return list(zip(rates.tolist(), qualities.tolist()))
