"""Ladder evaluation: BD metrics plus time, energy and storage accounting.

The rate delta between two rate-distortion curves follows the classic cubic
least-squares construction: fit ``log10(rate) = p(quality)`` to each curve,
average ``p_test - p_ref`` over the overlapping quality range, and convert
with ``(10**avg - 1) * 100``.  Negative means the test scheme needs less
bitrate for equal quality.  The quality delta is the dual fit ``quality =
q(log10 rate)`` averaged over the overlapping log-rate range; positive means
the test scheme gains quality at equal bitrate.  Fits are exact cubic
least squares on four or more points; rank-deficient systems are reported as
:class:`DegenerateFit`, never regularised, and an empty overlap is an error
rather than an extrapolation.

Per-segment accounting assumes representations encode concurrently: wall
time is the maximum over rungs, while energy is ``kappa`` joules per second
of summed encode time (energy is additive across concurrent jobs).  Storage
is the bitrate sum times the segment duration, in megabits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import LadderforgeError
from .ladder import EmptyLadder, Ladder

__all__ = [
    "METRIC_KINDS",
    "RdPoint",
    "RdCurve",
    "EvaluatedRep",
    "EvaluatedSegment",
    "SchemeReport",
    "MetricsError",
    "InsufficientPoints",
    "NoOverlap",
    "DegenerateFit",
    "MetricKindMismatch",
    "SegmentMismatch",
    "bd_rate",
    "bd_quality",
    "segment_encode_time",
    "encoding_energy",
    "storage",
    "compare_schemes",
    "load_evaluation_csv",
]

METRIC_KINDS = ("psnr", "vmaf")

EVALUATION_CSV_HEADER = (
    "segment_id",
    "scheme",
    "bitrate_mbps",
    "resolution",
    "quality_metric",
    "quality",
    "encode_time_s",
)


class MetricsError(LadderforgeError):
    pass


class InsufficientPoints(MetricsError):
    pass


class NoOverlap(MetricsError):
    pass


class DegenerateFit(MetricsError):
    pass


class MetricKindMismatch(MetricsError):
    pass


class SegmentMismatch(MetricsError):
    pass


@dataclass(frozen=True)
class RdPoint:
    bitrate: float
    quality: float

    def __post_init__(self):
        if not (math.isfinite(self.bitrate) and self.bitrate > 0):
            raise MetricsError(f"bitrate must be finite and positive, got {self.bitrate}")
        if not math.isfinite(self.quality):
            raise MetricsError(f"quality must be finite, got {self.quality}")


@dataclass(frozen=True)
class RdCurve:
    """At least four RD points in strictly increasing bitrate order."""

    points: tuple[RdPoint, ...]
    metric_kind: str

    def __post_init__(self):
        points = tuple(self.points)
        if len(points) < 4:
            raise InsufficientPoints(f"a curve needs >= 4 points, got {len(points)}")
        for a, b in zip(points, points[1:]):
            if not a.bitrate < b.bitrate:
                raise MetricsError(
                    f"bitrates must strictly increase, got {a.bitrate} then {b.bitrate}"
                )
        if self.metric_kind not in METRIC_KINDS:
            raise MetricKindMismatch(
                f"metric_kind must be one of {METRIC_KINDS}, got {self.metric_kind!r}"
            )
        object.__setattr__(self, "points", points)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]], metric_kind: str) -> "RdCurve":
        return cls(tuple(RdPoint(b, q) for b, q in pairs), metric_kind)

    @property
    def bitrates(self) -> np.ndarray:
        return np.array([p.bitrate for p in self.points])

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points])


def _fit_cubic(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    coeffs, _residuals, rank, _sv, _rcond = np.polyfit(x, y, 3, full=True)
    if rank < 4:
        raise DegenerateFit("cubic fit is rank-deficient (duplicate abscissae?)")
    return coeffs


def _overlap(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    lo = max(a.min(), b.min())
    hi = min(a.max(), b.max())
    if not lo < hi:
        raise NoOverlap(f"curves do not overlap (intersection [{lo}, {hi}])")
    return float(lo), float(hi)


def _mean_poly_difference(
    p_test: np.ndarray, p_ref: np.ndarray, lo: float, hi: float
) -> float:
    diff_integral = np.polyint(np.polysub(p_test, p_ref))
    return float((np.polyval(diff_integral, hi) - np.polyval(diff_integral, lo)) / (hi - lo))


def _check_kinds(reference: RdCurve, test: RdCurve) -> None:
    if reference.metric_kind != test.metric_kind:
        raise MetricKindMismatch(
            f"curves carry different metrics: {reference.metric_kind!r} vs {test.metric_kind!r}"
        )


def bd_rate(reference: RdCurve, test: RdCurve) -> float:
    """Average bitrate change of ``test`` vs ``reference`` at equal quality, percent."""
    _check_kinds(reference, test)
    p_ref = _fit_cubic(reference.qualities, np.log10(reference.bitrates))
    p_test = _fit_cubic(test.qualities, np.log10(test.bitrates))
    lo, hi = _overlap(reference.qualities, test.qualities)
    avg = _mean_poly_difference(p_test, p_ref, lo, hi)
    return (10.0**avg - 1.0) * 100.0


def bd_quality(reference: RdCurve, test: RdCurve) -> float:
    """Average quality change of ``test`` vs ``reference`` at equal bitrate."""
    _check_kinds(reference, test)
    log_ref = np.log10(reference.bitrates)
    log_test = np.log10(test.bitrates)
    p_ref = _fit_cubic(log_ref, reference.qualities)
    p_test = _fit_cubic(log_test, test.qualities)
    lo, hi = _overlap(log_ref, log_test)
    return _mean_poly_difference(p_test, p_ref, lo, hi)


def segment_encode_time(times: Iterable[float]) -> float:
    """Wall time of one segment under concurrent encoding: the max rung time."""
    values = list(times)
    if not values:
        raise EmptyLadder("no representation times supplied")
    if any(t < 0 for t in values):
        raise MetricsError("encode times must be nonnegative")
    return float(max(values))


def encoding_energy(times: Iterable[float], kappa: float) -> float:
    """Total joules: ``kappa`` times the summed encode seconds."""
    if kappa <= 0:
        raise MetricsError(f"kappa must be positive, got {kappa}")
    values = list(times)
    if not values:
        raise EmptyLadder("no representation times supplied")
    if any(t < 0 for t in values):
        raise MetricsError("encode times must be nonnegative")
    return float(kappa * sum(values))


def storage(ladder: Ladder, duration_s: float) -> float:
    """Megabits to store every rung of one segment."""
    if duration_s <= 0:
        raise MetricsError(f"duration must be positive, got {duration_s}")
    return float(sum(rep.bitrate for rep in ladder.reps) * duration_s)


@dataclass(frozen=True)
class EvaluatedRep:
    """One encoded rung with measured (or predicted) quality and time."""

    bitrate: float
    resolution: int
    encode_time: float
    qualities: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.bitrate <= 0:
            raise MetricsError(f"bitrate must be positive, got {self.bitrate}")
        if self.encode_time < 0:
            raise MetricsError(f"encode time must be nonnegative, got {self.encode_time}")
        for kind in self.qualities:
            if kind not in METRIC_KINDS:
                raise MetricKindMismatch(f"unknown quality metric {kind!r}")
        object.__setattr__(self, "qualities", dict(self.qualities))


@dataclass(frozen=True)
class EvaluatedSegment:
    segment_id: str
    reps: tuple[EvaluatedRep, ...]

    def __post_init__(self):
        if not self.reps:
            raise EmptyLadder(f"segment {self.segment_id!r} has no representations")
        object.__setattr__(self, "reps", tuple(self.reps))

    def curve(self, metric_kind: str) -> RdCurve:
        pairs = sorted(
            (rep.bitrate, rep.qualities[metric_kind])
            for rep in self.reps
            if metric_kind in rep.qualities
        )
        return RdCurve.from_pairs(pairs, metric_kind)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(rep.encode_time for rep in self.reps)

    @property
    def total_bitrate(self) -> float:
        return float(sum(rep.bitrate for rep in self.reps))


@dataclass(frozen=True)
class SchemeReport:
    """Aggregate comparison of a candidate scheme against a baseline.

    BD fields are means over segments where both curves were fittable and
    overlapped; they are None when no segment qualified.  The relative
    deltas are percentages of the baseline totals, and the mean segment
    time describes the candidate scheme.
    """

    bd_rate_psnr: float | None
    bd_rate_vmaf: float | None
    bd_psnr: float | None
    bd_vmaf: float | None
    delta_energy_pct: float
    delta_storage_pct: float
    mean_segment_time_s: float
    segments: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "bd_rate_psnr": self.bd_rate_psnr,
            "bd_rate_vmaf": self.bd_rate_vmaf,
            "bd_psnr": self.bd_psnr,
            "bd_vmaf": self.bd_vmaf,
            "delta_energy_pct": self.delta_energy_pct,
            "delta_storage_pct": self.delta_storage_pct,
            "mean_segment_time_s": self.mean_segment_time_s,
            "segments": list(self.segments),
        }


def _by_id(segments: Iterable[EvaluatedSegment], label: str) -> dict[str, EvaluatedSegment]:
    out: dict[str, EvaluatedSegment] = {}
    for seg in segments:
        if seg.segment_id in out:
            raise SegmentMismatch(f"{label} lists segment {seg.segment_id!r} twice")
        out[seg.segment_id] = seg
    if not out:
        raise SegmentMismatch(f"{label} contains no segments")
    return out


def compare_schemes(
    baseline: Iterable[EvaluatedSegment],
    candidate: Iterable[EvaluatedSegment],
    *,
    kappa: float = 1.0,
    segment_duration_s: float = 4.0,
) -> SchemeReport:
    """Compare two evaluated ladder sets over identical segments.

    Per-segment BD failures (too few points, no overlap, degenerate fits)
    are recorded in the breakdown and excluded from the averages instead of
    aborting the aggregate.
    """
    base = _by_id(baseline, "baseline")
    cand = _by_id(candidate, "candidate")
    if set(base) != set(cand):
        only_base = sorted(set(base) - set(cand))
        only_cand = sorted(set(cand) - set(base))
        raise SegmentMismatch(
            f"segment sets differ (baseline-only {only_base}, candidate-only {only_cand})"
        )
    bd_sums: dict[str, list[float]] = {
        "bd_rate_psnr": [],
        "bd_rate_vmaf": [],
        "bd_psnr": [],
        "bd_vmaf": [],
    }
    breakdown: list[dict] = []
    base_energy = base_storage = 0.0
    cand_energy = cand_storage = 0.0
    cand_times: list[float] = []
    for segment_id in sorted(base):
        b_seg = base[segment_id]
        c_seg = cand[segment_id]
        entry: dict = {"segment_id": segment_id}
        for kind in METRIC_KINDS:
            try:
                rate_delta = bd_rate(b_seg.curve(kind), c_seg.curve(kind))
                quality_delta = bd_quality(b_seg.curve(kind), c_seg.curve(kind))
            except (KeyError, MetricsError) as exc:
                entry[f"bd_error_{kind}"] = str(exc)
                continue
            entry[f"bd_rate_{kind}"] = rate_delta
            entry[f"bd_{kind}"] = quality_delta
            bd_sums[f"bd_rate_{kind}"].append(rate_delta)
            bd_sums[f"bd_{kind}"].append(quality_delta)
        entry["baseline_time_s"] = segment_encode_time(b_seg.times)
        entry["candidate_time_s"] = segment_encode_time(c_seg.times)
        cand_times.append(entry["candidate_time_s"])
        base_energy += encoding_energy(b_seg.times, kappa)
        cand_energy += encoding_energy(c_seg.times, kappa)
        base_storage += b_seg.total_bitrate * segment_duration_s
        cand_storage += c_seg.total_bitrate * segment_duration_s
        breakdown.append(entry)
    if base_energy == 0 or base_storage == 0:
        raise MetricsError("baseline energy/storage must be nonzero for relative deltas")

    def _mean(values: list[float]) -> float | None:
        return float(np.mean(values)) if values else None

    return SchemeReport(
        bd_rate_psnr=_mean(bd_sums["bd_rate_psnr"]),
        bd_rate_vmaf=_mean(bd_sums["bd_rate_vmaf"]),
        bd_psnr=_mean(bd_sums["bd_psnr"]),
        bd_vmaf=_mean(bd_sums["bd_vmaf"]),
        delta_energy_pct=100.0 * (cand_energy - base_energy) / base_energy,
        delta_storage_pct=100.0 * (cand_storage - base_storage) / base_storage,
        mean_segment_time_s=float(np.mean(cand_times)),
        segments=tuple(breakdown),
    )


def load_evaluation_csv(source: Iterable[str]) -> tuple[str, list[EvaluatedSegment]]:
    """Read one scheme's evaluated ladders.

    Rows with the same (segment, bitrate, resolution) describe one
    representation; each may contribute one quality metric and all must
    agree on the encode time.  The file must contain exactly one scheme
    label.  Returns (scheme name, segments in first-appearance order).
    """
    numbered = [
        (lineno, line)
        for lineno, line in enumerate(source, start=1)
        if line.strip() and not line.startswith("#")
    ]
    if not numbered:
        raise SegmentMismatch("evaluation CSV is empty")
    rows = list(csv.reader(line for _, line in numbered))
    linenos = [n for n, _ in numbered]
    if tuple(rows[0]) != EVALUATION_CSV_HEADER:
        raise SegmentMismatch(
            f"line {linenos[0]}: header must be {','.join(EVALUATION_CSV_HEADER)}"
        )
    schemes: set[str] = set()
    # segment -> rep key -> (time, {metric: quality})
    segments: dict[str, dict[tuple[float, int], tuple[float, dict[str, float]]]] = {}
    for lineno, row in zip(linenos[1:], rows[1:]):
        if len(row) != len(EVALUATION_CSV_HEADER):
            raise SegmentMismatch(
                f"line {lineno}: expected {len(EVALUATION_CSV_HEADER)} fields, got {len(row)}"
            )
        segment_id, scheme, bitrate_s, resolution_s, metric, quality_s, time_s = row
        schemes.add(scheme)
        if metric not in METRIC_KINDS:
            raise MetricKindMismatch(f"line {lineno}: unknown quality metric {metric!r}")
        try:
            bitrate = float(bitrate_s)
            resolution = int(resolution_s)
            quality = float(quality_s)
            encode_time = float(time_s)
        except ValueError as exc:
            raise SegmentMismatch(f"line {lineno}: {exc}") from None
        key = (bitrate, resolution)
        reps = segments.setdefault(segment_id, {})
        if key in reps:
            known_time, qualities = reps[key]
            if known_time != encode_time:
                raise SegmentMismatch(
                    f"line {lineno}: encode time {encode_time} contradicts {known_time} "
                    f"for the same representation"
                )
            if metric in qualities:
                raise SegmentMismatch(
                    f"line {lineno}: duplicate {metric} quality for one representation"
                )
            qualities[metric] = quality
        else:
            reps[key] = (encode_time, {metric: quality})
    if len(schemes) != 1:
        raise SegmentMismatch(f"evaluation CSV must hold exactly one scheme, got {sorted(schemes)}")
    out = [
        EvaluatedSegment(
            segment_id=segment_id,
            reps=tuple(
                EvaluatedRep(bitrate=b, resolution=r, encode_time=t, qualities=q)
                for (b, r), (t, q) in sorted(reps.items())
            ),
        )
        for segment_id, reps in segments.items()
    ]
    return schemes.pop(), out
