"""Shared chaos bookkeeping: trajectory records, occupancy histograms,
stretching-number series and the histogram-distance chaos classifier."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

__all__ = [
    "TrajectoryRecord",
    "DeviationState",
    "OccupancyHistogram",
    "ChaosVerdict",
    "occupancy",
    "histogram_counts",
    "histogram_distance",
    "classify_trajectory",
]


@dataclass(frozen=True)
class TrajectoryRecord:
    """Fixed-cadence samples of one trajectory plus integrator diagnostics."""

    initial: tuple
    times: np.ndarray = field(repr=False)
    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    status: int
    rejected_steps: int = 0
    accepted_steps: int = 0
    min_density_seen: float = math.nan

    @property
    def aborted(self) -> bool:
        return self.status != kernels.STATUS_OK

    @property
    def escaped(self) -> bool:
        return self.status == kernels.STATUS_ESCAPED

    def __post_init__(self):
        if self.times.size:
            if not np.all(np.diff(self.times) > 0.0):
                raise ValueError("sample times must be strictly increasing")
            if not (np.all(np.isfinite(self.xs)) and np.all(np.isfinite(self.ys))):
                raise ValueError("trajectory samples must be finite")


@dataclass(frozen=True)
class DeviationState:
    """Deviation magnitudes, stretching numbers and the finite-time
    Lyapunov series chi(t) at checkpoints t = k * renorm_interval."""

    renorm_interval: float
    separation: float
    xi: np.ndarray = field(repr=False)
    stretchings: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    status: int = kernels.STATUS_OK

    @property
    def times(self) -> np.ndarray:
        return self.renorm_interval * np.arange(1, self.stretchings.size + 1)

    @property
    def truncated(self) -> bool:
        return self.status != kernels.STATUS_OK

    @staticmethod
    def from_stretchings(alphas, renorm_interval, separation, xi=None, status=kernels.STATUS_OK):
        alphas = np.asarray(alphas, dtype=float)
        steps = np.arange(1, alphas.size + 1, dtype=float)
        chi = np.cumsum(alphas) / (steps * renorm_interval)
        if xi is None:
            xi = separation * np.exp(alphas)
        return DeviationState(
            renorm_interval=renorm_interval,
            separation=separation,
            xi=np.asarray(xi, dtype=float),
            stretchings=alphas,
            chi=chi,
            status=status,
        )


@dataclass(frozen=True)
class OccupancyHistogram:
    """Visit counts over a regular grid of square bins."""

    region: tuple
    bin_size: float
    counts: np.ndarray = field(repr=False)
    total: int
    out_of_region: int = 0

    def normalized(self) -> np.ndarray:
        if self.total == 0:
            return self.counts.astype(float)
        return self.counts / float(self.total)

    def bin_centers(self):
        xmin, xmax, ymin, ymax = self.region
        nx, ny = self.counts.shape
        xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
        ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
        return xs, ys


def histogram_counts(xs, ys, region, bin_size) -> OccupancyHistogram:
    """Bin (x, y) samples; samples outside the region are counted apart."""
    xmin, xmax, ymin, ymax = region
    nx = int(round((xmax - xmin) / bin_size))
    ny = int(round((ymax - ymin) / bin_size))
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    inside = (xs >= xmin) & (xs < xmax) & (ys >= ymin) & (ys < ymax)
    ix = ((xs[inside] - xmin) / bin_size).astype(np.int64)
    iy = ((ys[inside] - ymin) / bin_size).astype(np.int64)
    np.clip(ix, 0, nx - 1, out=ix)
    np.clip(iy, 0, ny - 1, out=iy)
    counts = np.zeros((nx, ny), dtype=np.int64)
    np.add.at(counts, (ix, iy), 1)
    return OccupancyHistogram(
        region=tuple(region),
        bin_size=float(bin_size),
        counts=counts,
        total=int(inside.sum()),
        out_of_region=int(xs.size - inside.sum()),
    )


def occupancy(record: TrajectoryRecord, bin_size: float = 0.05, region=(-6.0, 6.0, -6.0, 6.0)) -> OccupancyHistogram:
    """Visit-count histogram of a trajectory's fixed-cadence samples."""
    if record.times.size == 0:
        raise ValueError("cannot build an occupancy histogram from an empty record")
    return histogram_counts(record.xs, record.ys, region, bin_size)


def histogram_distance(a, b) -> float:
    """Frobenius distance between unit-Frobenius-normalized matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("histogram shapes differ: %r vs %r" % (a.shape, b.shape))
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return math.sqrt(2.0)
    return float(np.linalg.norm(a / na - b / nb))


@dataclass(frozen=True)
class ChaosVerdict:
    is_chaotic: bool
    onset_time: float | None
    distance_to_reference: float
    method: str
    undetermined: bool = False

    def __post_init__(self):
        if self.is_chaotic != (self.onset_time is not None) and not self.undetermined:
            raise ValueError("onset_time must be present exactly when the verdict is chaotic")


def classify_trajectory(
    record: TrajectoryRecord,
    reference: np.ndarray,
    threshold: float,
    region=(-6.0, 6.0, -6.0, 6.0),
    bin_size: float = 0.2,
    window: float | None = None,
) -> ChaosVerdict:
    """Ergodicity-based verdict: the trajectory is chaotic when its visit
    histogram comes close (Frobenius distance) to the reference picture.

    The onset is the end of the first trailing window whose windowed
    histogram crosses the threshold; window=None uses a quarter of the
    record (cumulative behaviour dominates the verdict either way).
    """
    t_total = record.times[-1] - record.times[0] if record.times.size else 0.0
    if window is None:
        window = 0.25 * t_total
    if record.times.size == 0 or t_total < window or window <= 0.0:
        return ChaosVerdict(False, None, math.nan, "colorplot", undetermined=True)

    full = histogram_counts(record.xs, record.ys, region, bin_size)
    distance = histogram_distance(full.counts, reference)
    if distance >= threshold:
        return ChaosVerdict(False, None, distance, "colorplot")

    onset = record.times[-1]
    n_windows = int(t_total // window)
    for k in range(1, n_windows + 1):
        t_hi = record.times[0] + k * window
        mask = (record.times >= t_hi - window) & (record.times <= t_hi)
        part = histogram_counts(record.xs[mask], record.ys[mask], region, bin_size)
        if histogram_distance(part.counts, reference) < threshold:
            onset = t_hi
            break
    return ChaosVerdict(True, float(onset), distance, "colorplot")
