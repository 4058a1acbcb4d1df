"""Quantum trajectory engine: stiff guidance-equation integration,
stretching-number chaos detection, Born-rule ensembles, nodal-point
colorplots and the deformation-time sweep."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import SpectralModel
from .diagnostics import DeviationState, OccupancyHistogram, TrajectoryRecord, histogram_counts
from .wavefunction import (
    StateVector,
    deformation_distance,
    density_heatmap,
    evolve,
    find_nodes,
    wavefunction_grid,
)

__all__ = [
    "IntegratorConfig",
    "GuidedWave",
    "FractionCurve",
    "integrate_bohmian",
    "lyapunov_series",
    "born_sample",
    "ergodic_reference",
    "node_visit_colorplot",
    "chaotic_fraction_curve",
    "deformation_times",
    "DEFAULT_CHI_WINDOW",
    "DEFAULT_CHI_THRESHOLD",
]

# windowed stretching-number onset defaults, calibrated on the ordered
# (epsilon = 0) and strongly chaotic (epsilon = 0.05) reference runs
DEFAULT_CHI_WINDOW = 25.0
DEFAULT_CHI_THRESHOLD = 0.02


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive-step control for the guidance equation.

    Stiffness is localized at nodal-point passages; besides the embedded
    error estimate, steps are rejected whenever the density drops below
    1e-6 times its running median while the step is still large.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_step: float = 0.5
    min_step: float = 1e-12
    first_step: float = 1e-3

    def __post_init__(self):
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if not self.min_step < self.max_step:
            raise ValueError("min_step must be below max_step")


@dataclass
class GuidedWave:
    """A spectral model plus one initial state: the guiding wavefunction."""

    spectral: SpectralModel
    projection: np.ndarray = field(repr=False)
    _plan: kernels.WavePlan | None = field(default=None, repr=False, compare=False)

    def plan(self) -> kernels.WavePlan:
        if self._plan is None:
            self._plan = kernels.make_wave_plan(self.spectral, self.projection)
        return self._plan

    def state_at(self, t: float) -> StateVector:
        return evolve(self.projection, self.spectral, t)


def integrate_bohmian(
    initial,
    wave: GuidedWave,
    t_end: float,
    config: IntegratorConfig | None = None,
    cadence: float = 0.1,
) -> TrajectoryRecord:
    """One quantum trajectory sampled every `cadence` time units."""
    config = config or IntegratorConfig()
    x0, y0 = float(initial[0]), float(initial[1])
    n_samples = int(math.floor(t_end / cadence + 1e-9)) + 1
    ts = np.empty(n_samples)
    xs = np.empty(n_samples)
    ys = np.empty(n_samples)
    status, n_filled, n_accept, n_reject, min_den = kernels.integrate_bohmian_kernel(
        wave.plan(),
        x0,
        y0,
        t_end,
        cadence,
        config.abs_tol,
        config.rel_tol,
        config.max_step,
        config.min_step,
        config.first_step,
        ts,
        xs,
        ys,
    )
    return TrajectoryRecord(
        initial=(x0, y0),
        times=ts[:n_filled].copy(),
        xs=xs[:n_filled].copy(),
        ys=ys[:n_filled].copy(),
        status=int(status),
        rejected_steps=int(n_reject),
        accepted_steps=int(n_accept),
        min_density_seen=float(min_den),
    )


def lyapunov_series(
    initial,
    wave: GuidedWave,
    t_end: float,
    renorm_interval: float = 1.0,
    config: IntegratorConfig | None = None,
    separation: float = 1e-8,
) -> DeviationState:
    """Finite-time Lyapunov series by two-trajectory shadowing.

    The partner trajectory starts `separation` away and is pulled back to
    that distance at every checkpoint; the log ratios are the stretching
    numbers whose running time average is chi(t)."""
    config = config or IntegratorConfig()
    n_check = int(round(t_end / renorm_interval))
    xi = np.empty(n_check)
    alphas = np.empty(n_check)
    status, n_filled = kernels.lyapunov_pair_kernel(
        wave.plan(),
        float(initial[0]),
        float(initial[1]),
        separation,
        renorm_interval,
        n_check,
        config.abs_tol,
        config.rel_tol,
        config.max_step,
        config.min_step,
        config.first_step,
        xi,
        alphas,
    )
    return DeviationState.from_stretchings(
        alphas[:n_filled].copy(),
        renorm_interval,
        separation,
        xi=xi[:n_filled].copy(),
        status=int(status),
    )


def born_sample(state: StateVector, count: int, seed: int, region=(-6.0, 6.0, -6.0, 6.0)) -> np.ndarray:
    """Deterministic rejection sample of `count` positions from |Psi|^2.

    Proposed uniformly over the sub-rectangle where the density exceeds
    1e-8 of its peak; seeded, so identical inputs give identical draws.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    xmin, xmax, ymin, ymax = region
    xs = np.linspace(xmin, xmax, 241)
    ys = np.linspace(ymin, ymax, 241)
    den = np.abs(wavefunction_grid(state, xs, ys)) ** 2
    peak = float(den.max())
    mask = den >= 1e-8 * peak
    ix, iy = np.where(mask)
    pad = xs[1] - xs[0]
    box = (xs[ix.min()] - pad, xs[ix.max()] + pad, ys[iy.min()] - pad, ys[iy.max()] + pad)
    envelope = 1.0001 * peak

    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.empty((count, 2))
    have = 0
    plan = state.plan()
    while have < count:
        n_prop = max(64, 2 * (count - have))
        px = rng.uniform(box[0], box[1], n_prop)
        py = rng.uniform(box[2], box[3], n_prop)
        u = rng.uniform(0.0, envelope, n_prop)
        for k in range(n_prop):
            pr, pi, *_ = kernels.sample_point(plan, state.time, px[k], py[k])
            if u[k] < pr * pr + pi * pi:
                out[have] = (px[k], py[k])
                have += 1
                if have == count:
                    break
    return out


def ergodic_reference(
    wave: GuidedWave,
    horizon: float,
    region=(-6.0, 6.0, -6.0, 6.0),
    bin_size: float = 0.2,
    sample_dt: float = 1.0,
) -> np.ndarray:
    """Time-averaged density on the occupancy grid over [0, horizon].

    Chaotic trajectories are ergodic with respect to this picture, which
    serves as the reference colorplot for the classifier."""
    xmin, xmax, ymin, ymax = region
    nx = int(round((xmax - xmin) / bin_size))
    ny = int(round((ymax - ymin) / bin_size))
    xs = xmin + (np.arange(nx) + 0.5) * bin_size
    ys = ymin + (np.arange(ny) + 0.5) * bin_size
    acc = np.zeros((nx, ny))
    n = 0
    for t in np.arange(0.0, horizon + 0.5 * sample_dt, sample_dt):
        acc += np.abs(wavefunction_grid(wave.state_at(t), xs, ys)) ** 2
        n += 1
    return acc / n


def node_visit_colorplot(
    wave: GuidedWave,
    t_end: float,
    bin_size: float = 0.05,
    cadence: float = 0.05,
    region=(-6.0, 6.0, -6.0, 6.0),
    grid_step: float = 0.05,
) -> OccupancyHistogram:
    """Histogram of nodal-point positions sampled every `cadence`."""
    all_x = []
    all_y = []
    for t in np.arange(0.0, t_end + 0.5 * cadence, cadence):
        nodes = find_nodes(wave.state_at(t), region=region, grid_step=grid_step)
        for x, y, _ in nodes.nodes:
            all_x.append(x)
            all_y.append(y)
    return histogram_counts(np.array(all_x), np.array(all_y), region, bin_size)


@dataclass(frozen=True)
class FractionCurve:
    """Chaotic fraction of an ensemble as a function of time."""

    times: np.ndarray = field(repr=False)
    fraction: np.ndarray = field(repr=False)
    onsets: np.ndarray = field(repr=False)  # nan where never flagged
    n_total: int
    n_aborted: int
    method: str

    def confidence_band(self, z: float = 1.96):
        """Binomial (Wald) band around the fraction curve."""
        n = max(1, self.n_total - self.n_aborted)
        half = z * np.sqrt(np.clip(self.fraction * (1.0 - self.fraction), 0.0, None) / n)
        return np.clip(self.fraction - half, 0.0, 1.0), np.clip(self.fraction + half, 0.0, 1.0)


def _windowed_onsets(alphas, filled, statuses, renorm_interval, window, threshold):
    """First time the trailing-window mean stretching exceeds threshold."""
    n_traj = alphas.shape[0]
    w = max(1, int(round(window / renorm_interval)))
    onsets = np.full(n_traj, np.nan)
    for i in range(n_traj):
        n = int(filled[i])
        if n == 0:
            continue
        series = alphas[i, :n]
        csum = np.concatenate(([0.0], np.cumsum(series)))
        for k in range(w, n + 1):
            mean = (csum[k] - csum[k - w]) / (w * renorm_interval)
            if mean > threshold:
                onsets[i] = k * renorm_interval
                break
    return onsets


def chaotic_fraction_curve(
    ensemble: np.ndarray,
    wave: GuidedWave,
    t_end: float,
    window: float = DEFAULT_CHI_WINDOW,
    chi_threshold: float = DEFAULT_CHI_THRESHOLD,
    config: IntegratorConfig | None = None,
    renorm_interval: float = 1.0,
    separation: float = 1e-8,
    curve_dt: float | None = None,
) -> FractionCurve:
    """Fraction of trajectories flagged chaotic up to each time.

    Per-trajectory onset is the first trailing window of length `window`
    whose mean stretching number exceeds `chi_threshold` (the cheap,
    windowed Lyapunov criterion; colorplot classification of full records
    is available separately through the classifier).  Aborted
    trajectories are excluded from the fraction and reported.
    """
    config = config or IntegratorConfig()
    ensemble = np.asarray(ensemble, dtype=float)
    n_traj = ensemble.shape[0]
    n_check = int(round(t_end / renorm_interval))
    alphas = np.zeros((n_traj, n_check))
    statuses = np.zeros(n_traj, dtype=np.int64)
    filled = np.zeros(n_traj, dtype=np.int64)
    kernels.ensemble_lyapunov_kernel(
        wave.plan(),
        np.ascontiguousarray(ensemble[:, 0]),
        np.ascontiguousarray(ensemble[:, 1]),
        separation,
        renorm_interval,
        n_check,
        config.abs_tol,
        config.rel_tol,
        config.max_step,
        config.min_step,
        config.first_step,
        alphas,
        statuses,
        filled,
    )
    onsets = _windowed_onsets(alphas, filled, statuses, renorm_interval, window, chi_threshold)
    ok = statuses == kernels.STATUS_OK
    n_aborted = int(n_traj - ok.sum())

    if curve_dt is None:
        curve_dt = max(renorm_interval, t_end / 400.0)
    times = np.arange(curve_dt, t_end + 0.5 * curve_dt, curve_dt)
    denom = max(1, int(ok.sum()))
    fraction = np.array([np.sum(ok & (onsets <= t)) / denom for t in times])
    return FractionCurve(
        times=times,
        fraction=fraction,
        onsets=onsets,
        n_total=n_traj,
        n_aborted=n_aborted,
        method="windowed-lyapunov",
    )


def deformation_times(
    epsilons,
    wave_factory,
    threshold: float = 0.1,
    cadence: float | None = None,
    t_max: float | None = None,
    region=(-6.0, 6.0, -6.0, 6.0),
    resolution: int = 80,
):
    """First time the density deformation metric crosses `threshold`,
    for each coupling strength.

    wave_factory(eps) must return the GuidedWave for that coupling.
    Returns a list of (eps, t_c) with t_c = None when the horizon is
    reached without crossing."""
    results = []
    for eps in epsilons:
        wave = wave_factory(float(eps))
        ref = wave.state_at(0.0)
        horizon = t_max if t_max is not None else max(100.0, 0.6 / max(eps, 1e-6) ** 2)
        dt = cadence if cadence is not None else max(0.25, horizon / 2000.0)
        t_c = None
        t = dt
        while t <= horizon + 0.5 * dt:
            d = deformation_distance(wave.state_at(t), ref, region=region, resolution=resolution)
            if d > threshold:
                t_c = float(t)
                break
            t += dt
        results.append((float(eps), t_c))
    return results
