"""Classical flow of the coupled oscillators: symplectic integration,
Poincare sections, rotation numbers, the approximate third integral,
curves of zero velocity and the chaotic-area estimate."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import OscillatorParams
from .diagnostics import DeviationState

__all__ = [
    "ClassicalConfig",
    "ClassicalState",
    "ClassicalTrajectory",
    "SectionSet",
    "CZVCurve",
    "ThirdIntegralValue",
    "CentralOrbit",
    "RotationCurve",
    "AreaFraction",
    "ResonantFrequencyError",
    "NewtonDivergenceError",
    "integrate_classical",
    "poincare_section",
    "section_from_axis",
    "first_return",
    "czv",
    "saddle_energy",
    "escape_perturbation",
    "third_integral",
    "third_integral_section",
    "third_integral_drift",
    "central_periodic_orbit",
    "rotation_curve",
    "chaotic_area_fraction",
    "classical_lyapunov",
]


class ResonantFrequencyError(ValueError):
    """The 4 omega_y^2 - omega_x^2 denominator is too close to zero."""


class NewtonDivergenceError(RuntimeError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class ClassicalConfig:
    """Fixed-step symplectic integration settings.

    The 6th-order composition keeps |dE/E| bounded near h^6 for all run
    lengths, so no step adaptation is needed for these bound orbits."""

    step: float = 0.02
    escape_radius: float = 50.0

    def __post_init__(self):
        if self.step <= 0.0 or self.escape_radius <= 0.0:
            raise ValueError("step and escape_radius must be positive")


@dataclass(frozen=True)
class ClassicalState:
    x: float
    y: float
    vx: float
    vy: float

    def energy(self, params: OscillatorParams) -> float:
        return kernels.classical_energy(
            self.x, self.y, self.vx, self.vy, params.omega_x**2, params.omega_y**2, params.epsilon
        )


def state_on_section(x: float, vx: float, energy: float, params: OscillatorParams) -> ClassicalState:
    """Section point (x, vx) lifted to phase space: y = 0, vy > 0 from E."""
    vy2 = 2.0 * energy - vx * vx - params.omega_x**2 * x * x
    if vy2 <= 0.0:
        raise ValueError("section point (%g, %g) is outside the energy shell E=%g" % (x, vx, energy))
    return ClassicalState(x=x, y=0.0, vx=vx, vy=math.sqrt(vy2))


@dataclass(frozen=True)
class ClassicalTrajectory:
    initial: ClassicalState
    times: np.ndarray = field(repr=False)
    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    vxs: np.ndarray = field(repr=False)
    vys: np.ndarray = field(repr=False)
    status: int
    n_steps: int

    @property
    def escaped(self) -> bool:
        return self.status == kernels.STATUS_ESCAPED

    def energy_series(self, params: OscillatorParams) -> np.ndarray:
        return (
            0.5
            * (
                self.vxs**2
                + self.vys**2
                + params.omega_x**2 * self.xs**2
                + params.omega_y**2 * self.ys**2
            )
            + params.epsilon * self.xs * self.ys**2
        )

    def relative_energy_drift(self, params: OscillatorParams) -> float:
        e = self.energy_series(params)
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))


def integrate_classical(
    initial: ClassicalState,
    params: OscillatorParams,
    t_end: float,
    config: ClassicalConfig | None = None,
    cadence: float = 0.1,
) -> ClassicalTrajectory:
    """Integrate the flow, sampling roughly every `cadence` time units."""
    config = config or ClassicalConfig()
    cap = int(math.floor(t_end / cadence)) + 3
    ts = np.empty(cap)
    xs = np.empty(cap)
    ys = np.empty(cap)
    vxs = np.empty(cap)
    vys = np.empty(cap)
    status, n, n_steps = kernels.integrate_classical_kernel(
        initial.x,
        initial.y,
        initial.vx,
        initial.vy,
        config.step,
        t_end,
        cadence,
        config.escape_radius,
        params.omega_x**2,
        params.omega_y**2,
        params.epsilon,
        ts,
        xs,
        ys,
        vxs,
        vys,
    )
    return ClassicalTrajectory(
        initial=initial,
        times=ts[:n].copy(),
        xs=xs[:n].copy(),
        ys=ys[:n].copy(),
        vxs=vxs[:n].copy(),
        vys=vys[:n].copy(),
        status=int(status),
        n_steps=int(n_steps),
    )


@dataclass(frozen=True)
class SectionSet:
    """Upward crossings of y = 0: section coordinates and crossing times."""

    x: np.ndarray = field(repr=False)
    vx: np.ndarray = field(repr=False)
    vy: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    status: int

    @property
    def escaped(self) -> bool:
        return self.status == kernels.STATUS_ESCAPED

    def __len__(self):
        return self.x.size


def poincare_section(
    initial: ClassicalState,
    params: OscillatorParams,
    n_crossings: int,
    config: ClassicalConfig | None = None,
    t_max: float | None = None,
) -> SectionSet:
    """Collect n_crossings section points along one orbit."""
    config = config or ClassicalConfig()
    if t_max is None:
        t_max = 2.5 * n_crossings * 2.0 * math.pi / params.omega_y + 50.0
    out_x = np.empty(n_crossings)
    out_vx = np.empty(n_crossings)
    out_vy = np.empty(n_crossings)
    out_t = np.empty(n_crossings)
    found, status = kernels.section_kernel(
        initial.x,
        initial.y,
        initial.vx,
        initial.vy,
        config.step,
        n_crossings,
        t_max,
        config.escape_radius,
        params.omega_x**2,
        params.omega_y**2,
        params.epsilon,
        out_x,
        out_vx,
        out_vy,
        out_t,
    )
    return SectionSet(
        x=out_x[:found].copy(),
        vx=out_vx[:found].copy(),
        vy=out_vy[:found].copy(),
        times=out_t[:found].copy(),
        status=int(status),
    )


def section_from_axis(
    x0: float,
    energy: float,
    params: OscillatorParams,
    n_crossings: int,
    config: ClassicalConfig | None = None,
) -> SectionSet:
    """Section of the orbit launched from (x0, vx=0) on the section plane."""
    return poincare_section(state_on_section(x0, 0.0, energy, params), params, n_crossings, config)


def first_return(
    x: float,
    vx: float,
    energy: float,
    params: OscillatorParams,
    config: ClassicalConfig | None = None,
):
    """One application of the section return map (x, vx) -> (x', vx')."""
    section = poincare_section(state_on_section(x, vx, energy, params), params, 1, config)
    if len(section) < 1:
        raise NewtonDivergenceError("orbit left the section before returning", last_iterate=(x, vx))
    return float(section.x[0]), float(section.vx[0])


# ---------------------------------------------------------------------------
# curve of zero velocity
# ---------------------------------------------------------------------------


def saddle_energy(params: OscillatorParams) -> float:
    """Potential value at the off-axis saddle, the escape threshold."""
    if params.epsilon == 0.0:
        return math.inf
    return params.omega_x**2 * params.omega_y**4 / (8.0 * params.epsilon**2)


@dataclass(frozen=True)
class CZVCurve:
    energy: float
    xs: np.ndarray = field(repr=False)
    y_squared: np.ndarray = field(repr=False)
    open_curve: bool
    saddle: float

    def polyline(self):
        """(x, y) pairs tracing the upper branch y >= 0."""
        return np.column_stack([self.xs, np.sqrt(self.y_squared)])


def czv(params: OscillatorParams, energy: float, n_points: int = 512) -> CZVCurve:
    """Boundary of the energetically allowed region, y^2(x) along x.

    Open exactly when the denominator root -omega_y^2/(2 eps) falls inside
    the span where the numerator 2E - omega_x^2 x^2 is positive, i.e. when
    E reaches the saddle energy."""
    if energy <= 0.0:
        raise ValueError("energy must be positive")
    wx2 = params.omega_x**2
    wy2 = params.omega_y**2
    span = math.sqrt(2.0 * energy) / params.omega_x
    if params.epsilon > 0.0:
        root = -wy2 / (2.0 * params.epsilon)
        open_curve = -span <= root
    else:
        open_curve = False
    xs = np.linspace(-span, span, n_points)
    num = 2.0 * energy - wx2 * xs**2
    den = wy2 + 2.0 * params.epsilon * xs
    with np.errstate(divide="ignore", invalid="ignore"):
        y2 = num / den
    keep = (y2 >= 0.0) & np.isfinite(y2)
    return CZVCurve(
        energy=float(energy),
        xs=xs[keep],
        y_squared=y2[keep],
        open_curve=bool(open_curve),
        saddle=saddle_energy(params),
    )


def escape_perturbation(energy_of_eps, params: OscillatorParams, lo: float, hi: float, tol: float = 1e-5) -> float:
    """Coupling strength where the CZV at E(eps) first opens.

    energy_of_eps maps eps to the total energy used for the classical
    comparison run; bisection on openness of the corresponding CZV."""

    def is_open(eps):
        p = OscillatorParams(
            epsilon=eps,
            omega_x=params.omega_x,
            omega_y=params.omega_y,
            mass_x=params.mass_x,
            mass_y=params.mass_y,
            hbar=params.hbar,
        )
        return czv(p, energy_of_eps(eps)).open_curve

    if is_open(lo):
        raise ValueError("lower bracket %g already escapes" % lo)
    if not is_open(hi):
        raise ValueError("upper bracket %g does not escape" % hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_open(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# third integral
# ---------------------------------------------------------------------------


def _resonance_denominator(params: OscillatorParams) -> float:
    d = 4.0 * params.omega_y**2 - params.omega_x**2
    if abs(d) < 1e-6:
        raise ResonantFrequencyError(
            "4*omega_y^2 - omega_x^2 = %.3e is resonant; the first-order integral is singular" % d
        )
    return d


def third_integral(state: ClassicalState, params: OscillatorParams) -> float:
    """First-order approximate integral of the coupled flow."""
    d = _resonance_denominator(params)
    wx2 = params.omega_x**2
    wy2 = params.omega_y**2
    x, y, vx, vy = state.x, state.y, state.vx, state.vy
    base = 0.5 * (vx * vx + wx2 * x * x)
    corr = (params.epsilon / d) * ((2.0 * wy2 - wx2) * x * y * y + 2.0 * x * vy * vy - 2.0 * y * vx * vy)
    return base + corr


def third_integral_section(x: float, vx: float, params: OscillatorParams, energy: float) -> float:
    """Section form of the integral, with vy^2 eliminated through E."""
    d = _resonance_denominator(params)
    wx2 = params.omega_x**2
    vy2 = 2.0 * energy - wx2 * x * x - vx * vx
    return 0.5 * (vx * vx + wx2 * x * x) + 2.0 * params.epsilon * x * vy2 / d


@dataclass(frozen=True)
class ThirdIntegralValue:
    value: float  # at the first sample
    drift: float  # max |Phi(t) - Phi(0)| along the run


def third_integral_drift(trajectory: ClassicalTrajectory, params: OscillatorParams) -> ThirdIntegralValue:
    d = _resonance_denominator(params)
    wx2 = params.omega_x**2
    wy2 = params.omega_y**2
    x, y, vx, vy = trajectory.xs, trajectory.ys, trajectory.vxs, trajectory.vys
    phi = 0.5 * (vx**2 + wx2 * x**2) + (params.epsilon / d) * (
        (2.0 * wy2 - wx2) * x * y**2 + 2.0 * x * vy**2 - 2.0 * y * vx * vy
    )
    return ThirdIntegralValue(value=float(phi[0]), drift=float(np.max(np.abs(phi - phi[0]))))


# ---------------------------------------------------------------------------
# central periodic orbit and rotation numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CentralOrbit:
    x: float
    stable: bool
    newton_iterations: int
    jacobian_trace: float


def central_periodic_orbit(
    params: OscillatorParams,
    energy: float,
    config: ClassicalConfig | None = None,
    seed: float | None = None,
    tol: float = 1e-11,
    max_iterations: int = 25,
) -> CentralOrbit:
    """Newton iteration for the symmetric fixed point of the return map.

    The orbit crosses the section at vx = 0, so the residual is the vx of
    the first return from (x, 0); the seed -4 E eps is the leading-order
    location of the fixed point."""
    if seed is None:
        seed = -4.0 * energy * params.epsilon
    x = seed

    def residual(xv):
        _, vx1 = first_return(xv, 0.0, energy, params, config)
        return vx1

    delta = 1e-7
    iterations = 0
    g = residual(x)
    while abs(g) > tol:
        iterations += 1
        if iterations > max_iterations:
            raise NewtonDivergenceError("central-orbit Newton exceeded %d iterations" % max_iterations, last_iterate=x)
        gp = (residual(x + delta) - residual(x - delta)) / (2.0 * delta)
        if gp == 0.0 or not math.isfinite(gp):
            raise NewtonDivergenceError("central-orbit Newton hit a flat residual", last_iterate=x)
        step = g / gp
        x -= step
        g = residual(x)

    # linearized return map on the energy shell around the fixed point
    d = 1e-6
    xp_x, vxp_x = first_return(x + d, 0.0, energy, params, config)
    xm_x, vxm_x = first_return(x - d, 0.0, energy, params, config)
    xp_v, vxp_v = first_return(x, d, energy, params, config)
    xm_v, vxm_v = first_return(x, -d, energy, params, config)
    m00 = (xp_x - xm_x) / (2.0 * d)
    m11 = (vxp_v - vxm_v) / (2.0 * d)
    trace = m00 + m11
    return CentralOrbit(x=float(x), stable=bool(abs(trace) < 2.0), newton_iterations=iterations, jacobian_trace=float(trace))


@dataclass(frozen=True)
class RotationCurve:
    center: float
    x0: np.ndarray = field(repr=False)
    rn: np.ndarray = field(repr=False)  # nan where not converged
    converged: np.ndarray = field(repr=False)

    def valid_samples(self):
        return self.x0[self.converged], self.rn[self.converged]


def rotation_number_of_section(section: SectionSet, center: float, omega_x: float = 1.0):
    """Mean fractional angle advance per crossing, seen from the center.

    Returns (rn, converged): converged is False when the two-half means
    disagree, the signature of a chaotic or escaping orbit."""
    if len(section) < 16:
        return math.nan, False
    u = omega_x * (section.x - center)
    v = section.vx
    phi = np.arctan2(v, u)
    dphi = np.diff(phi)
    dphi = np.mod(dphi, 2.0 * math.pi)
    rn = float(np.mean(dphi) / (2.0 * math.pi))
    half = dphi.size // 2
    rn1 = float(np.mean(dphi[:half]) / (2.0 * math.pi))
    rn2 = float(np.mean(dphi[half:]) / (2.0 * math.pi))
    converged = abs(rn1 - rn2) < 2.5e-3 and 0.0 < rn < 1.0
    return rn, converged


def rotation_curve(
    params: OscillatorParams,
    energy: float,
    scan,
    config: ClassicalConfig | None = None,
    n_crossings: int = 220,
    center: float | None = None,
) -> RotationCurve:
    """Rotation number along a scan of section starts (x0, vx=0)."""
    if center is None:
        center = central_periodic_orbit(params, energy, config).x
    scan = np.asarray(scan, dtype=float)
    rn = np.full(scan.size, math.nan)
    ok = np.zeros(scan.size, dtype=bool)
    span2 = 2.0 * energy / params.omega_x**2
    for i, x0 in enumerate(scan):
        if x0 * x0 >= span2 or abs(x0 - center) < 1e-9:
            continue
        section = section_from_axis(x0, energy, params, n_crossings, config)
        if section.escaped or len(section) < n_crossings:
            continue
        value, converged = rotation_number_of_section(section, center, params.omega_x)
        rn[i] = value
        ok[i] = converged
    return RotationCurve(center=float(center), x0=scan, rn=rn, converged=ok)


# ---------------------------------------------------------------------------
# chaotic area and Lyapunov series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AreaFraction:
    fraction: float
    n_allowed: int
    n_chaotic: int
    n_ordered: int
    n_escaped: int
    xs: np.ndarray = field(repr=False)
    vxs: np.ndarray = field(repr=False)
    verdicts: np.ndarray = field(repr=False)  # resolution x resolution, -1 outside


def chaotic_area_fraction(
    params: OscillatorParams,
    energy: float,
    resolution: int = 60,
    t_horizon: float = 5000.0,
    growth_factor: float = 1e6,
    renorm_interval: float = 1.0,
    separation: float = 1e-9,
    config: ClassicalConfig | None = None,
) -> AreaFraction:
    """Fraction of the allowed section area covered by chaotic orbits.

    Every allowed cell center seeds a shadowing pair; a cell is chaotic
    once the accumulated deviation growth reaches growth_factor before
    t_horizon.  Escaping cells are tallied separately."""
    config = config or ClassicalConfig()
    span_x = math.sqrt(2.0 * energy) / params.omega_x
    span_v = math.sqrt(2.0 * energy)
    xs = -span_x + (np.arange(resolution) + 0.5) * (2.0 * span_x / resolution)
    vxs = -span_v + (np.arange(resolution) + 0.5) * (2.0 * span_v / resolution)
    gx, gv = np.meshgrid(xs, vxs, indexing="ij")
    cell_x = np.ascontiguousarray(gx.ravel())
    cell_v = np.ascontiguousarray(gv.ravel())
    verdicts = np.empty(cell_x.size, dtype=np.int64)
    n_renorm_steps = max(1, int(round(renorm_interval / config.step)))
    n_checkpoints = int(round(t_horizon / renorm_interval))
    kernels.area_scan_kernel(
        cell_x,
        cell_v,
        energy,
        separation,
        config.step,
        n_renorm_steps,
        n_checkpoints,
        math.log(growth_factor),
        config.escape_radius,
        params.omega_x**2,
        params.omega_y**2,
        params.epsilon,
        verdicts,
    )
    n_allowed = int(np.sum(verdicts >= 0))
    n_chaotic = int(np.sum(verdicts == kernels.VERDICT_CHAOTIC))
    n_ordered = int(np.sum(verdicts == kernels.VERDICT_ORDERED))
    n_escaped = int(np.sum(verdicts == kernels.VERDICT_ESCAPED))
    return AreaFraction(
        fraction=n_chaotic / n_allowed if n_allowed else 0.0,
        n_allowed=n_allowed,
        n_chaotic=n_chaotic,
        n_ordered=n_ordered,
        n_escaped=n_escaped,
        xs=xs,
        vxs=vxs,
        verdicts=verdicts.reshape(resolution, resolution),
    )


def classical_lyapunov(
    initial: ClassicalState,
    params: OscillatorParams,
    t_end: float,
    renorm_interval: float = 1.0,
    separation: float = 1e-8,
    config: ClassicalConfig | None = None,
) -> DeviationState:
    """Stretching numbers and chi(t) for one classical orbit."""
    config = config or ClassicalConfig()
    n_renorm_steps = max(1, int(round(renorm_interval / config.step)))
    n_checkpoints = int(round(t_end / renorm_interval))
    alphas = np.empty(n_checkpoints)
    verdict, n_filled, _ = kernels.classical_pair_kernel(
        initial.x,
        initial.y,
        initial.vx,
        initial.vy,
        separation,
        config.step,
        n_renorm_steps,
        n_checkpoints,
        math.inf,
        config.escape_radius,
        params.omega_x**2,
        params.omega_y**2,
        params.epsilon,
        alphas,
    )
    status = kernels.STATUS_ESCAPED if verdict == kernels.VERDICT_ESCAPED else kernels.STATUS_OK
    return DeviationState.from_stretchings(
        alphas[:n_filled].copy(), renorm_interval, separation, status=status
    )
