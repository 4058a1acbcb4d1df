"""Initial states, spectral time evolution and wavefunction observables.

Evolution is evaluated in closed form at arbitrary t through the
eigendecomposition, so the wavefunction itself carries no time-stepping
error; only particle trajectories are integrated numerically.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import BasisIndexMap, OscillatorParams, SpectralModel, unperturbed_energy

__all__ = [
    "CoherentSpec",
    "SuperpositionSpec",
    "StateVector",
    "WavefunctionSample",
    "NodeSet",
    "DensityGrid",
    "ZeroDensityError",
    "coherent_coefficients_1d",
    "poisson_weight",
    "project_coherent",
    "project_superposition",
    "evolve",
    "eval_wavefunction",
    "bohm_velocity",
    "average_energy",
    "average_energy_series",
    "mean_average_energy",
    "hamiltonian_expectation",
    "wavefunction_grid",
    "density_heatmap",
    "density_centroid",
    "deformation_distance",
    "find_nodes",
    "coherent_center",
]


class ZeroDensityError(ArithmeticError):
    """Velocity requested at a point where the density underflows."""


@dataclass(frozen=True)
class CoherentSpec:
    """Product of two 1D coherent states, one per axis."""

    amplitude_x: float = 1.0
    amplitude_y: float = 1.0
    phase_x: float = 0.0
    phase_y: float = 0.0
    level_cap: int | None = None

    def __post_init__(self):
        if self.amplitude_x <= 0.0 or self.amplitude_y <= 0.0:
            raise ValueError("coherent amplitudes must be positive")


@dataclass(frozen=True)
class SuperpositionSpec:
    """Finite superposition of unperturbed eigenstates (n_x, n_y, coeff)."""

    terms: tuple = (
        (0, 0, 1.0 / math.sqrt(2.0)),
        (1, 0, 0.5),
        (1, 1, 0.5),
    )

    def __post_init__(self):
        total = sum(abs(complex(c)) ** 2 for _, _, c in self.terms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError("superposition coefficients must have unit norm, got %r" % total)


def coherent_coefficients_1d(a0: float, sigma: float, n_max: int) -> np.ndarray:
    """Level coefficients of a 1D coherent state at t = 0 up to n_max."""
    coeff = np.empty(n_max + 1, dtype=complex)
    coeff[0] = math.exp(-0.5 * a0 * a0)
    z = a0 * complex(math.cos(sigma), math.sin(sigma))
    for n in range(1, n_max + 1):
        coeff[n] = coeff[n - 1] * z / math.sqrt(n)
    return coeff


def poisson_weight(n: int, a0: float) -> float:
    """Probability of level n inside a coherent state of amplitude a0."""
    log_w = -a0 * a0 + 2.0 * n * math.log(a0) - math.lgamma(n + 1.0) if a0 > 0 else (0.0 if n == 0 else -math.inf)
    return math.exp(log_w)


def project_coherent(spec: CoherentSpec, basis: BasisIndexMap) -> np.ndarray:
    """Projections of the coherent product onto the truncated basis.

    The vector is renormalized after truncation; the discarded mass is
    of order 1e-10 for the default amplitudes at cutoff 12.
    """
    cap = basis.cutoff if spec.level_cap is None else spec.level_cap
    if cap > basis.cutoff:
        raise ValueError("level_cap exceeds the basis cutoff")
    ax = coherent_coefficients_1d(spec.amplitude_x, spec.phase_x, cap)
    ay = coherent_coefficients_1d(spec.amplitude_y, spec.phase_y, cap)
    q0 = np.zeros(basis.size, dtype=complex)
    for m, (nx, ny) in enumerate(basis.pairs):
        if nx <= cap and ny <= cap:
            q0[m] = ax[nx] * ay[ny]
    q0 /= np.linalg.norm(q0)
    return q0


def project_superposition(spec: SuperpositionSpec, basis: BasisIndexMap) -> np.ndarray:
    """Sparse projection vector for a finite eigenstate superposition."""
    q0 = np.zeros(basis.size, dtype=complex)
    for nx, ny, c in spec.terms:
        if nx + ny > basis.cutoff:
            raise ValueError("term (%d, %d) lies outside the basis cutoff %d" % (nx, ny, basis.cutoff))
        q0[basis.index_of(nx, ny)] = complex(c)
    return q0


@dataclass
class StateVector:
    """Evolved coefficients q_m(t) in the unperturbed basis."""

    time: float
    coefficients: np.ndarray = field(repr=False)
    initial_projection: np.ndarray = field(repr=False)
    spectral: SpectralModel = field(repr=False)
    _plan: kernels.WavePlan | None = field(default=None, repr=False, compare=False)

    def plan(self) -> kernels.WavePlan:
        if self._plan is None:
            self._plan = kernels.make_wave_plan(self.spectral, self.initial_projection)
        return self._plan

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))


def evolve(initial_projection: np.ndarray, spectral: SpectralModel, t: float) -> StateVector:
    """Closed-form state at time t: q(t) = C exp(-i E t / hbar) C^T q(0)."""
    q0 = np.asarray(initial_projection, dtype=complex)
    if q0.size != spectral.dim:
        raise ValueError("projection dimension %d does not match spectral dimension %d" % (q0.size, spectral.dim))
    c = spectral.eigenvectors
    p = c.T @ q0
    phases = np.exp(-1j * spectral.eigenvalues * t / spectral.params.hbar)
    qt = c @ (phases * p)
    return StateVector(time=t, coefficients=qt, initial_projection=q0, spectral=spectral)


@dataclass(frozen=True)
class WavefunctionSample:
    psi_real: float
    psi_imag: float
    grad_real: tuple
    grad_imag: tuple
    density: float


def eval_wavefunction(state: StateVector, x: float, y: float) -> WavefunctionSample:
    """Psi, its analytic gradient and the density at one point."""
    pr, pi, dxr, dxi, dyr, dyi = kernels.sample_point(state.plan(), state.time, x, y)
    return WavefunctionSample(
        psi_real=pr,
        psi_imag=pi,
        grad_real=(dxr, dyr),
        grad_imag=(dxi, dyi),
        density=pr * pr + pi * pi,
    )


def bohm_velocity(state: StateVector, x: float, y: float):
    """Guidance velocity (hbar/m) Im(grad Psi / Psi), componentwise."""
    vx, vy, den = kernels.velocity_at(state.plan(), state.time, x, y)
    if den < 1e-300:
        raise ZeroDensityError("density underflow at (%g, %g), t=%g" % (x, y, state.time))
    return vx, vy


def _unperturbed_energies(spectral: SpectralModel) -> np.ndarray:
    params = spectral.params
    nx, ny = spectral.basis.quantum_numbers()
    return params.hbar * ((nx + 0.5) * params.omega_x + (ny + 0.5) * params.omega_y)


def average_energy(state: StateVector):
    """Level-weighted unperturbed energy sum(P_m E_m) and the P_m vector."""
    p = np.abs(state.coefficients) ** 2
    e = _unperturbed_energies(state.spectral)
    return float(e @ p), p


def hamiltonian_expectation(state: StateVector, hamiltonian: np.ndarray) -> float:
    """<Psi|H|Psi> through the full matrix (conserved under evolution)."""
    q = state.coefficients
    return float(np.real(np.conj(q) @ (hamiltonian @ q)))


def average_energy_series(initial_projection: np.ndarray, spectral: SpectralModel, times: np.ndarray):
    """E_av(t) on a time grid plus its running mean (same shapes as times)."""
    times = np.asarray(times, dtype=float)
    c = spectral.eigenvectors
    p = c.T @ np.asarray(initial_projection, dtype=complex)
    e = _unperturbed_energies(spectral)
    eav = np.empty(times.size)
    chunk = max(1, int(4e6 // max(1, spectral.dim)))
    for lo in range(0, times.size, chunk):
        hi = min(times.size, lo + chunk)
        phases = np.exp(-1j * np.outer(spectral.eigenvalues, times[lo:hi]) / spectral.params.hbar)
        qt = c @ (phases * p[:, None])
        eav[lo:hi] = e @ (np.abs(qt) ** 2)
    running = np.cumsum(eav) / np.arange(1, times.size + 1)
    return eav, running


def mean_average_energy(
    initial_projection: np.ndarray,
    spectral: SpectralModel,
    horizon: float | None = None,
    dt: float = 1.0,
) -> float:
    """Time average of E_av.

    With horizon=None the exact infinite-time limit is returned (phase
    cross terms average to zero for a nondegenerate spectrum); otherwise
    E_av is sampled every dt over [0, horizon] and averaged.
    """
    if horizon is None:
        c = spectral.eigenvectors
        p = c.T @ np.asarray(initial_projection, dtype=complex)
        pbar = (c ** 2) @ (np.abs(p) ** 2)
        return float(_unperturbed_energies(spectral) @ pbar)
    times = np.arange(0.0, horizon + 0.5 * dt, dt)
    eav, _ = average_energy_series(initial_projection, spectral, times)
    return float(np.mean(eav))


# ---------------------------------------------------------------------------
# grid evaluation
# ---------------------------------------------------------------------------


def _psi_grid_tables(points: np.ndarray, beta: float, norm: float, kmax: int) -> np.ndarray:
    """Eigenfunction values psi_n(points) as an (npoints, kmax+1) table."""
    ub = beta * np.asarray(points, dtype=float)
    out = np.empty((ub.size, kmax + 1))
    out[:, 0] = norm * np.exp(-0.5 * ub * ub)
    if kmax >= 1:
        out[:, 1] = math.sqrt(2.0) * ub * out[:, 0]
    for n in range(2, kmax + 1):
        out[:, n] = math.sqrt(2.0 / n) * ub * out[:, n - 1] - math.sqrt((n - 1.0) / n) * out[:, n - 2]
    return out


def _coefficient_matrix(state: StateVector) -> np.ndarray:
    basis = state.spectral.basis
    k = basis.cutoff
    q = np.zeros((k + 1, k + 1), dtype=complex)
    nx, ny = basis.quantum_numbers()
    q[nx, ny] = state.coefficients
    return q


def wavefunction_grid(state: StateVector, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Complex Psi on the tensor grid xs x ys, shape (len(xs), len(ys))."""
    plan = state.plan()
    tx = _psi_grid_tables(xs, plan.beta_x, plan.norm_x, plan.kmax)
    ty = _psi_grid_tables(ys, plan.beta_y, plan.norm_y, plan.kmax)
    return tx @ _coefficient_matrix(state) @ ty.T


@dataclass(frozen=True)
class DensityGrid:
    region: tuple
    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def cell_area(self) -> float:
        xmin, xmax, ymin, ymax = self.region
        return (xmax - xmin) / self.values.shape[0] * (ymax - ymin) / self.values.shape[1]


def density_heatmap(state: StateVector, region=(-6.0, 6.0, -6.0, 6.0), resolution=200) -> DensityGrid:
    """|Psi|^2 sampled at cell centers of a regular grid over region."""
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 per axis")
    xmin, xmax, ymin, ymax = region
    xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    psi = wavefunction_grid(state, xs, ys)
    return DensityGrid(region=tuple(region), xs=xs, ys=ys, values=np.abs(psi) ** 2)


def density_centroid(grid: DensityGrid):
    w = grid.values
    total = w.sum()
    cx = float((w.sum(axis=1) @ grid.xs) / total)
    cy = float((w.sum(axis=0) @ grid.ys) / total)
    return cx, cy


def deformation_distance(state: StateVector, reference: StateVector, region=(-6.0, 6.0, -6.0, 6.0), resolution=80) -> float:
    """L2 distance between the current density and the rigidly translated
    initial density, both normalized to unit Frobenius norm.

    The reference blob is re-evaluated analytically at shifted coordinates
    (shift = centroid displacement), so a state that merely translates
    scores ~0 while genuine shape change scores positively.
    """
    grid = density_heatmap(state, region, resolution)
    ref0 = density_heatmap(reference, region, resolution)
    cx, cy = density_centroid(grid)
    rx, ry = density_centroid(ref0)
    shifted = np.abs(wavefunction_grid(reference, grid.xs - (cx - rx), grid.ys - (cy - ry))) ** 2
    a = grid.values / np.linalg.norm(grid.values)
    b = shifted / np.linalg.norm(shifted)
    return float(np.linalg.norm(a - b))


def coherent_center(spec: CoherentSpec, params: OscillatorParams, t: float = 0.0):
    """Analytic blob center of the coherent product at time t."""
    xc = spec.amplitude_x * math.sqrt(2.0 * params.hbar / (params.mass_x * params.omega_x)) * math.cos(
        spec.phase_x - params.omega_x * t
    )
    yc = spec.amplitude_y * math.sqrt(2.0 * params.hbar / (params.mass_y * params.omega_y)) * math.cos(
        spec.phase_y - params.omega_y * t
    )
    return xc, yc


# ---------------------------------------------------------------------------
# nodal points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeSet:
    time: float
    nodes: tuple  # (x, y, residual |Psi|)
    dropped: int  # Newton candidates that failed to converge


def find_nodes(
    state: StateVector,
    region=(-6.0, 6.0, -6.0, 6.0),
    grid_step: float = 0.05,
    max_iterations: int = 50,
) -> NodeSet:
    """Nodal points (Psi = 0) inside region.

    Grid cells where both Re(Psi) and Im(Psi) change sign seed a 2D Newton
    iteration on (Re, Im) with the analytic Jacobian; converged roots are
    deduplicated at half the grid step.
    """
    if grid_step <= 0.0:
        raise ValueError("grid_step must be positive")
    xmin, xmax, ymin, ymax = region
    xs = np.arange(xmin, xmax + 0.5 * grid_step, grid_step)
    ys = np.arange(ymin, ymax + 0.5 * grid_step, grid_step)
    psi = wavefunction_grid(state, xs, ys)
    peak = float(np.max(np.abs(psi)))
    if peak == 0.0:
        return NodeSet(time=state.time, nodes=(), dropped=0)
    tol = 1e-9 * peak

    re = psi.real
    im = psi.imag

    def _cell_changes(f):
        lo = np.minimum.reduce([f[:-1, :-1], f[1:, :-1], f[:-1, 1:], f[1:, 1:]])
        hi = np.maximum.reduce([f[:-1, :-1], f[1:, :-1], f[:-1, 1:], f[1:, 1:]])
        return (lo <= 0.0) & (hi >= 0.0)

    cells = np.argwhere(_cell_changes(re) & _cell_changes(im))
    plan = state.plan()
    t = state.time

    found = []
    dropped = 0
    for i, j in cells:
        x = 0.5 * (xs[i] + xs[i + 1])
        y = 0.5 * (ys[j] + ys[j + 1])
        ok = False
        for _ in range(max_iterations):
            pr, pi, dxr, dxi, dyr, dyi = kernels.sample_point(plan, t, x, y)
            if math.hypot(pr, pi) < tol:
                ok = True
                break
            det = dxr * dyi - dyr * dxi
            if det == 0.0 or not math.isfinite(det):
                break
            dx = (pr * dyi - dyr * pi) / det
            dy = (dxr * pi - pr * dxi) / det
            x -= dx
            y -= dy
            if not (math.isfinite(x) and math.isfinite(y)):
                break
            if abs(x) > 2.0 * max(abs(xmin), abs(xmax)) or abs(y) > 2.0 * max(abs(ymin), abs(ymax)):
                break
        if not ok:
            dropped += 1
            continue
        if xmin - 0.25 * grid_step <= x <= xmax + 0.25 * grid_step and ymin - 0.25 * grid_step <= y <= ymax + 0.25 * grid_step:
            found.append((x, y, math.hypot(pr, pi)))

    found.sort(key=lambda n: n[2])
    kept = []
    for x, y, r in found:
        if all((x - u) ** 2 + (y - v) ** 2 >= (0.5 * grid_step) ** 2 for u, v, _ in kept):
            kept.append((x, y, r))
    kept.sort(key=lambda n: (n[0], n[1]))
    return NodeSet(time=state.time, nodes=tuple(kept), dropped=dropped)
