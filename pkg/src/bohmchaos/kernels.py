"""Hot numerical kernels.

Everything here is written in numba-compatible form and compiled through
:func:`bohmchaos.backend.jit`; with ``BOHMCHAOS_JIT=numpy`` the same code
runs as the plain-numpy fallback.  Kernels operate on a flat ``WavePlan``
of arrays so that no Python objects cross into the compiled code.

Trajectory integration uses the Dormand-Prince 5(4) embedded pair with
PI-free step control, FSAL reuse and cubic Hermite sampling between steps.
The classical flow uses a fixed-step 6th-order Yoshida composition of
velocity Verlet, which keeps the energy error bounded for arbitrarily
long runs and is exactly time reversible up to roundoff.
"""

import math
from typing import NamedTuple

import numpy as np

from .backend import jit, prange

__all__ = [
    "WavePlan",
    "make_wave_plan",
    "STATUS_OK",
    "STATUS_NODE_ABORT",
    "STATUS_NONFINITE",
    "STATUS_ESCAPED",
    "VERDICT_ORDERED",
    "VERDICT_CHAOTIC",
    "VERDICT_ESCAPED",
]

STATUS_OK = 0
STATUS_NODE_ABORT = 1
STATUS_NONFINITE = 2
STATUS_ESCAPED = 3

VERDICT_ORDERED = 0
VERDICT_CHAOTIC = 1
VERDICT_ESCAPED = 2


class WavePlan(NamedTuple):
    """Flat-array view of a spectral model plus one initial state."""

    nx: np.ndarray
    ny: np.ndarray
    energies: np.ndarray
    modes: np.ndarray
    proj_re: np.ndarray
    proj_im: np.ndarray
    beta_x: float
    beta_y: float
    norm_x: float
    norm_y: float
    hbar: float
    mass_x: float
    mass_y: float
    kmax: int


def make_wave_plan(spectral, initial_projection) -> WavePlan:
    """Bundle a spectral model and initial projections for the kernels."""
    params = spectral.params
    nx, ny = spectral.basis.quantum_numbers()
    proj = spectral.eigenvectors.T @ np.asarray(initial_projection, dtype=complex)
    return WavePlan(
        nx=nx,
        ny=ny,
        energies=np.ascontiguousarray(spectral.eigenvalues),
        modes=np.ascontiguousarray(spectral.eigenvectors),
        proj_re=np.ascontiguousarray(proj.real),
        proj_im=np.ascontiguousarray(proj.imag),
        beta_x=math.sqrt(params.mass_x * params.omega_x / params.hbar),
        beta_y=math.sqrt(params.mass_y * params.omega_y / params.hbar),
        norm_x=(params.mass_x * params.omega_x / (math.pi * params.hbar)) ** 0.25,
        norm_y=(params.mass_y * params.omega_y / (math.pi * params.hbar)) ** 0.25,
        hbar=params.hbar,
        mass_x=params.mass_x,
        mass_y=params.mass_y,
        kmax=int(spectral.basis.cutoff),
    )


# ---------------------------------------------------------------------------
# wavefunction evaluation
# ---------------------------------------------------------------------------


@jit
def hermite_psi_tables(u, beta, norm, kmax, psi, dpsi):
    """1D oscillator eigenfunction values and derivatives at one point.

    Uses the normalized recurrence so no factorials or large Hermite
    values ever appear.
    """
    ub = beta * u
    g = norm * math.exp(-0.5 * ub * ub)
    psi[0] = g
    dpsi[0] = -beta * ub * g
    for n in range(1, kmax + 1):
        if n == 1:
            psi[1] = math.sqrt(2.0) * ub * g
        else:
            psi[n] = math.sqrt(2.0 / n) * ub * psi[n - 1] - math.sqrt((n - 1.0) / n) * psi[n - 2]
        dpsi[n] = beta * (math.sqrt(2.0 * n) * psi[n - 1] - ub * psi[n])


@jit
def evolve_coefficients(plan, t, qr, qi):
    """Oscillator-basis coefficients q_m(t) of the evolved state."""
    n = plan.energies.size
    ar = np.empty(n)
    ai = np.empty(n)
    for k in range(n):
        th = -plan.energies[k] * t / plan.hbar
        c = math.cos(th)
        s = math.sin(th)
        ar[k] = plan.proj_re[k] * c - plan.proj_im[k] * s
        ai[k] = plan.proj_re[k] * s + plan.proj_im[k] * c
    qr[:] = np.dot(plan.modes, ar)
    qi[:] = np.dot(plan.modes, ai)


@jit
def eval_point(plan, qr, qi, x, y, psix, dpsix, psiy, dpsiy):
    """Psi and its gradient at one configuration-space point.

    Returns (re, im, dx_re, dx_im, dy_re, dy_im).
    """
    hermite_psi_tables(x, plan.beta_x, plan.norm_x, plan.kmax, psix, dpsix)
    hermite_psi_tables(y, plan.beta_y, plan.norm_y, plan.kmax, psiy, dpsiy)
    pr = 0.0
    pi = 0.0
    dxr = 0.0
    dxi = 0.0
    dyr = 0.0
    dyi = 0.0
    for m in range(qr.size):
        fx = psix[plan.nx[m]]
        fy = psiy[plan.ny[m]]
        a = fx * fy
        bx = dpsix[plan.nx[m]] * fy
        by = fx * dpsiy[plan.ny[m]]
        pr += qr[m] * a
        pi += qi[m] * a
        dxr += qr[m] * bx
        dxi += qi[m] * bx
        dyr += qr[m] * by
        dyi += qi[m] * by
    return pr, pi, dxr, dxi, dyr, dyi


@jit
def velocity_point(plan, qr, qi, x, y, psix, dpsix, psiy, dpsiy):
    """Guidance velocity (vx, vy) and the density at one point."""
    pr, pi, dxr, dxi, dyr, dyi = eval_point(plan, qr, qi, x, y, psix, dpsix, psiy, dpsiy)
    den = pr * pr + pi * pi
    if den < 1e-300:
        return 0.0, 0.0, den
    vx = plan.hbar / plan.mass_x * (pr * dxi - pi * dxr) / den
    vy = plan.hbar / plan.mass_y * (pr * dyi - pi * dyr) / den
    return vx, vy, den


@jit
def sample_point(plan, t, x, y):
    """Convenience single-shot evaluation (allocates its own scratch)."""
    n = plan.energies.size
    qr = np.empty(n)
    qi = np.empty(n)
    evolve_coefficients(plan, t, qr, qi)
    psix = np.empty(plan.kmax + 1)
    dpsix = np.empty(plan.kmax + 1)
    psiy = np.empty(plan.kmax + 1)
    dpsiy = np.empty(plan.kmax + 1)
    return eval_point(plan, qr, qi, x, y, psix, dpsix, psiy, dpsiy)


@jit
def velocity_at(plan, t, x, y):
    n = plan.energies.size
    qr = np.empty(n)
    qi = np.empty(n)
    evolve_coefficients(plan, t, qr, qi)
    psix = np.empty(plan.kmax + 1)
    dpsix = np.empty(plan.kmax + 1)
    psiy = np.empty(plan.kmax + 1)
    dpsiy = np.empty(plan.kmax + 1)
    return velocity_point(plan, qr, qi, x, y, psix, dpsix, psiy, dpsiy)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) tables
# ---------------------------------------------------------------------------

_DP_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
_DP_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ]
)
# difference between the 5th-order propagating weights and the embedded
# 4th-order weights; dot with the stage slopes gives the error estimate
_DP_E = np.array(
    [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ]
)

# 4th-order continuous-output weights for the 5(4) pair
_DP_D = np.array(
    [
        -12715105075.0 / 11282082432.0,
        0.0,
        87487479700.0 / 32700410799.0,
        -10690763975.0 / 1880347072.0,
        701980252875.0 / 199316789632.0,
        -1453857185.0 / 822651844.0,
        69997945.0 / 29380423.0,
    ]
)

_DENSITY_FLOOR_FRACTION = 1e-6
_GUARD_STEP_CAP = 1e-5  # density guard only rejects while h is above this
_MEDIAN_WINDOW = 101
_MEDIAN_REFRESH = 32


@jit
def _dense_eval(theta, y0, c2, c3, c4, c5):
    return y0 + theta * (c2 + (1.0 - theta) * (c3 + theta * (c4 + (1.0 - theta) * c5)))


@jit
def integrate_bohmian_kernel(
    plan,
    x0,
    y0,
    t_end,
    cadence,
    abs_tol,
    rel_tol,
    max_step,
    min_step,
    h0,
    ts,
    xs,
    ys,
):
    """Adaptive guidance-equation integration with fixed-cadence sampling.

    Fills ts/xs/ys (preallocated, sample k at time k*cadence) and returns
    (status, n_samples_filled, n_accepted, n_rejected, min_density).
    """
    n = plan.energies.size
    qr = np.empty(n)
    qi = np.empty(n)
    psix = np.empty(plan.kmax + 1)
    dpsix = np.empty(plan.kmax + 1)
    psiy = np.empty(plan.kmax + 1)
    dpsiy = np.empty(plan.kmax + 1)
    kx = np.empty(7)
    ky = np.empty(7)

    t = 0.0
    x = x0
    y = y0

    evolve_coefficients(plan, t, qr, qi)
    vx, vy, den = velocity_point(plan, qr, qi, x, y, psix, dpsix, psiy, dpsiy)
    if den < 1e-300:
        return STATUS_NODE_ABORT, 0, 0, 0, den
    min_den = den

    dbuf = np.full(_MEDIAN_WINDOW, den)
    dpos = 0
    floor = _DENSITY_FLOOR_FRACTION * den

    n_samples = ts.size
    isamp = 0
    if n_samples > 0:
        ts[0] = 0.0
        xs[0] = x
        ys[0] = y
        isamp = 1

    h = h0
    n_accept = 0
    n_reject = 0
    kx[0] = vx
    ky[0] = vy

    while t < t_end - 1e-13 * (1.0 + abs(t_end)):
        if h > max_step:
            h = max_step
        if t + h > t_end:
            h = t_end - t

        bad = False
        step_min_den = den
        for s in range(1, 7):
            xa = x
            ya = y
            for j in range(s):
                xa += h * _DP_A[s, j] * kx[j]
                ya += h * _DP_A[s, j] * ky[j]
            evolve_coefficients(plan, t + _DP_C[s] * h, qr, qi)
            vxs, vys, dens = velocity_point(plan, qr, qi, xa, ya, psix, dpsix, psiy, dpsiy)
            if dens < 1e-300 or not (math.isfinite(vxs) and math.isfinite(vys)):
                bad = True
                break
            if dens < floor and h > _GUARD_STEP_CAP:
                bad = True
                break
            if dens < step_min_den:
                step_min_den = dens
            kx[s] = vxs
            ky[s] = vys

        if bad:
            n_reject += 1
            h *= 0.25
            if h < min_step:
                return STATUS_NODE_ABORT, isamp, n_accept, n_reject, min_den
            continue

        x1 = x + h * (
            _DP_A[6, 0] * kx[0]
            + _DP_A[6, 2] * kx[2]
            + _DP_A[6, 3] * kx[3]
            + _DP_A[6, 4] * kx[4]
            + _DP_A[6, 5] * kx[5]
        )
        y1 = y + h * (
            _DP_A[6, 0] * ky[0]
            + _DP_A[6, 2] * ky[2]
            + _DP_A[6, 3] * ky[3]
            + _DP_A[6, 4] * ky[4]
            + _DP_A[6, 5] * ky[5]
        )

        ex = 0.0
        ey = 0.0
        for j in range(7):
            ex += _DP_E[j] * kx[j]
            ey += _DP_E[j] * ky[j]
        ex *= h
        ey *= h
        sx = abs_tol + rel_tol * max(abs(x), abs(x1))
        sy = abs_tol + rel_tol * max(abs(y), abs(y1))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))

        if err > 1.0 or not (math.isfinite(x1) and math.isfinite(y1)):
            n_reject += 1
            fac = 0.9 * err ** -0.2 if math.isfinite(err) and err > 0.0 else 0.2
            if fac < 0.2:
                fac = 0.2
            if fac > 1.0:
                fac = 1.0
            h *= fac
            if h < min_step:
                return STATUS_NODE_ABORT, isamp, n_accept, n_reject, min_den
            continue

        # stage 7 is the slope at (t+h, y1): FSAL
        f1x = kx[6]
        f1y = ky[6]
        t1 = t + h
        if isamp < n_samples and isamp * cadence <= t1 * (1.0 + 1e-12) + 1e-12:
            dx5 = 0.0
            dy5 = 0.0
            for j in range(7):
                dx5 += _DP_D[j] * kx[j]
                dy5 += _DP_D[j] * ky[j]
            c2x = x1 - x
            c3x = h * kx[0] - c2x
            c4x = c2x - h * f1x - c3x
            c5x = h * dx5
            c2y = y1 - y
            c3y = h * ky[0] - c2y
            c4y = c2y - h * f1y - c3y
            c5y = h * dy5
            while isamp < n_samples and isamp * cadence <= t1 * (1.0 + 1e-12) + 1e-12:
                tau = isamp * cadence
                theta = (tau - t) / h
                ts[isamp] = tau
                xs[isamp] = _dense_eval(theta, x, c2x, c3x, c4x, c5x)
                ys[isamp] = _dense_eval(theta, y, c2y, c3y, c4y, c5y)
                isamp += 1

        t = t1
        x = x1
        y = y1
        kx[0] = f1x
        ky[0] = f1y
        n_accept += 1
        if step_min_den < min_den:
            min_den = step_min_den
        dbuf[dpos] = step_min_den
        dpos = (dpos + 1) % _MEDIAN_WINDOW
        if n_accept % _MEDIAN_REFRESH == 0:
            floor = _DENSITY_FLOOR_FRACTION * np.median(dbuf)
        den = step_min_den

        fac = 0.9 * err ** -0.2 if err > 1e-30 else 5.0
        if fac > 5.0:
            fac = 5.0
        if fac < 0.2:
            fac = 0.2
        h *= fac

    return STATUS_OK, isamp, n_accept, n_reject, min_den


@jit
def lyapunov_pair_kernel(
    plan,
    x0,
    y0,
    d0,
    renorm_dt,
    n_checkpoints,
    abs_tol,
    rel_tol,
    max_step,
    min_step,
    h0,
    xi_out,
    alpha_out,
):
    """Shadowing-pair integration: deviation magnitudes and stretchings.

    The partner starts offset by d0 along x; the pair is integrated as one
    4-dimensional system (one spectral evolution per stage serves both
    points) and the separation is renormalized to d0 every renorm_dt.
    Returns (status, n_checkpoints_filled).
    """
    n = plan.energies.size
    qr = np.empty(n)
    qi = np.empty(n)
    psix = np.empty(plan.kmax + 1)
    dpsix = np.empty(plan.kmax + 1)
    psiy = np.empty(plan.kmax + 1)
    dpsiy = np.empty(plan.kmax + 1)
    k = np.empty((7, 4))
    w = np.empty(4)
    w1 = np.empty(4)

    t = 0.0
    w[0] = x0
    w[1] = y0
    w[2] = x0 + d0
    w[3] = y0

    evolve_coefficients(plan, t, qr, qi)
    vx1, vy1, den1 = velocity_point(plan, qr, qi, w[0], w[1], psix, dpsix, psiy, dpsiy)
    vx2, vy2, den2 = velocity_point(plan, qr, qi, w[2], w[3], psix, dpsix, psiy, dpsiy)
    if den1 < 1e-300 or den2 < 1e-300:
        return STATUS_NODE_ABORT, 0
    k[0, 0] = vx1
    k[0, 1] = vy1
    k[0, 2] = vx2
    k[0, 3] = vy2

    den_ref = min(den1, den2)
    dbuf = np.full(_MEDIAN_WINDOW, den_ref)
    dpos = 0
    floor = _DENSITY_FLOOR_FRACTION * den_ref

    h = h0
    n_accept = 0
    icheck = 0
    while icheck < n_checkpoints:
        t_target = (icheck + 1.0) * renorm_dt
        if h > max_step:
            h = max_step
        clamped = False
        if t + h >= t_target - 1e-13:
            h = t_target - t
            clamped = True

        bad = False
        step_min_den = den_ref
        for s in range(1, 7):
            for c in range(4):
                acc = w[c]
                for j in range(s):
                    acc += h * _DP_A[s, j] * k[j, c]
                w1[c] = acc
            evolve_coefficients(plan, t + _DP_C[s] * h, qr, qi)
            vx1, vy1, den1 = velocity_point(plan, qr, qi, w1[0], w1[1], psix, dpsix, psiy, dpsiy)
            vx2, vy2, den2 = velocity_point(plan, qr, qi, w1[2], w1[3], psix, dpsix, psiy, dpsiy)
            dmin = min(den1, den2)
            if dmin < 1e-300 or not (
                math.isfinite(vx1) and math.isfinite(vy1) and math.isfinite(vx2) and math.isfinite(vy2)
            ):
                bad = True
                break
            if dmin < floor and h > _GUARD_STEP_CAP:
                bad = True
                break
            if dmin < step_min_den:
                step_min_den = dmin
            k[s, 0] = vx1
            k[s, 1] = vy1
            k[s, 2] = vx2
            k[s, 3] = vy2

        if bad:
            h *= 0.25
            if h < min_step:
                return STATUS_NODE_ABORT, icheck
            continue

        err = 0.0
        finite = True
        for c in range(4):
            acc = w[c]
            for j in range(6):
                if _DP_A[6, j] != 0.0:
                    acc += h * _DP_A[6, j] * k[j, c]
            w1[c] = acc
            if not math.isfinite(acc):
                finite = False
            e = 0.0
            for j in range(7):
                e += _DP_E[j] * k[j, c]
            e *= h
            sc = abs_tol + rel_tol * max(abs(w[c]), abs(acc))
            err += (e / sc) ** 2
        err = math.sqrt(err / 4.0)

        if err > 1.0 or not finite:
            fac = 0.9 * err ** -0.2 if math.isfinite(err) and err > 0.0 else 0.2
            if fac < 0.2:
                fac = 0.2
            if fac > 1.0:
                fac = 1.0
            h *= fac
            if h < min_step:
                return STATUS_NODE_ABORT, icheck
            continue

        t = t_target if clamped else t + h
        for c in range(4):
            w[c] = w1[c]
            k[0, c] = k[6, c]
        n_accept += 1
        dbuf[dpos] = step_min_den
        dpos = (dpos + 1) % _MEDIAN_WINDOW
        if n_accept % _MEDIAN_REFRESH == 0:
            floor = _DENSITY_FLOOR_FRACTION * np.median(dbuf)
        den_ref = step_min_den

        fac = 0.9 * err ** -0.2 if err > 1e-30 else 5.0
        if fac > 5.0:
            fac = 5.0
        if fac < 0.2:
            fac = 0.2
        h_next = h * fac

        if clamped:
            dx = w[2] - w[0]
            dy = w[3] - w[1]
            xi = math.sqrt(dx * dx + dy * dy)
            if xi <= 0.0:
                return STATUS_NONFINITE, icheck
            xi_out[icheck] = xi
            alpha_out[icheck] = math.log(xi / d0)
            scale = d0 / xi
            w[2] = w[0] + dx * scale
            w[3] = w[1] + dy * scale
            # partner moved: refresh its FSAL slope
            evolve_coefficients(plan, t, qr, qi)
            vx2, vy2, den2 = velocity_point(plan, qr, qi, w[2], w[3], psix, dpsix, psiy, dpsiy)
            if den2 < 1e-300:
                return STATUS_NODE_ABORT, icheck
            k[0, 2] = vx2
            k[0, 3] = vy2
            icheck += 1
        h = h_next

    return STATUS_OK, icheck


@jit(parallel=True)
def ensemble_lyapunov_kernel(
    plan,
    x0s,
    y0s,
    d0,
    renorm_dt,
    n_checkpoints,
    abs_tol,
    rel_tol,
    max_step,
    min_step,
    h0,
    alphas,
    status,
    filled,
):
    """Stretching-number series for a whole ensemble (one row per start)."""
    m = x0s.size
    for i in prange(m):
        xi = np.empty(n_checkpoints)
        st, nf = lyapunov_pair_kernel(
            plan,
            x0s[i],
            y0s[i],
            d0,
            renorm_dt,
            n_checkpoints,
            abs_tol,
            rel_tol,
            max_step,
            min_step,
            h0,
            xi,
            alphas[i],
        )
        status[i] = st
        filled[i] = nf


@jit(parallel=True)
def ensemble_trajectories_kernel(
    plan,
    x0s,
    y0s,
    t_end,
    cadence,
    abs_tol,
    rel_tol,
    max_step,
    min_step,
    h0,
    xs,
    ys,
    status,
    filled,
):
    """Fixed-cadence trajectories for a whole ensemble (row per start)."""
    m = x0s.size
    n_samples = xs.shape[1]
    for i in prange(m):
        ts = np.empty(n_samples)
        st, nf, na, nr, dmin = integrate_bohmian_kernel(
            plan,
            x0s[i],
            y0s[i],
            t_end,
            cadence,
            abs_tol,
            rel_tol,
            max_step,
            min_step,
            h0,
            ts,
            xs[i],
            ys[i],
        )
        status[i] = st
        filled[i] = nf


# ---------------------------------------------------------------------------
# classical flow
# ---------------------------------------------------------------------------

_Y6_W1 = -1.17767998417887
_Y6_W2 = 0.235573213359357
_Y6_W3 = 0.784513610477560
_Y6_W0 = 1.0 - 2.0 * (_Y6_W1 + _Y6_W2 + _Y6_W3)
_Y6_D = np.array([_Y6_W3, _Y6_W2, _Y6_W1, _Y6_W0, _Y6_W1, _Y6_W2, _Y6_W3])


@jit
def classical_accel(x, y, wx2, wy2, eps):
    ax = -wx2 * x - eps * y * y
    ay = -wy2 * y - 2.0 * eps * x * y
    return ax, ay


@jit
def classical_energy(x, y, vx, vy, wx2, wy2, eps):
    return 0.5 * (vx * vx + vy * vy + wx2 * x * x + wy2 * y * y) + eps * x * y * y


@jit
def yoshida6_step(x, y, vx, vy, ax, ay, h, wx2, wy2, eps):
    """One fixed step of the 6th-order symplectic composition.

    The force at the end of the step is returned so consecutive steps
    share a single evaluation per substep.
    """
    for i in range(7):
        d = _Y6_D[i] * h
        vx += 0.5 * d * ax
        vy += 0.5 * d * ay
        x += d * vx
        y += d * vy
        ax, ay = classical_accel(x, y, wx2, wy2, eps)
        vx += 0.5 * d * ax
        vy += 0.5 * d * ay
    return x, y, vx, vy, ax, ay


@jit
def integrate_classical_kernel(
    x0,
    y0,
    vx0,
    vy0,
    h,
    t_end,
    cadence,
    escape_radius,
    wx2,
    wy2,
    eps,
    ts,
    xs,
    ys,
    vxs,
    vys,
):
    """Fixed-step symplectic integration with samples every >= cadence.

    Returns (status, n_filled, n_steps).
    """
    t = 0.0
    x = x0
    y = y0
    vx = vx0
    vy = vy0
    ax, ay = classical_accel(x, y, wx2, wy2, eps)
    cap = ts.size
    i = 0
    if cap > 0:
        ts[0] = t
        xs[0] = x
        ys[0] = y
        vxs[0] = vx
        vys[0] = vy
        i = 1
    next_sample = cadence
    n_steps = 0
    while t < t_end - 1e-12:
        x, y, vx, vy, ax, ay = yoshida6_step(x, y, vx, vy, ax, ay, h, wx2, wy2, eps)
        t += h
        n_steps += 1
        if abs(x) > escape_radius or abs(y) > escape_radius:
            if i < cap:
                ts[i] = t
                xs[i] = x
                ys[i] = y
                vxs[i] = vx
                vys[i] = vy
                i += 1
            return STATUS_ESCAPED, i, n_steps
        if not (math.isfinite(x) and math.isfinite(y)):
            return STATUS_NONFINITE, i, n_steps
        if t >= next_sample - 1e-12 and i < cap:
            ts[i] = t
            xs[i] = x
            ys[i] = y
            vxs[i] = vx
            vys[i] = vy
            i += 1
            next_sample += cadence
    return STATUS_OK, i, n_steps


@jit
def henon_refine(x, y, vx, vy, t, wx2, wy2, eps, nsub):
    """Land exactly on the section plane y = 0 from a nearby state.

    Integrates (x, vx, vy, t) with y as the independent variable over the
    remaining interval, RK4 with nsub substeps; valid while vy stays away
    from zero, which holds for transversal crossings.
    """
    dy = (0.0 - y) / nsub
    for i in range(nsub):
        ycur = y + i * dy

        ax, ay = classical_accel(x, ycur, wx2, wy2, eps)
        k1x = vx / vy
        k1vx = ax / vy
        k1vy = ay / vy
        k1t = 1.0 / vy

        ym = ycur + 0.5 * dy
        x2 = x + 0.5 * dy * k1x
        vx2 = vx + 0.5 * dy * k1vx
        vy2 = vy + 0.5 * dy * k1vy
        ax, ay = classical_accel(x2, ym, wx2, wy2, eps)
        k2x = vx2 / vy2
        k2vx = ax / vy2
        k2vy = ay / vy2
        k2t = 1.0 / vy2

        x3 = x + 0.5 * dy * k2x
        vx3 = vx + 0.5 * dy * k2vx
        vy3 = vy + 0.5 * dy * k2vy
        ax, ay = classical_accel(x3, ym, wx2, wy2, eps)
        k3x = vx3 / vy3
        k3vx = ax / vy3
        k3vy = ay / vy3
        k3t = 1.0 / vy3

        ye = ycur + dy
        x4 = x + dy * k3x
        vx4 = vx + dy * k3vx
        vy4 = vy + dy * k3vy
        ax, ay = classical_accel(x4, ye, wx2, wy2, eps)
        k4x = vx4 / vy4
        k4vx = ax / vy4
        k4vy = ay / vy4
        k4t = 1.0 / vy4

        x += dy / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        vx += dy / 6.0 * (k1vx + 2.0 * k2vx + 2.0 * k3vx + k4vx)
        vy += dy / 6.0 * (k1vy + 2.0 * k2vy + 2.0 * k3vy + k4vy)
        t += dy / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    return x, vx, vy, t


@jit
def section_kernel(
    x0,
    y0,
    vx0,
    vy0,
    h,
    max_crossings,
    t_max,
    escape_radius,
    wx2,
    wy2,
    eps,
    out_x,
    out_vx,
    out_vy,
    out_t,
):
    """Upward crossings of the plane y = 0 along one classical orbit.

    Returns (n_found, status).
    """
    t = 0.0
    x = x0
    y = y0
    vx = vx0
    vy = vy0
    ax, ay = classical_accel(x, y, wx2, wy2, eps)
    found = 0
    while t < t_max and found < max_crossings:
        xp = x
        yp = y
        vxp = vx
        vyp = vy
        tp = t
        x, y, vx, vy, ax, ay = yoshida6_step(x, y, vx, vy, ax, ay, h, wx2, wy2, eps)
        t += h
        if abs(x) > escape_radius or abs(y) > escape_radius:
            return found, STATUS_ESCAPED
        if not (math.isfinite(x) and math.isfinite(y)):
            return found, STATUS_NONFINITE
        if yp < 0.0 and y >= 0.0 and vyp > 1e-8:
            cx, cvx, cvy, ct = henon_refine(xp, yp, vxp, vyp, tp, wx2, wy2, eps, 3)
            if cvy > 0.0:
                out_x[found] = cx
                out_vx[found] = cvx
                out_vy[found] = cvy
                out_t[found] = ct
                found += 1
    return found, STATUS_OK


@jit
def classical_pair_kernel(
    x0,
    y0,
    vx0,
    vy0,
    d0,
    h,
    n_renorm_steps,
    n_checkpoints,
    log_threshold,
    escape_radius,
    wx2,
    wy2,
    eps,
    alpha_out,
):
    """Classical shadowing pair with renormalization every n_renorm_steps.

    Early-exits with VERDICT_CHAOTIC once the summed stretchings reach
    log_threshold.  Returns (verdict, n_checkpoints_filled, log_sum).
    """
    xa = x0
    ya = y0
    vxa = vx0
    vya = vy0
    xb = x0 + d0
    yb = y0
    vxb = vx0
    vyb = vy0
    axa, aya = classical_accel(xa, ya, wx2, wy2, eps)
    axb, ayb = classical_accel(xb, yb, wx2, wy2, eps)
    log_sum = 0.0
    for icheck in range(n_checkpoints):
        for s in range(n_renorm_steps):
            xa, ya, vxa, vya, axa, aya = yoshida6_step(xa, ya, vxa, vya, axa, aya, h, wx2, wy2, eps)
            xb, yb, vxb, vyb, axb, ayb = yoshida6_step(xb, yb, vxb, vyb, axb, ayb, h, wx2, wy2, eps)
        if abs(xa) > escape_radius or abs(ya) > escape_radius:
            return VERDICT_ESCAPED, icheck, log_sum
        dx = xb - xa
        dy = yb - ya
        dvx = vxb - vxa
        dvy = vyb - vya
        xi = math.sqrt(dx * dx + dy * dy + dvx * dvx + dvy * dvy)
        if xi <= 0.0 or not math.isfinite(xi):
            return VERDICT_ESCAPED, icheck, log_sum
        alpha_out[icheck] = math.log(xi / d0)
        log_sum += alpha_out[icheck]
        scale = d0 / xi
        xb = xa + dx * scale
        yb = ya + dy * scale
        vxb = vxa + dvx * scale
        vyb = vya + dvy * scale
        axb, ayb = classical_accel(xb, yb, wx2, wy2, eps)
        if log_sum >= log_threshold:
            return VERDICT_CHAOTIC, icheck + 1, log_sum
    return VERDICT_ORDERED, n_checkpoints, log_sum


@jit(parallel=True)
def area_scan_kernel(
    cell_x,
    cell_vx,
    energy,
    d0,
    h,
    n_renorm_steps,
    n_checkpoints,
    log_threshold,
    escape_radius,
    wx2,
    wy2,
    eps,
    verdicts,
):
    """Chaos verdict per section cell (x, vx) at y = 0, vy > 0."""
    m = cell_x.size
    for i in prange(m):
        vy2 = 2.0 * energy - cell_vx[i] * cell_vx[i] - wx2 * cell_x[i] * cell_x[i]
        if vy2 <= 0.0:
            verdicts[i] = -1
            continue
        alphas = np.empty(n_checkpoints)
        verdict, nf, ls = classical_pair_kernel(
            cell_x[i],
            0.0,
            cell_vx[i],
            math.sqrt(vy2),
            d0,
            h,
            n_renorm_steps,
            n_checkpoints,
            log_threshold,
            escape_radius,
            wx2,
            wy2,
            eps,
            alphas,
        )
        verdicts[i] = verdict
