"""Truncated 2D oscillator basis, coupled-oscillator Hamiltonian matrix and
its dense symmetric eigendecomposition.

The model potential is V = 1/2 (omega_x^2 x^2 + omega_y^2 y^2) + epsilon x y^2.
Matrix elements of the coupling are evaluated with closed-form ladder-operator
results, so the only numerical step is the final diagonalization.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OscillatorParams",
    "BasisIndexMap",
    "HamiltonianMatrix",
    "SpectralModel",
    "EigensolverError",
    "enumerate_basis",
    "unperturbed_energy",
    "coupling_matrix_element",
    "build_hamiltonian",
    "diagonalize",
]

DEFAULT_OMEGA_Y = math.sqrt(2.0) / 2.0


class EigensolverError(RuntimeError):
    """Diagonalization failed to converge or produced an invalid spectrum."""


@dataclass(frozen=True)
class OscillatorParams:
    """Physical constants of the coupled-oscillator model."""

    epsilon: float
    omega_x: float = 1.0
    omega_y: float = DEFAULT_OMEGA_Y
    mass_x: float = 1.0
    mass_y: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "mass_x", "mass_y", "hbar"):
            if not getattr(self, name) > 0.0:
                raise ValueError("%s must be positive" % name)
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True)
class BasisIndexMap:
    """Bijection between the flat basis index m and the doublet (n_x, n_y).

    Doublets with n_x + n_y <= cutoff are ordered shell by shell (total
    quantum number ascending) and by descending n_y inside each shell:
    (0,0), (0,1), (1,0), (0,2), (1,1), (2,0), ...
    """

    cutoff: int
    pairs: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.pairs)

    def index_of(self, n_x: int, n_y: int) -> int:
        total = n_x + n_y
        if n_x < 0 or n_y < 0 or total > self.cutoff:
            raise IndexError("doublet (%d, %d) outside cutoff %d" % (n_x, n_y, self.cutoff))
        return total * (total + 1) // 2 + n_x

    def quantum_numbers(self):
        """(n_x, n_y) as two int64 arrays aligned with the flat index."""
        arr = np.array(self.pairs, dtype=np.int64)
        return arr[:, 0].copy(), arr[:, 1].copy()


def enumerate_basis(cutoff: int) -> BasisIndexMap:
    """All (n_x, n_y) doublets with n_x + n_y <= cutoff in canonical order."""
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    pairs = []
    for total in range(cutoff + 1):
        for n_x in range(total + 1):
            pairs.append((n_x, total - n_x))
    return BasisIndexMap(cutoff=cutoff, pairs=tuple(pairs))


def unperturbed_energy(n_x: int, n_y: int, params: OscillatorParams) -> float:
    """Harmonic energy (n_x + 1/2) hbar omega_x + (n_y + 1/2) hbar omega_y."""
    if n_x < 0 or n_y < 0:
        raise ValueError("quantum numbers must be >= 0")
    return params.hbar * ((n_x + 0.5) * params.omega_x + (n_y + 0.5) * params.omega_y)


def _x_element(a: int, b: int, mass: float, omega: float, hbar: float) -> float:
    # <a|x|b>, nonzero only for |a-b| = 1
    if abs(a - b) != 1:
        return 0.0
    n = max(a, b)
    return math.sqrt(n * hbar / (2.0 * mass * omega))


def _y2_element(a: int, b: int, mass: float, omega: float, hbar: float) -> float:
    # <a|y^2|b>, nonzero only for a = b or |a-b| = 2
    scale = hbar / (2.0 * mass * omega)
    if a == b:
        return (2.0 * a + 1.0) * scale
    if abs(a - b) == 2:
        n = min(a, b)
        return math.sqrt((n + 1.0) * (n + 2.0)) * scale
    return 0.0


def coupling_matrix_element(q: int, r: int, basis: BasisIndexMap, params: OscillatorParams) -> float:
    """Matrix element <q|H|r>: harmonic diagonal plus the x*y^2 coupling."""
    if not (0 <= q < basis.size and 0 <= r < basis.size):
        raise IndexError("basis index out of range")
    qx, qy = basis.pairs[q]
    rx, ry = basis.pairs[r]
    value = 0.0
    if q == r:
        value += unperturbed_energy(qx, qy, params)
    value += params.epsilon * _x_element(qx, rx, params.mass_x, params.omega_x, params.hbar) * _y2_element(
        qy, ry, params.mass_y, params.omega_y, params.hbar
    )
    return value


@dataclass(frozen=True)
class HamiltonianMatrix:
    dim: int
    entries: np.ndarray = field(repr=False)


def build_hamiltonian(basis: BasisIndexMap, params: OscillatorParams) -> HamiltonianMatrix:
    """Dense symmetric Hamiltonian in the truncated oscillator basis.

    Each off-diagonal entry is written to both (q, r) and (r, q) from a
    single evaluation, so the matrix is symmetric bit for bit.
    """
    n = basis.size
    h = np.zeros((n, n))
    for q in range(n):
        h[q, q] = coupling_matrix_element(q, q, basis, params)
        qx, qy = basis.pairs[q]
        for r in range(q + 1, n):
            rx, ry = basis.pairs[r]
            if abs(qx - rx) != 1 or abs(qy - ry) not in (0, 2):
                continue
            value = coupling_matrix_element(q, r, basis, params)
            h[q, r] = value
            h[r, q] = value
    return HamiltonianMatrix(dim=n, entries=h)


@dataclass(frozen=True)
class SpectralModel:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of H,
    together with the basis and parameters they were computed from."""

    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    basis: BasisIndexMap
    params: OscillatorParams

    @property
    def dim(self) -> int:
        return self.eigenvalues.size


def _canonical_eigvec_order(evals: np.ndarray, evecs: np.ndarray):
    """Deterministic ordering and signs.

    Inside any degenerate cluster (gap < 1e-12 * scale) columns are ordered
    by the row index of their largest-magnitude component; every column is
    flipped so that component is positive.
    """
    n = evals.size
    scale = max(1.0, float(np.max(np.abs(evals))))
    order = np.arange(n)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and evals[stop] - evals[stop - 1] < 1e-12 * scale:
            stop += 1
        if stop - start > 1:
            cluster = order[start:stop]
            anchor_rows = [int(np.argmax(np.abs(evecs[:, c]))) for c in cluster]
            order[start:stop] = cluster[np.argsort(anchor_rows, kind="stable")]
        start = stop
    evals = evals[order]
    evecs = evecs[:, order]
    for c in range(n):
        anchor = int(np.argmax(np.abs(evecs[:, c])))
        if evecs[anchor, c] < 0.0:
            evecs[:, c] = -evecs[:, c]
    return evals, evecs


def diagonalize(h: HamiltonianMatrix, basis: BasisIndexMap, params: OscillatorParams) -> SpectralModel:
    """Solve the dense symmetric eigenproblem and validate the result."""
    matrix = h.entries
    try:
        evals, evecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError("eigensolver did not converge: %s" % exc) from exc
    evals, evecs = _canonical_eigvec_order(evals.copy(), evecs.copy())

    ortho = np.max(np.abs(evecs.T @ evecs - np.eye(h.dim)))
    if ortho >= 1e-10:
        raise EigensolverError("eigenvector orthonormality defect %.3e" % ortho)
    residual = np.max(np.abs(evecs @ (evals[:, None] * evecs.T) - matrix))
    bound = 1e-9 * max(1.0, float(np.max(np.abs(matrix))))
    if residual >= bound:
        raise EigensolverError("spectral reconstruction residual %.3e" % residual)
    return SpectralModel(eigenvalues=evals, eigenvectors=evecs, basis=basis, params=params)
