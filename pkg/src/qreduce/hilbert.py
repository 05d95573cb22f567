"""Finite-dimensional Hilbert-space primitives.

State vectors, rays (projective equivalence classes), Hermitian observables,
and the statistical moments of an observable in a state. Everything here is
an immutable value; all operations are pure functions, so objects can be
shared freely between concurrent workers.

Conventions: hbar = 1 throughout, so energies are inverse times. Matrices are
dense; dimensions up to ~64 are the intended regime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

# Magnitude below which an amplitude is treated as zero when picking the
# phase-fixing component of a canonical ray representative.
NONZERO_THRESHOLD = 1e-14

# Relative tolerance for accepting a matrix as Hermitian.
HERMITIAN_RTOL = 1e-12


def as_amplitudes(psi, name: str = "psi") -> np.ndarray:
    """Coerce ``psi`` to a complex 1-d array of amplitudes.

    Accepts StateVector, Ray, ProjectivePoint or any array-like. Raises
    DomainError for the zero vector and ValidationError for malformed input
    (wrong shape, non-finite entries).
    """
    for attr in ("amplitudes", "vector", "homogeneous"):
        wrapped = getattr(psi, attr, None)
        if isinstance(wrapped, np.ndarray):
            return wrapped
    arr = np.asarray(psi, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-d amplitude vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite amplitudes")
    if not np.any(arr):
        raise DomainError(f"{name} is the zero vector")
    return arr


def canonicalize(amplitudes) -> np.ndarray:
    """Canonical ray representative: unit norm, first nonzero amplitude real > 0."""
    z = as_amplitudes(amplitudes)
    z = z / np.linalg.norm(z)
    mags = np.abs(z)
    nonzero = np.nonzero(mags > NONZERO_THRESHOLD)[0]
    # Norm is 1, so at least one component exceeds the threshold.
    k = int(nonzero[0])
    z = z * (mags[k] / z[k])
    out = z.copy()
    out.flags.writeable = False
    return out


class StateVector:
    """An unnormalized vector of complex probability amplitudes."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes):
        arr = as_amplitudes(amplitudes, "amplitudes").copy()
        n2 = float(np.vdot(arr, arr).real)
        if not np.isfinite(n2) or n2 <= 0.0:
            raise DomainError("state vector must have finite positive norm")
        arr.flags.writeable = False
        object.__setattr__(self, "amplitudes", arr)

    def __setattr__(self, *_):
        raise AttributeError("StateVector is immutable")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm())

    def ray(self) -> "Ray":
        return Ray(self.amplitudes)

    def __repr__(self):
        return f"StateVector({self.amplitudes.tolist()!r})"


class Ray:
    """A projective equivalence class of state vectors, stored canonically.

    Two vectors related by any nonzero complex scalar canonicalize to the
    same representative (to floating tolerance), so rays compare by value.
    """

    __slots__ = ("vector",)

    def __init__(self, state):
        object.__setattr__(self, "vector", canonicalize(state))

    def __setattr__(self, *_):
        raise AttributeError("Ray is immutable")

    @property
    def dim(self) -> int:
        return self.vector.size

    def state(self) -> StateVector:
        return StateVector(self.vector)

    def approx_eq(self, other: "Ray", tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.vector, other.vector, rtol=0.0, atol=tol))

    def distance_to(self, other: "Ray") -> float:
        """Fubini-Study geodesic distance to another ray, in [0, pi]."""
        overlap = abs(np.vdot(self.vector, other.vector))
        return 2.0 * float(np.arccos(np.clip(overlap, 0.0, 1.0)))

    def __repr__(self):
        return f"Ray({self.vector.tolist()!r})"


class Observable:
    """A Hermitian matrix in energy units, with a cached spectral decomposition."""

    __slots__ = ("matrix", "_eig")

    def __init__(self, matrix):
        arr = np.asarray(matrix, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise ValidationError("observable must be a nonempty square matrix")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("observable contains non-finite entries")
        scale = np.linalg.norm(arr)
        if np.linalg.norm(arr - arr.conj().T) > HERMITIAN_RTOL * max(scale, 1e-300):
            raise ValidationError("observable is not Hermitian to relative tolerance 1e-12")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "matrix", arr)
        object.__setattr__(self, "_eig", None)

    def __setattr__(self, *_):
        raise AttributeError("Observable is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eig(self):
        """Eigenvalues (ascending) and orthonormal eigenvectors, cached."""
        if self._eig is None:
            evals, evecs = np.linalg.eigh(self.matrix)
            evals.flags.writeable = False
            evecs.flags.writeable = False
            object.__setattr__(self, "_eig", (evals, evecs))
        return self._eig

    def spectral_norm(self) -> float:
        evals, _ = self.eig()
        return float(np.max(np.abs(evals))) if evals.size else 0.0

    def __repr__(self):
        return f"Observable({self.matrix.tolist()!r})"


@dataclass(frozen=True)
class MomentTriple:
    """Mean, variance and third central moment of an observable in a state.

    Units: energy, energy^2, energy^3. All three vanish together exactly
    when the state is an eigenvector.
    """

    mean: float
    variance: float
    third: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValidationError("variance must be nonnegative")


@dataclass(frozen=True)
class Eigenspace:
    """One (possibly degenerate) eigenspace: eigenvalue and orthogonal projector."""

    eigenvalue: float
    projector: np.ndarray
    dimension: int


def _moments_raw(H: Observable, psi) -> tuple[float, float, float]:
    z = as_amplitudes(psi)
    if z.size != H.dim:
        raise ValidationError(f"state dimension {z.size} != observable dimension {H.dim}")
    n2 = float(np.vdot(z, z).real)
    Hz = H.matrix @ z
    mean = float(np.vdot(z, Hz).real) / n2
    r = Hz - mean * z  # (H - <H>) psi
    var = float(np.vdot(r, r).real) / n2
    third = float(np.vdot(r, H.matrix @ r - mean * r).real) / n2
    return mean, var, third


def expectation(H: Observable, psi) -> float:
    """Expectation value sum_{j,k} H_{j,k} z^j conj(z^k) / sum |z^j|^2.

    Invariant under rescaling of ``psi`` by any nonzero complex number.
    """
    return _moments_raw(H, psi)[0]


def variance(H: Observable, psi) -> float:
    """Quantum uncertainty <(H - <H>)^2> of ``H`` in the state ``psi``.

    Computed as ||(H - <H>)psi||^2 / ||psi||^2, which is nonnegative by
    construction and vanishes exactly when ``psi`` is an eigenvector.
    """
    return _moments_raw(H, psi)[1]


def third_central_moment(H: Observable, psi) -> float:
    """Third central moment <(H - <H>)^3> of ``H`` in the state ``psi``.

    This is the noise coefficient of the uncertainty process driven by the
    energy-based reduction dynamics (see the dynamics module).
    """
    return _moments_raw(H, psi)[2]


def moments(H: Observable, psi) -> MomentTriple:
    """All three moments in one pass over the state."""
    mean, var, third = _moments_raw(H, psi)
    return MomentTriple(mean=mean, variance=max(var, 0.0), third=third)


def eigensystem(H: Observable, degeneracy_tol: float | None = None) -> list[Eigenspace]:
    """Spectral decomposition with near-degenerate eigenvalues merged.

    Parameters
    ----------
    H : Observable
    degeneracy_tol : float, optional
        Eigenvalues closer than this merge into a single eigenspace.
        Defaults to 1e-9 * spectral_norm(H). Use 0.0 to forbid merging.

    Returns
    -------
    list of Eigenspace, eigenvalues ascending. Projectors are mutually
    orthogonal and sum to the identity. The eigenvalue reported for a merged
    space is the mean of its members.
    """
    evals, evecs = H.eig()
    if degeneracy_tol is None:
        degeneracy_tol = 1e-9 * H.spectral_norm()
    spaces: list[Eigenspace] = []
    start = 0
    for i in range(1, evals.size + 1):
        if i == evals.size or evals[i] - evals[i - 1] > degeneracy_tol:
            block = evecs[:, start:i]
            proj = block @ block.conj().T
            proj.flags.writeable = False
            spaces.append(
                Eigenspace(
                    eigenvalue=float(np.mean(evals[start:i])),
                    projector=proj,
                    dimension=i - start,
                )
            )
            start = i
    return spaces


def eigenspace_index_map(H: Observable, degeneracy_tol: float | None = None) -> np.ndarray:
    """Map from raw eigh eigenvector index to its merged eigenspace index."""
    evals, _ = H.eig()
    if degeneracy_tol is None:
        degeneracy_tol = 1e-9 * H.spectral_norm()
    group = np.zeros(evals.size, dtype=np.int64)
    g = 0
    for i in range(1, evals.size):
        if evals[i] - evals[i - 1] > degeneracy_tol:
            g += 1
        group[i] = g
    return group
