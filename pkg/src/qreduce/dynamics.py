"""Time evolution: Schrodinger flow and the energy-driven reduction SDE.

The stochastic dynamics is integrated in the ambient Hilbert space rather
than in an affine chart, so trajectories remain well behaved at the
eigenstates they converge to. One Euler-Maruyama step of the ambient lift is

    psi <- psi + [-i H - (sigma^2/8) (H - <H>)^2] psi dt
               + (sigma/2) (H - <H>) psi dW,

followed by renormalization. Ito calculus on this update gives exactly

    d<H> = sigma V dW                      (energy martingale)
    dV   = -sigma^2 V^2 dt + sigma B dW    (uncertainty decay)

where V is the quantum uncertainty and B its third central moment, which is
the calibration the drift/diffusion coefficients were chosen for. The drift
forces V -> 0 almost surely, i.e. collapse onto a Hamiltonian eigenspace.

Noise streams are counter-based: the Gaussian increment of trajectory ``i``
at step ``k`` is entry ``i`` of the Philox-4x64 stream keyed by (seed, k).
Entries of such a stream depend only on their position, so every trajectory
is bit-reproducible regardless of batching, scheduling or worker count.

Two integrators share these conventions:

* ``reduction_step`` / ``simulate_trajectory`` apply the plain Euler-Maruyama
  update above; the deterministic part converges at first order to the exact
  unitary flow.
* The batched ensemble engine (``run_reduction_batch``) splits each step into
  an exact unitary half (spectral propagator) and the same Euler-Maruyama
  stochastic half. In the Hamiltonian eigenbasis the unitary half is a pure
  phase and the stochastic half is a real, componentwise multiplier, so the
  engine evolves outcome probabilities directly. This removes the
  deterministic distortion of plain Euler at large step counts and is what
  makes 10^4-trajectory ensembles cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .errors import (
    ConfigurationError,
    InsufficientDataError,
    IntegrationFailureError,
    ValidationError,
)
from .geometry import quadric_residual
from .hilbert import Observable, Ray, StateVector, as_amplitudes, eigensystem

# Hard ceiling on sigma^2 ||H||^2 dt; beyond this the Euler noise kicks are
# no longer small relative to the state and the discretization is unreliable.
STABILITY_LIMIT = 0.1

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class SdeConfig:
    """Parameters of one reduction integration.

    sigma : noise strength, units energy^-1 time^-1/2
    dt : time step
    t_max : integration horizon
    collapse_variance_tol : uncertainty threshold declaring collapse; None
        selects 1e-8 * V(psi0) (with a tiny absolute floor for eigenvector
        starts) at simulation time
    seed : 64-bit unsigned seed of the noise streams
    record_stride : record every this many steps
    """

    sigma: float
    dt: float
    t_max: float
    collapse_variance_tol: float | None = None
    seed: int = 0
    record_stride: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ValidationError("sigma must be finite and >= 0")
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ValidationError("dt must be finite and > 0")
        if not (np.isfinite(self.t_max) and self.t_max > 0.0):
            raise ValidationError("t_max must be finite and > 0")
        if self.collapse_variance_tol is not None and not self.collapse_variance_tol > 0.0:
            raise ValidationError("collapse_variance_tol must be positive")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed <= _U64_MAX):
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if not (isinstance(self.record_stride, (int, np.integer)) and self.record_stride >= 1):
            raise ValidationError("record_stride must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class TrajectoryRecord:
    """State of one trajectory at a recorded step.

    ``quadric_residual`` is populated only for four-dimensional states;
    ``wiener_increment_sum`` is the realized W_t up to this time.
    """

    time: float
    ray: Ray
    energy_mean: float
    variance: float
    third_moment: float
    quadric_residual: float | None
    wiener_increment_sum: float


@dataclass(frozen=True)
class CollapseOutcome:
    collapsed: bool
    eigenspace_index: int | None
    hitting_time: float | None
    final_record: TrajectoryRecord


def step_normals(seed: int, step: int, count: int) -> np.ndarray:
    """Standard normals 0..count-1 of the noise stream for one time step.

    Entry ``i`` is a pure function of (seed, step, i): streams are opened at
    Philox counter (0, 0, 0, step) with key (seed, 0), and generating a longer
    prefix never changes earlier entries.
    """
    bg = Philox(
        key=np.array([seed, 0], dtype=np.uint64),
        counter=np.array([0, 0, 0, step], dtype=np.uint64),
    )
    return Generator(bg).standard_normal(count)


def stability_guard(H: Observable, cfg: SdeConfig) -> None:
    """Raise ConfigurationError unless sigma^2 ||H||^2 dt < 0.1 (spectral norm)."""
    value = cfg.sigma**2 * H.spectral_norm() ** 2 * cfg.dt
    if not value < STABILITY_LIMIT:
        raise ConfigurationError(
            f"stability guard violated: sigma^2 ||H||^2 dt = {value:.3g} >= {STABILITY_LIMIT}"
        )


def resolve_collapse_tol(cfg: SdeConfig, H: Observable, psi0) -> float:
    """Collapse threshold: configured value, or 1e-8 * V(psi0) with a floor.

    The floor 1e-20 ||H||^2 keeps eigenvector starts (V numerically ~0)
    classifiable as collapsed without admitting genuinely uncollapsed states.
    """
    if cfg.collapse_variance_tol is not None:
        return cfg.collapse_variance_tol
    from .hilbert import variance as _variance

    v0 = _variance(H, psi0)
    return max(1e-8 * v0, 1e-20 * max(H.spectral_norm(), 1e-150) ** 2)


def unitary_evolve(H: Observable, psi0, t: float) -> StateVector:
    """exp(-i H t) psi0 through the spectral decomposition; norm-preserving."""
    if not np.isfinite(t):
        raise ValidationError("t must be finite")
    z = as_amplitudes(psi0, "psi0")
    if z.size != H.dim:
        raise ValidationError("state and observable dimensions differ")
    evals, evecs = H.eig()
    phases = np.exp(-1j * evals * t)
    return StateVector(evecs @ (phases * (evecs.conj().T @ z)))


def _euler_update(Hmat: np.ndarray, psi: np.ndarray, sigma: float, dt: float,
                  dw: float) -> np.ndarray:
    """One renormalized Euler-Maruyama step on a unit-norm ambient state."""
    Hpsi = Hmat @ psi
    m = np.vdot(psi, Hpsi).real
    d1 = Hpsi - m * psi
    d2 = Hmat @ d1 - m * d1
    out = psi + dt * (-1j * Hpsi - (sigma**2 / 8.0) * d2) + (0.5 * sigma * dw) * d1
    nrm = np.linalg.norm(out)
    if not (np.isfinite(nrm) and nrm > 0.0):
        return out  # caller detects the failure
    return out / nrm


def reduction_step(H: Observable, psi, cfg: SdeConfig, dw: float) -> StateVector:
    """One Euler-Maruyama step of the reduction SDE, renormalized.

    ``psi`` should be unit norm and ``dw`` a Gaussian increment of variance
    ``cfg.dt``. With sigma = 0 the step agrees with the exact unitary flow to
    O(dt^2); an eigenvector input is fixed up to global phase for any ``dw``.
    """
    stability_guard(H, cfg)
    z = as_amplitudes(psi, "psi")
    if z.size != H.dim:
        raise ValidationError("state and observable dimensions differ")
    out = _euler_update(H.matrix, z, cfg.sigma, cfg.dt, dw)
    if not np.all(np.isfinite(out)):
        raise IntegrationFailureError("state became non-finite in reduction step")
    return StateVector(out)


def _moments_of(Hmat: np.ndarray, psi: np.ndarray) -> tuple[float, float, float]:
    Hpsi = Hmat @ psi
    m = float(np.vdot(psi, Hpsi).real)
    r = Hpsi - m * psi
    v = float(np.vdot(r, r).real)
    beta = float(np.vdot(r, Hmat @ r - m * r).real)
    return m, v, beta


def _make_record(t: float, psi: np.ndarray, m: float, v: float, beta: float,
                 w_sum: float) -> TrajectoryRecord:
    residual = quadric_residual(psi) if psi.size == 4 else None
    return TrajectoryRecord(
        time=t,
        ray=Ray(psi),
        energy_mean=m,
        variance=v,
        third_moment=beta,
        quadric_residual=residual,
        wiener_increment_sum=w_sum,
    )


def simulate_trajectory(
    H: Observable,
    psi0,
    cfg: SdeConfig,
    trajectory_index: int = 0,
) -> tuple[list[TrajectoryRecord], CollapseOutcome]:
    """Integrate one reduction trajectory with collapse detection.

    Iterates ``reduction_step`` with Wiener increments from the counter-based
    stream of ``trajectory_index``, recording every ``cfg.record_stride``
    steps (the initial state and the final state are always recorded).
    Collapse is declared as soon as the uncertainty V drops below the
    resolved threshold; the reported eigenspace is the one with maximal
    squared projection. The result is a pure function of
    (H, psi0, cfg, trajectory_index).

    Returns (records, outcome). Without collapse by t_max the outcome has
    ``collapsed=False`` and carries the final record.

    Raises IntegrationFailureError (with the last valid record attached) if
    the state becomes non-finite.
    """
    stability_guard(H, cfg)
    if trajectory_index < 0:
        raise ValidationError("trajectory_index must be >= 0")
    z = as_amplitudes(psi0, "psi0")
    if z.size != H.dim:
        raise ValidationError("state and observable dimensions differ")
    psi = z / np.linalg.norm(z)
    tol = resolve_collapse_tol(cfg, H, psi)
    Hmat = H.matrix
    n_steps = cfg.n_steps
    sqdt = math.sqrt(cfg.dt)

    records: list[TrajectoryRecord] = []
    w_sum = 0.0
    last_record: TrajectoryRecord | None = None
    for k in range(n_steps + 1):
        t = k * cfg.dt
        m, v, beta = _moments_of(Hmat, psi)
        recorded = False
        if k % cfg.record_stride == 0:
            last_record = _make_record(t, psi, m, v, beta, w_sum)
            records.append(last_record)
            recorded = True
        if v < tol:
            if not recorded:
                last_record = _make_record(t, psi, m, v, beta, w_sum)
                records.append(last_record)
            spaces = eigensystem(H)
            projections = [
                float(np.vdot(psi, s.projector @ psi).real) for s in spaces
            ]
            return records, CollapseOutcome(
                collapsed=True,
                eigenspace_index=int(np.argmax(projections)),
                hitting_time=t,
                final_record=last_record,
            )
        if k == n_steps:
            break
        dw = float(step_normals(cfg.seed, k, trajectory_index + 1)[trajectory_index]) * sqdt
        psi = _euler_update(Hmat, psi, cfg.sigma, cfg.dt, dw)
        if not np.all(np.isfinite(psi)):
            raise IntegrationFailureError(
                f"state became non-finite at step {k + 1}", last_record=last_record
            )
        w_sum += dw

    m, v, beta = _moments_of(Hmat, psi)
    final = _make_record(n_steps * cfg.dt, psi, m, v, beta, w_sum)
    if not records or records[-1].time != final.time:
        records.append(final)
    return records, CollapseOutcome(
        collapsed=False, eigenspace_index=None, hitting_time=None, final_record=final
    )


# ---------------------------------------------------------------------------
# Batched ensemble engine
# ---------------------------------------------------------------------------

@dataclass
class BatchResult:
    """Per-trajectory results of one batch, indexed by global trajectory index."""

    indices: np.ndarray            # global trajectory indices of this batch
    outcome_group: np.ndarray      # eigenspace index, -1 uncollapsed, -2 failed
    hit_step: np.ndarray           # collapse step, -1 if none
    checkpoint_energy: np.ndarray  # (n_checkpoints, batch)
    checkpoint_variance: np.ndarray
    final_energy: np.ndarray
    final_variance: np.ndarray
    final_probs: np.ndarray | None  # eigenbasis |amplitude|^2 at end, if collected


def run_reduction_batch(
    evals: np.ndarray,
    group_map: np.ndarray,
    psi0_eig: np.ndarray,
    sigma: float,
    dt: float,
    n_steps: int,
    tol: float,
    seed: int,
    lo: int,
    hi: int,
    checkpoint_steps: tuple[int, ...],
    collect_final_probs: bool = False,
) -> BatchResult:
    """Advance trajectories lo..hi-1 of an ensemble through the reduction SDE.

    Works in the Hamiltonian eigenbasis, where one split step (exact unitary
    then stochastic Euler part) multiplies each amplitude by a phase times the
    real factor 1 + (lam_k - <H>)((sigma/2) dW - (sigma^2 dt / 8)(lam_k - <H>)).
    Squared amplitudes therefore evolve autonomously and the engine tracks
    them directly; phases advance deterministically and are reattached by the
    caller when final states are needed. (The real factor could in principle
    go negative and flip a phase, but under the stability guard that is a
    >10-sigma event per step; it would not affect probabilities.)

    Rows are independent: results for a trajectory do not depend on which
    batch it runs in, which makes ensembles bit-reproducible for any
    partitioning into batches or workers.
    """
    n = hi - lo
    dim = evals.size
    n_groups = int(group_map.max()) + 1
    indicator = np.zeros((dim, n_groups))
    indicator[np.arange(dim), group_map] = 1.0

    p = np.tile(np.abs(psi0_eig) ** 2, (n, 1))
    p /= p.sum(axis=1)[:, None]
    active = np.arange(lo, hi, dtype=np.int64)

    outcome = np.full(n, -1, dtype=np.int64)
    hit_step = np.full(n, -1, dtype=np.int64)
    n_cp = len(checkpoint_steps)
    cp_energy = np.zeros((n_cp, n))
    cp_var = np.zeros((n_cp, n))
    last_energy = np.zeros(n)
    last_var = np.zeros(n)
    final_probs = np.zeros((n, dim)) if collect_final_probs else None

    cp_pos = {int(s): i for i, s in enumerate(checkpoint_steps)}
    sqdt = math.sqrt(dt)
    c1 = 0.5 * sigma
    c2 = (sigma**2 / 8.0) * dt

    def retire(local_mask: np.ndarray, m: np.ndarray, v: np.ndarray, group: np.ndarray):
        nonlocal p, active
        rows = active[local_mask] - lo
        outcome[rows] = group
        hit_step[rows] = k
        last_energy[rows] = m[local_mask]
        last_var[rows] = v[local_mask]
        if final_probs is not None:
            final_probs[rows] = p[local_mask]
        keep = ~local_mask
        p = p[keep]
        active = active[keep]

    for k in range(n_steps + 1):
        if active.size:
            m = p @ evals
            w = evals[None, :] - m[:, None]
            v = np.einsum("ij,ij->i", p, w * w)
        else:
            m = v = np.empty(0)
        if k in cp_pos:
            i_cp = cp_pos[k]
            cp_energy[i_cp] = last_energy
            cp_var[i_cp] = last_var
            if active.size:
                cp_energy[i_cp, active - lo] = m
                cp_var[i_cp, active - lo] = v
        if active.size == 0:
            continue
        bad = ~np.isfinite(v)
        if bad.any():
            retire(bad, np.where(bad, 0.0, m), np.where(bad, 0.0, v),
                   np.full(int(bad.sum()), -2, dtype=np.int64))
            # retire() already compacted arrays; recompute views
            if active.size == 0:
                continue
            m = p @ evals
            w = evals[None, :] - m[:, None]
            v = np.einsum("ij,ij->i", p, w * w)
        coll = v < tol
        if coll.any():
            group = np.argmax(p[coll] @ indicator, axis=1).astype(np.int64)
            retire(coll, m, v, group)
            if active.size == 0:
                continue
            m = p @ evals
            w = evals[None, :] - m[:, None]
        if k == n_steps:
            rows = active - lo
            last_energy[rows] = m
            last_var[rows] = np.einsum("ij,ij->i", p, w * w)
            if final_probs is not None:
                final_probs[rows] = p
            break
        dw = step_normals(seed, k, int(active[-1]) + 1)[active] * sqdt
        mult = 1.0 + w * (c1 * dw[:, None] - c2 * w)
        np.multiply(mult, mult, out=mult)
        p *= mult
        p /= p.sum(axis=1)[:, None]

    return BatchResult(
        indices=np.arange(lo, hi, dtype=np.int64),
        outcome_group=outcome,
        hit_step=hit_step,
        checkpoint_energy=cp_energy,
        checkpoint_variance=cp_var,
        final_energy=last_energy,
        final_variance=last_var,
        final_probs=final_probs,
    )


def variance_drift_estimate(
    H: Observable,
    psi0,
    cfg: SdeConfig,
    n_traj: int,
) -> tuple[float, float]:
    """Calibration check of the uncertainty drift against -sigma^2 V^2.

    Runs ``n_traj`` trajectories and regresses the ensemble-averaged per-step
    change of V on the predicted drift -sigma^2 E[V^2] dt, over the segment
    before any trajectory collapses. A correctly calibrated integrator gives
    slope 1.

    Returns (slope, stderr). Raises InsufficientDataError when there is no
    usable pre-collapse data (sigma = 0, an eigenvector start, or immediate
    collapse).
    """
    if n_traj < 100:
        raise ValidationError("n_traj must be >= 100 for the drift estimate")
    stability_guard(H, cfg)
    z = as_amplitudes(psi0, "psi0")
    if z.size != H.dim:
        raise ValidationError("state and observable dimensions differ")
    z = z / np.linalg.norm(z)
    evals, evecs = H.eig()
    psi0_eig = evecs.conj().T @ z
    tol = resolve_collapse_tol(cfg, H, z)
    p = np.tile(np.abs(psi0_eig) ** 2, (n_traj, 1))
    p /= p.sum(axis=1)[:, None]

    sqdt = math.sqrt(cfg.dt)
    c1 = 0.5 * cfg.sigma
    c2 = (cfg.sigma**2 / 8.0) * cfg.dt
    mean_v: list[float] = []
    mean_v2: list[float] = []
    for k in range(cfg.n_steps + 1):
        m = p @ evals
        w = evals[None, :] - m[:, None]
        v = np.einsum("ij,ij->i", p, w * w)
        if not np.all(np.isfinite(v)):
            break
        mean_v.append(float(v.mean()))
        if np.any(v < tol) or k == cfg.n_steps:
            break
        mean_v2.append(float((v * v).mean()))
        dw = step_normals(cfg.seed, k, n_traj) * sqdt
        mult = 1.0 + w * (c1 * dw[:, None] - c2 * w)
        np.multiply(mult, mult, out=mult)
        p *= mult
        p /= p.sum(axis=1)[:, None]

    y = np.diff(np.asarray(mean_v))
    x = -cfg.sigma**2 * np.asarray(mean_v2)[: y.size] * cfg.dt
    if y.size < 2:
        raise InsufficientDataError("fewer than two pre-collapse steps")
    sxx = float(x @ x)
    if sxx <= 0.0:
        raise InsufficientDataError("predicted drift is identically zero")
    slope = float(x @ y) / sxx
    resid = y - slope * x
    stderr = math.sqrt(float(resid @ resid) / ((y.size - 1) * sxx))
    return slope, stderr
