"""Monte Carlo harness over reduction trajectories with statistical verdicts.

Trajectories are embarrassingly parallel: each one is a pure function of
(Hamiltonian, initial state, config, trajectory index), so the ensemble is
partitioned into contiguous index blocks that may run on any number of
workers. Results are reassembled by trajectory index and reduced in that
canonical order, which makes reports bit-identical for a fixed seed
regardless of worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _scipy_stats

from .dynamics import (
    SdeConfig,
    resolve_collapse_tol,
    run_reduction_batch,
    stability_guard,
)
from .errors import EnsembleFailureError, ValidationError
from .hilbert import (
    Observable,
    StateVector,
    as_amplitudes,
    eigensystem,
    eigenspace_index_map,
)


@dataclass(frozen=True)
class EnsembleConfig:
    """An ensemble run: how many trajectories of which scenario, observed when."""

    n_traj: int
    base: SdeConfig
    hamiltonian: Observable
    initial_state: StateVector
    checkpoints: tuple[float, ...]

    def __post_init__(self):
        if not (isinstance(self.n_traj, (int, np.integer)) and self.n_traj >= 1):
            raise ValidationError("n_traj must be a positive integer")
        if not isinstance(self.hamiltonian, Observable):
            object.__setattr__(self, "hamiltonian", Observable(self.hamiltonian))
        if not isinstance(self.initial_state, StateVector):
            object.__setattr__(self, "initial_state", StateVector(self.initial_state))
        if self.initial_state.dim != self.hamiltonian.dim:
            raise ValidationError("initial state and Hamiltonian dimensions differ")
        cps = tuple(float(t) for t in self.checkpoints)
        if list(cps) != sorted(cps):
            raise ValidationError("checkpoints must be sorted ascending")
        if cps and (cps[0] < 0.0 or cps[-1] > self.base.t_max):
            raise ValidationError("checkpoints must lie within [0, t_max]")
        object.__setattr__(self, "checkpoints", cps)


@dataclass(frozen=True)
class SeriesPoint:
    t: float
    mean: float
    stderr: float


@dataclass
class EnsembleReport:
    """Aggregated results of one ensemble run.

    ``outcome_counts`` maps eigenspace index to the number of trajectories
    collapsed there; uncollapsed and failed trajectories are excluded from the
    counts and reported separately. ``wall_clock`` is informational and not
    part of the serialized report.
    """

    n_traj: int
    sigma: float
    dt: float
    t_max: float
    seed: int
    checkpoints: tuple[float, ...]
    eigenvalues: tuple[float, ...]
    eigenspace_dims: tuple[int, ...]
    outcome_counts: dict[int, int]
    expected_born: dict[int, float]
    chi_square: float
    chi_square_dof: int
    chi_square_pvalue: float
    energy_mean_series: tuple[SeriesPoint, ...]
    variance_mean_series: tuple[SeriesPoint, ...]
    initial_energy: float
    initial_variance: float
    uncollapsed_count: int
    failed_indices: tuple[int, ...]
    wall_clock: float
    final_states: np.ndarray | None = field(default=None, repr=False)

    def collapsed_count(self) -> int:
        return sum(self.outcome_counts.values())

    def to_json_dict(self) -> dict:
        """Report fields as plain JSON types, stable keys, reproducible values.

        ``wall_clock`` and ``final_states`` are deliberately omitted: the
        serialized report must be byte-identical across reruns of the same
        (config, seed) with any worker count.
        """
        return {
            "n_traj": int(self.n_traj),
            "sigma": float(self.sigma),
            "dt": float(self.dt),
            "t_max": float(self.t_max),
            "seed": int(self.seed),
            "checkpoints": [float(t) for t in self.checkpoints],
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "eigenspace_dims": [int(d) for d in self.eigenspace_dims],
            "outcome_counts": {str(k): int(v) for k, v in self.outcome_counts.items()},
            "expected_born": {str(k): float(v) for k, v in self.expected_born.items()},
            "chi_square": float(self.chi_square),
            "chi_square_dof": int(self.chi_square_dof),
            "chi_square_pvalue": float(self.chi_square_pvalue),
            "energy_mean_series": [
                {"t": float(s.t), "mean": float(s.mean), "stderr": float(s.stderr)}
                for s in self.energy_mean_series
            ],
            "variance_mean_series": [
                {"t": float(s.t), "mean": float(s.mean), "stderr": float(s.stderr)}
                for s in self.variance_mean_series
            ],
            "initial_energy": float(self.initial_energy),
            "initial_variance": float(self.initial_variance),
            "uncollapsed_count": int(self.uncollapsed_count),
            "failed_indices": [int(i) for i in self.failed_indices],
        }


@dataclass(frozen=True)
class TestVerdict:
    """Outcome of one statistical test over an ensemble report."""

    name: str
    passed: bool
    applicable: bool = True
    details: dict = field(default_factory=dict)


def born_expected(H: Observable, psi0) -> dict[int, float]:
    """Born probabilities per eigenspace: squared projection of the initial state."""
    z = as_amplitudes(psi0, "psi0")
    if z.size != H.dim:
        raise ValidationError("state and observable dimensions differ")
    n2 = float(np.vdot(z, z).real)
    out = {}
    for i, space in enumerate(eigensystem(H)):
        out[i] = float(np.vdot(z, space.projector @ z).real) / n2
    total = sum(out.values())
    return {k: v / total for k, v in out.items()}


def _run_block(args) -> "object":
    return run_reduction_batch(**args)


def run_ensemble(
    cfg: EnsembleConfig,
    n_workers: int = 1,
    collect_final_states: bool = False,
) -> EnsembleReport:
    """Run the ensemble and aggregate outcome and moment statistics.

    Parameters
    ----------
    cfg : EnsembleConfig
    n_workers : int
        Number of worker processes. Purely a throughput knob: the report is
        bit-identical for any value because trajectory blocks are independent
        and aggregation happens in canonical index order.
    collect_final_states : bool
        Attach an (n_traj, dim) array of final states (original basis) to the
        report for geometric diagnostics. Not serialized.

    Raises EnsembleFailureError if more than 1% of trajectories fail to
    integrate.
    """
    t_start = time.perf_counter()
    H, psi0 = cfg.hamiltonian, cfg.initial_state
    stability_guard(H, cfg.base)
    z0 = psi0.amplitudes / psi0.norm()
    evals, evecs = H.eig()
    group_map = eigenspace_index_map(H)
    spaces = eigensystem(H)
    psi0_eig = evecs.conj().T @ z0
    tol = resolve_collapse_tol(cfg.base, H, z0)
    n_steps = cfg.base.n_steps
    cp_steps = tuple(sorted({int(round(t / cfg.base.dt)) for t in cfg.checkpoints}))
    if any(s > n_steps for s in cp_steps):
        raise ValidationError("a checkpoint rounds past the final step")

    need_probs = collect_final_states
    blocks = []
    n_workers = max(1, int(n_workers))
    n_blocks = min(n_workers, cfg.n_traj)
    bounds = np.linspace(0, cfg.n_traj, n_blocks + 1).astype(int)
    for b in range(n_blocks):
        lo, hi = int(bounds[b]), int(bounds[b + 1])
        if lo == hi:
            continue
        blocks.append(
            dict(
                evals=evals,
                group_map=group_map,
                psi0_eig=psi0_eig,
                sigma=cfg.base.sigma,
                dt=cfg.base.dt,
                n_steps=n_steps,
                tol=tol,
                seed=cfg.base.seed,
                lo=lo,
                hi=hi,
                checkpoint_steps=cp_steps,
                collect_final_probs=need_probs,
            )
        )

    if n_workers == 1 or len(blocks) == 1:
        results = [_run_block(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_block, blocks))

    n = cfg.n_traj
    outcome = np.empty(n, dtype=np.int64)
    hit_step = np.empty(n, dtype=np.int64)
    cp_energy = np.empty((len(cp_steps), n))
    cp_var = np.empty((len(cp_steps), n))
    final_probs = np.empty((n, H.dim)) if need_probs else None
    for res in results:
        sl = slice(int(res.indices[0]), int(res.indices[-1]) + 1)
        outcome[sl] = res.outcome_group
        hit_step[sl] = res.hit_step
        cp_energy[:, sl] = res.checkpoint_energy
        cp_var[:, sl] = res.checkpoint_variance
        if need_probs:
            final_probs[sl] = res.final_probs

    failed = np.nonzero(outcome == -2)[0]
    if failed.size > 0.01 * n:
        raise EnsembleFailureError(
            f"{failed.size} of {n} trajectories failed to integrate"
        )
    ok = outcome != -2
    uncollapsed = int(np.count_nonzero(outcome == -1))
    counts = {
        i: int(np.count_nonzero(outcome == i)) for i in range(len(spaces))
    }
    expected = born_expected(H, z0)
    chi2, dof, pval = _chi_square(counts, expected)

    # Moment series over all non-failed trajectories, canonical index order.
    energy_series = []
    var_series = []
    n_ok = int(np.count_nonzero(ok))
    for i_cp, s in enumerate(cp_steps):
        t = s * cfg.base.dt
        for series, data in ((energy_series, cp_energy), (var_series, cp_var)):
            vals = data[i_cp, ok]
            mean = float(vals.mean()) if n_ok else math.nan
            std = float(vals.std(ddof=1)) if n_ok > 1 else 0.0
            series.append(SeriesPoint(t=t, mean=mean, stderr=std / math.sqrt(max(n_ok, 1))))

    final_states = None
    if collect_final_states:
        # Reattach the deterministic phases: at collapse time t the eigenbasis
        # amplitude k is sqrt(p_k) * phase0_k * exp(-i lam_k t).
        mags = np.abs(psi0_eig)
        phase0 = np.where(mags > 0, psi0_eig / np.where(mags > 0, mags, 1.0), 1.0)
        t_end = np.where(hit_step >= 0, hit_step, n_steps) * cfg.base.dt
        amps = np.sqrt(np.maximum(final_probs, 0.0)).astype(complex)
        amps *= phase0[None, :] * np.exp(-1j * np.outer(t_end, evals))
        final_states = amps @ evecs.T

    m0 = float(np.vdot(z0, H.matrix @ z0).real)
    r0 = H.matrix @ z0 - m0 * z0
    v0 = float(np.vdot(r0, r0).real)

    return EnsembleReport(
        n_traj=n,
        sigma=cfg.base.sigma,
        dt=cfg.base.dt,
        t_max=cfg.base.t_max,
        seed=cfg.base.seed,
        checkpoints=cfg.checkpoints,
        eigenvalues=tuple(float(s.eigenvalue) for s in spaces),
        eigenspace_dims=tuple(int(s.dimension) for s in spaces),
        outcome_counts=counts,
        expected_born=expected,
        chi_square=chi2,
        chi_square_dof=dof,
        chi_square_pvalue=pval,
        energy_mean_series=tuple(energy_series),
        variance_mean_series=tuple(var_series),
        initial_energy=m0,
        initial_variance=v0,
        uncollapsed_count=uncollapsed,
        failed_indices=tuple(int(i) for i in failed),
        wall_clock=time.perf_counter() - t_start,
        final_states=final_states,
    )


def _chi_square(counts: dict[int, int], expected: dict[int, float]) -> tuple[float, int, float]:
    """Goodness-of-fit statistic of collapse counts against Born weights.

    Uncollapsed/failed trajectories are already excluded from ``counts``.
    Eigenspaces with zero Born weight contribute only if observed (then the
    statistic is infinite). With no collapsed trajectories the statistic is 0
    with 0 degrees of freedom.
    """
    n_coll = sum(counts.values())
    if n_coll == 0:
        return 0.0, 0, 1.0
    stat = 0.0
    n_cells = 0
    for k, p in expected.items():
        obs = counts.get(k, 0)
        if p > 0.0:
            exp = p * n_coll
            stat += (obs - exp) ** 2 / exp
            n_cells += 1
        elif obs > 0:
            return math.inf, max(n_cells - 1, 1), 0.0
    dof = max(n_cells - 1, 1)
    pval = float(_scipy_stats.chi2.sf(stat, dof))
    return float(stat), dof, pval


def martingale_test(report: EnsembleReport, z_limit: float = 4.0) -> TestVerdict:
    """Check that the ensemble mean energy stays at its initial value.

    The reduction dynamics makes <H> a martingale, so at every checkpoint the
    z-score (mean_t - mean_0) / stderr_t must be small; the verdict passes iff
    all |z| < ``z_limit``. A checkpoint with zero spread and a mean within
    roundoff of the initial energy scores exactly 0.
    """
    if len(report.energy_mean_series) < 2:
        raise ValidationError("martingale test needs at least two checkpoints")
    m0 = report.initial_energy
    scale = max(1.0, abs(m0))
    z_scores = []
    for pt in report.energy_mean_series:
        diff = pt.mean - m0
        if pt.stderr > 0.0:
            z = diff / pt.stderr
        else:
            z = 0.0 if abs(diff) <= 1e-10 * scale else math.inf
        z_scores.append(float(z))
    passed = all(abs(z) < z_limit for z in z_scores)
    return TestVerdict(
        name="energy_martingale",
        passed=passed,
        details={"z_scores": z_scores, "z_limit": z_limit},
    )


def variance_decay_test(
    report: EnsembleReport,
    z_limit: float = 4.0,
    final_fraction: float = 0.01,
    horizon_threshold: float = 50.0,
) -> TestVerdict:
    """Check monotone decay of the mean uncertainty across checkpoints.

    The mean of V is non-increasing for the reduction dynamics; each
    consecutive checkpoint pair must satisfy mean_{k+1} <= mean_k within
    ``z_limit`` combined standard errors. When the horizon is long enough for
    full reduction (sigma^2 V_0 t_max >= ``horizon_threshold``) the final mean
    must additionally drop below ``final_fraction`` of V_0. With sigma = 0 the
    flow preserves V and the test is not applicable.
    """
    if len(report.variance_mean_series) < 2:
        raise ValidationError("variance decay test needs at least two checkpoints")
    series = report.variance_mean_series
    if report.sigma == 0.0:
        return TestVerdict(
            name="variance_decay",
            passed=True,
            applicable=False,
            details={"reason": "sigma = 0 preserves the uncertainty"},
        )
    increases = []
    monotone = True
    for a, b in zip(series, series[1:]):
        allowance = z_limit * math.hypot(a.stderr, b.stderr)
        if b.mean > a.mean + allowance:
            monotone = False
        increases.append(b.mean - a.mean)
    v0 = report.initial_variance
    details: dict = {"monotone": monotone, "increments": increases}
    passed = monotone
    if report.sigma**2 * v0 * report.t_max >= horizon_threshold and v0 > 0.0:
        final_ok = series[-1].mean < final_fraction * v0
        details["final_mean"] = series[-1].mean
        details["final_bound"] = final_fraction * v0
        passed = passed and final_ok
    return TestVerdict(name="variance_decay", passed=passed, details=details)


def born_frequency_test(report: EnsembleReport, significance: float = 0.01) -> TestVerdict:
    """Chi-square verdict of collapse counts against the Born weights."""
    if not 0.0 < significance < 1.0:
        raise ValidationError("significance must be in (0, 1)")
    if report.collapsed_count() == 0:
        return TestVerdict(
            name="born_frequencies",
            passed=True,
            applicable=False,
            details={"reason": "no collapsed trajectories"},
        )
    passed = report.chi_square_pvalue >= significance
    return TestVerdict(
        name="born_frequencies",
        passed=passed,
        details={
            "chi_square": report.chi_square,
            "dof": report.chi_square_dof,
            "p_value": report.chi_square_pvalue,
            "significance": significance,
        },
    )
