"""Experiment runners, statistics, persistence, and configuration.

Each runner consumes one :class:`ExperimentConfig` and returns a frozen
report object.  Reports are pure data: reproducibility means that the same
config (including the mandatory seed) yields bitwise-identical result
payloads; only the provenance block (git description, wall clock) varies
between runs.

Seed-derivation rule
--------------------
Every ensemble derives per-trajectory randomness from
``numpy.random.SeedSequence(config.seed)``: Gibbs-ensemble draws use child
stream ``i`` for sample ``i`` (so growing the ensemble keeps existing rows),
and experiments that need several independent sources (initial field,
calibration set) spawn one child per role, in the documented order.
Fixed-energy ensembles run their parallel chains off one child stream with a
fixed draw order, which is equally deterministic.  Integration itself is
sequential per trajectory; cross-trajectory work is vectorised.
"""

from __future__ import annotations

import json
import math
import subprocess
import time
from dataclasses import dataclass, fields

import numpy as np
from scipy import stats as _scipy_stats

from .lattice import (
    ModelParams,
    SpectralField,
    Truncation,
    build_coeff_table,
    build_truncation,
    field_from_json,
    format_float,
    sobolev_weights,
)
from .dynamics import eval_vector_field_batch
from .measures import (
    GibbsSpec,
    SimplexSamplerConfig,
    build_gibbs_spec,
    sample_mu_ensemble,
    sample_nu,
    sample_nu_ensemble,
)
from .stepping import (
    SCHEMES,
    FixedPointError,
    NonFiniteError,
    StepperConfig,
    Trajectory,
    evolve,
    evolve_batch,
    step_batch,
)

__all__ = [
    "ExperimentConfig",
    "InvarianceReport",
    "SurfaceInvarianceReport",
    "RecurrenceResult",
    "ConvergenceTable",
    "ConservationBreachError",
    "run_invariance",
    "run_surface_invariance",
    "run_recurrence",
    "run_convergence",
    "paired_drift_z",
    "canonical_json",
    "write_csv",
    "build_provenance",
]


class ConservationBreachError(RuntimeError):
    """An experiment trajectory drifted in energy or enstrophy beyond tolerance."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = ("seed", "N", "M", "T", "dt")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment's full description; the seed is mandatory.

    ``seed``, ``N``, ``M``, ``T`` and ``dt`` never default: configs must state
    them explicitly.  Statistical acceptance thresholds are ordinary fields so
    reports can echo them.
    """

    seed: int
    N: int
    M: int
    T: float
    dt: float
    a: float = 1.0
    s: float = 1.0
    gamma: float = 1.0
    scheme: str = "implicit_midpoint"
    record_stride: int = 1
    fixed_point_tol: float = 1e-13
    max_fixed_point_iters: int = 50
    # Experiment-specific knobs.
    r: float | None = None
    epsilon: float | None = None
    alpha: float = 3.0
    T_max: float | None = None
    N_small: tuple = ()
    N_large: int | None = None
    measure: str = "mu"
    initial_field: str | None = None
    # Acceptance thresholds (visible, echoed into reports).
    drift_z_max: float = 4.0
    ks_level: float = 0.01
    confinement_tol: float = 1e-9
    conservation_tol: float = 1e-6
    # Fixed-energy sampler knobs.
    sampler_method: str = "gibbs_mcmc"
    burn_in: int = 200
    thinning: int = 5
    proposal_scale: float = 0.02
    ess_threshold: float = 100.0
    n_calibration: int = 64

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if self.N < 1 or self.M < 1:
            raise ValueError(f"N and M must be >= 1, got N={self.N}, M={self.M}")
        if not (math.isfinite(self.T) and self.T >= 0):
            raise ValueError(f"T must be finite and >= 0, got {self.T}")
        if self.dt == 0 or not math.isfinite(self.dt):
            raise ValueError(f"dt must be finite and nonzero, got {self.dt}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.r is not None and not self.r > 0:
            raise ValueError(f"r must be > 0 when given, got {self.r}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0 when given, got {self.epsilon}")
        if self.T_max is not None and not self.T_max > 0:
            raise ValueError(f"T_max must be > 0 when given, got {self.T_max}")
        if self.scheme not in SCHEMES:
            raise ValueError(
                f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.measure not in ("mu", "nu"):
            raise ValueError(f"measure must be 'mu' or 'nu', got {self.measure!r}")
        object.__setattr__(self, "N_small", tuple(int(n) for n in self.N_small))
        for thr in ("drift_z_max", "ks_level", "confinement_tol", "conservation_tol"):
            if not getattr(self, thr) > 0:
                raise ValueError(f"{thr} must be > 0, got {getattr(self, thr)}")
        if self.ks_level >= 1:
            raise ValueError(f"ks_level must lie in (0, 1), got {self.ks_level}")
        if self.n_calibration < 2:
            raise ValueError(
                f"n_calibration must be >= 2, got {self.n_calibration}")

    # -- derived helpers ----------------------------------------------------

    def params(self) -> ModelParams:
        return ModelParams(a=self.a, s=self.s, gamma=self.gamma)

    def truncation(self) -> Truncation:
        return build_truncation(self.N)

    def stepper(self) -> StepperConfig:
        return StepperConfig(scheme=self.scheme, dt=self.dt,
                             fixed_point_tol=self.fixed_point_tol,
                             max_fixed_point_iters=self.max_fixed_point_iters)

    def simplex_config(self) -> SimplexSamplerConfig:
        return SimplexSamplerConfig(method=self.sampler_method,
                                    burn_in=self.burn_in,
                                    thinning=self.thinning,
                                    proposal_scale=self.proposal_scale,
                                    ess_threshold=self.ess_threshold)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Build from a decoded config document; unknown keys are errors."""
        if not isinstance(raw, dict):
            raise ValueError(f"config must be a JSON object, got {type(raw).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        missing = [k for k in _REQUIRED_KEYS if k not in raw]
        if missing:
            raise ValueError(
                f"config must state {', '.join(missing)} explicitly "
                "(these fields never default)")
        return cls(**raw)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed config JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


# ---------------------------------------------------------------------------
# Statistics helpers
# ---------------------------------------------------------------------------

def paired_drift_z(before: np.ndarray, after: np.ndarray) -> np.ndarray:
    """Per-column z-score of the paired difference ``after - before``.

    Columns whose paired difference is exactly constant zero get z = 0 (a
    steady statistic has no drift); the result is always finite.
    """
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    if before.shape != after.shape or before.ndim != 2:
        raise ValueError("before/after must be equal-shape (M, d) arrays")
    m = before.shape[0]
    if m < 2:
        raise ValueError(f"need at least 2 samples for a z-score, got {m}")
    diff = after - before
    mean = diff.mean(axis=0)
    sd = diff.std(axis=0, ddof=1)
    se = sd / math.sqrt(m)
    z = np.zeros_like(mean)
    nonzero = se > 0
    z[nonzero] = mean[nonzero] / se[nonzero]
    if not np.all(np.isfinite(z)):
        raise AssertionError("non-finite drift z-score")
    return z


def _mean_se(values: np.ndarray) -> tuple:
    """Columnwise (mean, standard error) of an (M, d) array."""
    values = np.asarray(values, dtype=float)
    m = values.shape[0]
    return values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(m)


def _ks_against_gaussian(samples: np.ndarray, sigma: float) -> tuple:
    """Kolmogorov-Smirnov statistic and p-value against Normal(0, sigma)."""
    res = _scipy_stats.kstest(samples, "norm", args=(0.0, sigma))
    return float(res.statistic), float(res.pvalue)


def _check_conservation(tag: str, e0: np.ndarray, e1: np.ndarray,
                        s0: np.ndarray, s1: np.ndarray, tol: float) -> tuple:
    """Max relative energy/enstrophy drift over an ensemble; breach raises."""
    scale_e = np.maximum(np.abs(e0), 1e-300)
    scale_s = np.maximum(np.abs(s0), 1e-300)
    drift_e = float(np.max(np.abs(e1 - e0) / scale_e))
    drift_s = float(np.max(np.abs(s1 - s0) / scale_s))
    if drift_e > tol or drift_s > tol:
        raise ConservationBreachError(
            f"{tag}: conservation breach (relative energy drift {drift_e:.3e}, "
            f"enstrophy drift {drift_s:.3e}, tolerance {tol:.1e})")
    return drift_e, drift_s


def _batch_energies(coeffs: np.ndarray, spec: GibbsSpec) -> tuple:
    absq = np.abs(coeffs) ** 2
    return 0.5 * absq @ spec.multipliers, 0.5 * absq @ (spec.multipliers ** 2)


def _evolve_ensemble_checked(coeffs: np.ndarray, table, sconf: StepperConfig,
                             T: float, seed: int, tag: str) -> np.ndarray:
    """evolve_batch with failure attribution to a replayable trajectory."""
    try:
        return evolve_batch(coeffs, table, sconf, T)
    except (NonFiniteError, FixedPointError) as exc:
        for i in range(coeffs.shape[0]):
            try:
                evolve_batch(coeffs[i:i + 1], table, sconf, T)
            except (NonFiniteError, FixedPointError):
                raise RuntimeError(
                    f"{tag}: trajectory {i} failed to integrate ({exc}); "
                    f"replay it with child stream {i} of SeedSequence({seed})"
                ) from exc
        raise


# ---------------------------------------------------------------------------
# Gibbs-measure invariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvarianceReport:
    """Per-mode moment and marginal comparison between t=0 and t=T."""

    modes: tuple
    ensemble_size: int
    duration: float
    theory_second_moment: np.ndarray
    initial_second_moment: np.ndarray
    initial_se: np.ndarray
    final_second_moment: np.ndarray
    final_se: np.ndarray
    drift_z: np.ndarray
    re_drift_z: np.ndarray
    im_drift_z: np.ndarray
    ks_stat_re: np.ndarray
    ks_p_re: np.ndarray
    ks_stat_im: np.ndarray
    ks_p_im: np.ndarray
    ks_corrected_level: float
    drift_z_max: float
    ks_level: float
    max_energy_drift: float
    max_enstrophy_drift: float
    passed: bool
    sample_trajectory: Trajectory

    def __post_init__(self):
        if self.ensemble_size < 2:
            raise ValueError("ensemble size must be recorded and >= 2")
        for name in ("drift_z", "re_drift_z", "im_drift_z"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    def results_payload(self) -> dict:
        cols = self.moment_columns()
        return {
            "passed": self.passed,
            "ensemble_size": self.ensemble_size,
            "duration": self.duration,
            "thresholds": {
                "drift_z_max": self.drift_z_max,
                "ks_family_level": self.ks_level,
                "ks_corrected_level": self.ks_corrected_level,
            },
            "max_abs_drift_z": float(np.max(np.abs(
                np.concatenate([self.drift_z, self.re_drift_z, self.im_drift_z])))),
            "min_ks_p": float(min(np.min(self.ks_p_re), np.min(self.ks_p_im))),
            "max_energy_drift": self.max_energy_drift,
            "max_enstrophy_drift": self.max_enstrophy_drift,
            "per_mode": cols,
        }

    def moment_columns(self) -> dict:
        return {
            "k1": [int(k[0]) for k in self.modes],
            "k2": [int(k[1]) for k in self.modes],
            "theory_second_moment": list(map(float, self.theory_second_moment)),
            "initial_second_moment": list(map(float, self.initial_second_moment)),
            "initial_se": list(map(float, self.initial_se)),
            "final_second_moment": list(map(float, self.final_second_moment)),
            "final_se": list(map(float, self.final_se)),
            "drift_z": list(map(float, self.drift_z)),
            "re_drift_z": list(map(float, self.re_drift_z)),
            "im_drift_z": list(map(float, self.im_drift_z)),
            "ks_stat_re": list(map(float, self.ks_stat_re)),
            "ks_p_re": list(map(float, self.ks_p_re)),
            "ks_stat_im": list(map(float, self.ks_stat_im)),
            "ks_p_im": list(map(float, self.ks_p_im)),
        }


def run_invariance(config: ExperimentConfig) -> InvarianceReport:
    """Evolve a Gibbs ensemble to t=T and test that its law did not move.

    Passes when every per-mode drift z-score (second moments and both first
    moments) stays within ``drift_z_max`` and every per-mode marginal passes a
    Kolmogorov-Smirnov test at the Bonferroni-corrected ``ks_level``.
    """
    if config.M < 2:
        raise ValueError("invariance runs need M >= 2")
    params = config.params()
    trunc = config.truncation()
    table = build_coeff_table(trunc, params)
    spec = build_gibbs_spec(trunc, params)
    w0 = sample_mu_ensemble(spec, config.seed, config.M)
    sconf = config.stepper()
    if config.T > 0:
        wt = _evolve_ensemble_checked(w0, table, sconf, config.T,
                                      config.seed, "run_invariance")
    else:
        wt = w0.copy()

    e0, s0 = _batch_energies(w0, spec)
    e1, s1 = _batch_energies(wt, spec)
    drift_e, drift_s = _check_conservation("run_invariance", e0, e1, s0, s1,
                                           config.conservation_tol)

    absq0, absqt = np.abs(w0) ** 2, np.abs(wt) ** 2
    m0, se0 = _mean_se(absq0)
    mt, set_ = _mean_se(absqt)
    drift = paired_drift_z(absq0, absqt)
    re_drift = paired_drift_z(w0.real, wt.real)
    im_drift = paired_drift_z(w0.imag, wt.imag)

    d = trunc.dim
    sigmas = np.sqrt(spec.variances / 2.0)
    ks = [(_ks_against_gaussian(wt[:, j].real, sigmas[j]),
           _ks_against_gaussian(wt[:, j].imag, sigmas[j])) for j in range(d)]
    ks_stat_re = np.array([k[0][0] for k in ks])
    ks_p_re = np.array([k[0][1] for k in ks])
    ks_stat_im = np.array([k[1][0] for k in ks])
    ks_p_im = np.array([k[1][1] for k in ks])
    corrected = config.ks_level / (2 * d)

    passed = bool(
        np.max(np.abs(drift)) <= config.drift_z_max
        and np.max(np.abs(re_drift)) <= config.drift_z_max
        and np.max(np.abs(im_drift)) <= config.drift_z_max
        and min(ks_p_re.min(), ks_p_im.min()) >= corrected)

    sample_traj = evolve(SpectralField(trunc, w0[0]), table, sconf,
                         config.T, record_stride=config.record_stride)

    return InvarianceReport(
        modes=trunc.modes, ensemble_size=config.M, duration=config.T,
        theory_second_moment=spec.variances.copy(),
        initial_second_moment=m0, initial_se=se0,
        final_second_moment=mt, final_se=set_,
        drift_z=drift, re_drift_z=re_drift, im_drift_z=im_drift,
        ks_stat_re=ks_stat_re, ks_p_re=ks_p_re,
        ks_stat_im=ks_stat_im, ks_p_im=ks_p_im,
        ks_corrected_level=corrected, drift_z_max=config.drift_z_max,
        ks_level=config.ks_level,
        max_energy_drift=drift_e, max_enstrophy_drift=drift_s,
        passed=passed, sample_trajectory=sample_traj)


# ---------------------------------------------------------------------------
# Fixed-energy (level-set) invariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceInvarianceReport:
    """Level-set ensemble comparison between t=0 and t=T.

    Adds to the moment drift checks: per-step energy confinement to the level
    r, and off-diagonal second moments consistent with zero.
    """

    modes: tuple
    ensemble_size: int
    duration: float
    r: float
    theory_second_moment: np.ndarray
    initial_second_moment: np.ndarray
    initial_se: np.ndarray
    final_second_moment: np.ndarray
    final_se: np.ndarray
    drift_z: np.ndarray
    theory_z: np.ndarray
    confinement_max: float
    confinement_tol: float
    offdiag_max_z: float
    offdiag_pairs: tuple
    drift_z_max: float
    max_enstrophy_drift: float
    sampler_diagnostics: dict
    passed: bool

    def __post_init__(self):
        if self.ensemble_size < 2:
            raise ValueError("ensemble size must be recorded and >= 2")
        for name in ("drift_z", "theory_z"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    def results_payload(self) -> dict:
        return {
            "passed": self.passed,
            "ensemble_size": self.ensemble_size,
            "duration": self.duration,
            "r": self.r,
            "thresholds": {
                "drift_z_max": self.drift_z_max,
                "confinement_tol": self.confinement_tol,
            },
            "confinement_max": self.confinement_max,
            "max_abs_drift_z": float(np.max(np.abs(self.drift_z))),
            "max_abs_theory_z": float(np.max(np.abs(self.theory_z))),
            "offdiag_max_z": self.offdiag_max_z,
            "max_enstrophy_drift": self.max_enstrophy_drift,
            "sampler_diagnostics": {
                k: v for k, v in self.sampler_diagnostics.items()
                if isinstance(v, (int, float, bool, str))
            },
            "per_mode": self.moment_columns(),
            "offdiag": [
                {"k1": int(k[0]), "k2": int(k[1]),
                 "j1": int(j[0]), "j2": int(j[1]),
                 "z_re": z_re, "z_im": z_im}
                for (k, j, z_re, z_im) in self.offdiag_pairs
            ],
        }

    def moment_columns(self) -> dict:
        return {
            "k1": [int(k[0]) for k in self.modes],
            "k2": [int(k[1]) for k in self.modes],
            "theory_second_moment": list(map(float, self.theory_second_moment)),
            "initial_second_moment": list(map(float, self.initial_second_moment)),
            "initial_se": list(map(float, self.initial_se)),
            "final_second_moment": list(map(float, self.final_second_moment)),
            "final_se": list(map(float, self.final_se)),
            "drift_z": list(map(float, self.drift_z)),
            "theory_z": list(map(float, self.theory_z)),
        }


def _offdiag_stats(coeffs: np.ndarray, modes: tuple) -> tuple:
    """z-scores of E[omega_k conj(omega_j)] against zero for all pairs k<j."""
    d = coeffs.shape[1]
    pairs = []
    max_z = 0.0
    for j in range(1, d):
        prod = coeffs[:, :j] * np.conj(coeffs[:, j:j + 1])  # (M, j)
        mean_re, se_re = _mean_se(prod.real)
        mean_im, se_im = _mean_se(prod.imag)
        z_re = np.where(se_re > 0, mean_re / np.where(se_re > 0, se_re, 1.0), 0.0)
        z_im = np.where(se_im > 0, mean_im / np.where(se_im > 0, se_im, 1.0), 0.0)
        max_z = max(max_z, float(np.max(np.abs(z_re))), float(np.max(np.abs(z_im))))
        for i in range(j):
            pairs.append((modes[i], modes[j], float(z_re[i]), float(z_im[i])))
    return max_z, tuple(pairs)


def run_surface_invariance(config: ExperimentConfig) -> SurfaceInvarianceReport:
    """Evolve a fixed-energy ensemble and test level-set invariance.

    Checks (i) per-step energy confinement |E - r|/r within tolerance for
    every trajectory, (ii) per-mode second-moment drift z-scores within
    ``drift_z_max``, (iii) off-diagonal moments consistent with zero.
    """
    if config.M < 2:
        raise ValueError("surface invariance runs need M >= 2")
    params = config.params()
    trunc = config.truncation()
    table = build_coeff_table(trunc, params)
    spec = build_gibbs_spec(trunc, params)
    r = float(config.r) if config.r is not None else spec.mean_energy
    coeffs, diagnostics = sample_nu_ensemble(spec, r, config.simplex_config(),
                                             config.seed, config.M)

    sconf = config.stepper()
    n_steps = int(round(config.T / abs(config.dt)))
    mult = spec.multipliers
    w = coeffs.copy()
    s0 = 0.5 * (np.abs(w) ** 2) @ (mult ** 2)
    confinement = float(np.max(np.abs(0.5 * (np.abs(w) ** 2) @ mult - r))) / r
    max_s_drift = 0.0
    for i in range(1, n_steps + 1):
        w = step_batch(w, table, sconf)
        if not np.all(np.isfinite(w.view(float))):
            bad = int(np.argmax(~np.all(np.isfinite(w.view(float)).reshape(
                w.shape[0], -1), axis=1)))
            raise RuntimeError(
                f"run_surface_invariance: trajectory {bad} diverged at step {i}; "
                f"replay with the fixed-energy sampler at seed {config.seed}")
        absq = np.abs(w) ** 2
        e_now = 0.5 * absq @ mult
        s_now = 0.5 * absq @ (mult ** 2)
        confinement = max(confinement, float(np.max(np.abs(e_now - r))) / r)
        max_s_drift = max(max_s_drift, float(
            np.max(np.abs(s_now - s0) / np.maximum(np.abs(s0), 1e-300))))
    if max_s_drift > config.conservation_tol:
        raise ConservationBreachError(
            f"run_surface_invariance: enstrophy drift {max_s_drift:.3e} exceeds "
            f"tolerance {config.conservation_tol:.1e}")

    absq0, absqt = np.abs(coeffs) ** 2, np.abs(w) ** 2
    m0, se0 = _mean_se(absq0)
    mt, set_ = _mean_se(absqt)
    drift = paired_drift_z(absq0, absqt)
    theory = np.array([float(np.real(
        _nu_theory_moment(spec, k, r))) for k in trunc.modes])
    theory_z = np.where(set_ > 0, (mt - theory) / np.where(set_ > 0, set_, 1.0), 0.0)
    offdiag_max_z, offdiag_pairs = _offdiag_stats(w, trunc.modes)

    passed = bool(
        confinement <= config.confinement_tol
        and np.max(np.abs(drift)) <= config.drift_z_max
        and offdiag_max_z <= config.drift_z_max)

    return SurfaceInvarianceReport(
        modes=trunc.modes, ensemble_size=config.M, duration=config.T, r=r,
        theory_second_moment=theory,
        initial_second_moment=m0, initial_se=se0,
        final_second_moment=mt, final_se=set_,
        drift_z=drift, theory_z=theory_z,
        confinement_max=confinement, confinement_tol=config.confinement_tol,
        offdiag_max_z=offdiag_max_z, offdiag_pairs=offdiag_pairs,
        drift_z_max=config.drift_z_max, max_enstrophy_drift=max_s_drift,
        sampler_diagnostics=diagnostics, passed=passed)


def _nu_theory_moment(spec: GibbsSpec, k: tuple, r: float) -> complex:
    from .measures import nu_second_moment
    return nu_second_moment(spec, k, r)


# ---------------------------------------------------------------------------
# Recurrence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecurrenceResult:
    """Return-time record for one trajectory around its start point.

    Distances are squared norms of order ``norm_order`` (= 1 - alpha).  The
    automaton follows the two-radius structure: the trajectory must first
    leave the inner ball {dist^2 < epsilon}; afterwards every transition from
    outside to inside the outer ball {dist^2 < 2 epsilon} is a return event.
    ``never_exited`` flags degenerate runs that never leave the inner ball.
    """

    epsilon: float
    norm_order: float
    return_times: tuple
    t_max: float
    never_exited: bool
    reached_outer: bool
    r: float
    seed: int
    times: np.ndarray
    dist_sq: np.ndarray
    energies: np.ndarray
    enstrophies: np.ndarray
    initial_field: SpectralField
    first_return: float | None

    def __post_init__(self):
        ts = np.asarray(self.return_times, dtype=float)
        if ts.size and not np.all(np.diff(ts) > 0):
            raise ValueError("return times must be strictly increasing")
        if ts.size and not (np.all(ts > 0) and np.all(ts <= self.t_max + 1e-12)):
            raise ValueError("return times must lie in (0, T_max]")

    def results_payload(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "outer_epsilon": 2.0 * self.epsilon,
            "norm_order": self.norm_order,
            "r": self.r,
            "t_max": self.t_max,
            "n_returns": len(self.return_times),
            "first_return": self.first_return,
            "never_exited": self.never_exited,
            "reached_outer": self.reached_outer,
            "return_times": list(map(float, self.return_times)),
        }

    def distance_lines(self) -> list:
        return [
            {"t": float(t), "dist_sq": float(d)}
            for t, d in zip(self.times, self.dist_sq)
        ]


def _calibrate_epsilon(spec: GibbsSpec, r: float, weights: np.ndarray,
                       sconf: SimplexSamplerConfig, seed, n: int) -> float:
    """10th percentile of pairwise squared distances between level-set draws."""
    draws, _ = sample_nu_ensemble(spec, r, sconf, seed, n)
    diff = draws[:, None, :] - draws[None, :, :]
    dist = np.sum(weights * np.abs(diff) ** 2, axis=-1)
    iu = np.triu_indices(n, k=1)
    return float(np.percentile(dist[iu], 10.0))


def run_recurrence(config: ExperimentConfig) -> RecurrenceResult:
    """Integrate one level-set trajectory and record returns near its start.

    The start is a fixed-energy draw; epsilon defaults to the 10th percentile
    of pairwise squared distances between independent level-set draws, in the
    squared norm of order 1 - alpha.  Finding no return within T_max is a
    reported outcome, not an error.
    """
    if not config.alpha > 2:
        raise ValueError(f"recurrence needs alpha > 2, got {config.alpha}")
    if config.T_max is None:
        raise ValueError("recurrence needs T_max")
    params = config.params()
    trunc = config.truncation()
    table = build_coeff_table(trunc, params)
    spec = build_gibbs_spec(trunc, params)
    r = float(config.r) if config.r is not None else spec.mean_energy
    order = 1.0 - config.alpha
    weights = sobolev_weights(trunc, order, params)

    seed_start, seed_cal = np.random.SeedSequence(config.seed).spawn(2)
    start = sample_nu(spec, r, config.simplex_config(), seed_start)
    if config.epsilon is not None:
        eps = float(config.epsilon)
    else:
        eps = _calibrate_epsilon(spec, r, weights, config.simplex_config(),
                                 seed_cal, config.n_calibration)
    outer = 2.0 * eps

    sconf = config.stepper()
    dt = abs(config.dt)
    n_steps = int(round(config.T_max / dt))
    t_max = n_steps * dt
    w0 = start.coeffs
    mult = spec.multipliers
    e0 = 0.5 * float(np.abs(w0) ** 2 @ mult)
    s0 = 0.5 * float(np.abs(w0) ** 2 @ (mult ** 2))

    w = w0.copy()
    times, dists, energies, enstrophies = [0.0], [0.0], [e0], [s0]
    return_times = []
    exited_inner = False
    outside_outer = False
    reached_outer = False
    for i in range(1, n_steps + 1):
        w = step_batch(w, table, sconf)
        if not np.all(np.isfinite(w.view(float))):
            raise RuntimeError(
                f"run_recurrence: trajectory diverged at step {i} "
                f"(seed {config.seed})")
        absq = np.abs(w) ** 2
        d2 = float(weights @ np.abs(w - w0) ** 2)
        t = i * dt
        if d2 >= eps:
            exited_inner = True
        if d2 >= outer:
            outside_outer = True
            reached_outer = True
        elif outside_outer:
            return_times.append(t)
            outside_outer = False
        if i % config.record_stride == 0 or i == n_steps:
            times.append(t)
            dists.append(d2)
            energies.append(0.5 * float(absq @ mult))
            enstrophies.append(0.5 * float(absq @ (mult ** 2)))
    e_arr, s_arr = np.array(energies), np.array(enstrophies)
    _check_conservation("run_recurrence", np.full_like(e_arr, e0), e_arr,
                        np.full_like(s_arr, s0), s_arr, config.conservation_tol)

    return RecurrenceResult(
        epsilon=eps, norm_order=order, return_times=tuple(return_times),
        t_max=t_max, never_exited=not exited_inner, reached_outer=reached_outer,
        r=r, seed=config.seed,
        times=np.array(times), dist_sq=np.array(dists),
        energies=e_arr, enstrophies=s_arr,
        initial_field=start,
        first_return=return_times[0] if return_times else None)


# ---------------------------------------------------------------------------
# Truncation convergence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceTable:
    """Monte Carlo distances between small- and large-truncation dynamics."""

    n_small: tuple
    n_large: int
    alpha: float
    measure: str
    ensemble_size: int
    estimates: tuple
    standard_errors: tuple
    strictly_decreasing: bool

    def results_payload(self) -> dict:
        return {
            "n_large": self.n_large,
            "alpha": self.alpha,
            "measure": self.measure,
            "ensemble_size": self.ensemble_size,
            "strictly_decreasing": self.strictly_decreasing,
            "rows": {
                "n_small": list(self.n_small),
                "estimate": list(map(float, self.estimates)),
                "standard_error": list(map(float, self.standard_errors)),
            },
        }


def run_convergence(config: ExperimentConfig) -> ConvergenceTable:
    """Estimate E ||B_small(phi) - B_large(phi)||^2 in the order-(1-alpha) norm.

    phi is sampled at the large truncation; the small dynamics acts on the
    truncated field (modes outside the small disc dropped) and its output is
    compared on the large mode set, the missing tail contributing
    |B_large|^2 weight.  Equal truncations give exactly zero.
    """
    if config.N_large is None or not config.N_small:
        raise ValueError("convergence needs N_small (list) and N_large")
    n_large = int(config.N_large)
    n_values = config.N_small
    if any(n < 1 or n > n_large for n in n_values):
        raise ValueError(
            f"every N_small must lie in [1, N_large={n_large}], got {n_values}")
    params = config.params()
    trunc_l = build_truncation(n_large)
    table_l = build_coeff_table(trunc_l, params)
    spec_l = build_gibbs_spec(trunc_l, params)
    if config.measure == "nu":
        r = float(config.r) if config.r is not None else spec_l.mean_energy
        w, _ = sample_nu_ensemble(spec_l, r, config.simplex_config(),
                                  config.seed, config.M)
    else:
        w = sample_mu_ensemble(spec_l, config.seed, config.M)
    b_large = eval_vector_field_batch(w, table_l)
    w_out = sobolev_weights(trunc_l, 1.0 - config.alpha, params)

    estimates, ses = [], []
    for n in n_values:
        trunc_n = build_truncation(n)
        idx = np.array([trunc_l.index[m] for m in trunc_n.modes], dtype=int)
        if n == n_large:
            per_sample = np.zeros(config.M)
        else:
            table_n = build_coeff_table(trunc_n, params)
            b_small = eval_vector_field_batch(w[:, idx], table_n)
            diff_sq = np.abs(b_small - b_large[:, idx]) ** 2
            inside = diff_sq @ w_out[idx]
            mask = np.ones(trunc_l.dim, dtype=bool)
            mask[idx] = False
            outside = (np.abs(b_large[:, mask]) ** 2) @ w_out[mask]
            per_sample = inside + outside
        estimates.append(float(per_sample.mean()))
        ses.append(float(per_sample.std(ddof=1) / math.sqrt(config.M))
                   if config.M > 1 else 0.0)

    decreasing = all(estimates[i] > estimates[i + 1]
                     for i in range(len(estimates) - 1))
    return ConvergenceTable(
        n_small=tuple(n_values), n_large=n_large, alpha=config.alpha,
        measure=config.measure, ensemble_size=config.M,
        estimates=tuple(estimates), standard_errors=tuple(ses),
        strictly_decreasing=decreasing)


# ---------------------------------------------------------------------------
# Persistence: canonical JSON, CSV, provenance
# ---------------------------------------------------------------------------

def canonical_json(obj, indent: int = 0) -> str:
    """Serialise with every float at 17 significant decimal digits.

    Key order follows insertion order; non-finite floats become strings so
    the document stays strict JSON.
    """
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return json.dumps(repr(x))
        return format_float(x)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{inner}{json.dumps(str(key))}: {canonical_json(val, indent + 1)}"
            for key, val in obj.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in seq):
            return "[" + ", ".join(canonical_json(v) for v in seq) + "]"
        items = ",\n".join(f"{inner}{canonical_json(v, indent + 1)}" for v in seq)
        return "[\n" + items + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__} canonically")


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def write_csv(path, header: list, columns: dict) -> None:
    """Write named columns as CSV; floats carry 17 significant digits."""
    lengths = {len(columns[name]) for name in header}
    if len(lengths) > 1:
        raise ValueError(f"ragged columns: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(_format_cell(columns[name][i]) for name in header))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def build_provenance(wall_clock_seconds: float) -> dict:
    """Build metadata: git description, wall clock, creation time.

    This block varies between runs and is excluded from the bitwise
    reproducibility of reports.
    """
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10, check=False)
        git_describe = described.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        git_describe = "unknown"
    return {
        "git_describe": git_describe,
        "wall_clock_seconds": float(wall_clock_seconds),
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def report_document(experiment: str, config: ExperimentConfig,
                    results: dict, provenance: dict) -> str:
    """Assemble the canonical report JSON text."""
    return canonical_json({
        "experiment": experiment,
        "config": config.to_dict(),
        "results": results,
        "provenance": provenance,
    }) + "\n"


def load_initial_field(config: ExperimentConfig, spec: GibbsSpec):
    """Initial condition for plain evolution runs: file or Gibbs draw."""
    if config.initial_field is not None:
        with open(config.initial_field, "r", encoding="utf-8") as fh:
            fld, _ = field_from_json(fh.read())
        if fld.trunc.N != config.N:
            raise ValueError(
                f"initial field truncation N={fld.trunc.N} does not match "
                f"config N={config.N}")
        return fld
    from .measures import sample_mu
    return sample_mu(spec, config.seed)
