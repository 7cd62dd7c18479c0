"""Time integration: conservation, order, reversibility, records, errors."""

import json
import math

import numpy as np
import pytest

from avgeuler import (
    FixedPointError,
    ModelParams,
    NonFiniteError,
    SpectralField,
    StepperConfig,
    Trajectory,
    build_coeff_table,
    build_truncation,
    energy,
    enstrophy,
    evolve,
    evolve_batch,
    field_from_dict,
    field_from_json,
    reversibility_defect,
    step,
)
from conftest import cached_table, random_coeffs


def test_stepper_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(scheme="leapfrog", dt=1e-2)
    with pytest.raises(ValueError):
        StepperConfig(dt=0.0)
    back = StepperConfig(dt=1e-2).reversed()
    assert back.dt == -1e-2


def test_midpoint_conserves_quadratic_invariants(params, rng):
    trunc = build_truncation(4)
    table = cached_table(4)
    f = SpectralField(trunc, random_coeffs(trunc, rng, scale=0.7))
    config = StepperConfig(scheme="implicit_midpoint", dt=5e-3)
    traj = evolve(f, table, config, 2.5, record_stride=100)
    assert traj.energy_drift < 1e-11
    assert traj.enstrophy_drift < 1e-11


def test_midpoint_two_mode_field_is_steady(params):
    # both modes on the unit circle: every interaction is norm-degenerate
    trunc = build_truncation(2)
    table = cached_table(2)
    f = field_from_dict(trunc, {(0, 1): 0.9 + 0.2j, (1, 0): -0.3 + 1.1j})
    config = StepperConfig(dt=1e-2)
    traj = evolve(f, table, config, 1.0, record_stride=100)
    assert np.array_equal(traj.final.coeffs, f.coeffs)


def test_rk4_fourth_order_drift():
    # halving dt shrinks the energy drift about sixteenfold; the worst drift
    # along the trajectory is the robust statistic (the endpoint value can
    # cancel accidentally)
    rng = np.random.default_rng(11)
    trunc = build_truncation(4)
    table = cached_table(4)
    f = SpectralField(trunc, random_coeffs(trunc, rng, scale=0.8))
    drifts = []
    for dt in (2e-2, 1e-2):
        traj = evolve(f, table, StepperConfig(scheme="rk4", dt=dt), 2.0,
                      record_stride=1)
        e = np.asarray(traj.energies)
        drifts.append(float(np.max(np.abs(e - e[0])) / abs(e[0])))
    ratio = drifts[0] / drifts[1]
    assert 8.0 <= ratio <= 32.0


def test_backward_integration_and_reversibility(params, rng):
    trunc = build_truncation(4)
    table = cached_table(4)
    f = SpectralField(trunc, random_coeffs(trunc, rng, scale=0.6))
    defect = reversibility_defect(f, table, StepperConfig(dt=1e-2), 1.0)
    assert defect < 1e-8


def test_bitwise_determinism(params, rng):
    trunc = build_truncation(8)
    table = cached_table(8)
    w = random_coeffs(trunc, rng, batch=3)
    one = evolve_batch(w, table, StepperConfig(dt=1e-2), 0.5)
    two = evolve_batch(w, table, StepperConfig(dt=1e-2), 0.5)
    assert np.array_equal(one, two)


def test_single_step_matches_batch(params, rng):
    trunc = build_truncation(4)
    table = cached_table(4)
    f = SpectralField(trunc, random_coeffs(trunc, rng))
    config = StepperConfig(dt=1e-2)
    one = step(f, table, config)
    batch = evolve_batch(f.coeffs[None, :], table, config, config.dt)
    assert np.array_equal(one.coeffs, batch[0])


def test_euler_regression_outputs_independent_of_a(rng):
    # with s = 0 the filter is the identity: everything is bitwise equal
    trunc = build_truncation(4)
    w = random_coeffs(trunc, rng, batch=2)
    finals = []
    for a in (0.3, 1.0, 2.7):
        params = ModelParams(a=a, s=0.0)
        table = build_coeff_table(trunc, params)
        finals.append(evolve_batch(w, table, StepperConfig(dt=1e-2), 0.3))
    assert np.array_equal(finals[0], finals[1])
    assert np.array_equal(finals[0], finals[2])


def test_evolve_records_and_snapshots(params, rng):
    trunc = build_truncation(2)
    table = cached_table(2)
    f = SpectralField(trunc, random_coeffs(trunc, rng))
    traj = evolve(f, table, StepperConfig(dt=1e-2), 0.1,
                  record_stride=3, snapshot_stride=5)
    # steps 0..10; records at 0, 3, 6, 9, 10; snapshots at 0, 10 of those
    assert traj.times == pytest.approx((0.0, 0.03, 0.06, 0.09, 0.10))
    assert set(traj.snapshots) == {0, 4}
    assert np.array_equal(traj.snapshots[4].coeffs, traj.final.coeffs)
    assert len(traj.energies) == len(traj.times) == len(traj.enstrophies)


def test_evolve_zero_duration(params, rng):
    trunc = build_truncation(2)
    table = cached_table(2)
    f = SpectralField(trunc, random_coeffs(trunc, rng))
    traj = evolve(f, table, StepperConfig(dt=1e-2), 0.0)
    assert traj.times == (0.0,)
    assert np.array_equal(traj.final.coeffs, f.coeffs)


def test_trajectory_jsonl_roundtrip(params, rng):
    trunc = build_truncation(2)
    table = cached_table(2)
    f = SpectralField(trunc, random_coeffs(trunc, rng))
    traj = evolve(f, table, StepperConfig(dt=1e-2), 0.05,
                  record_stride=1, snapshot_stride=5)
    lines = traj.to_jsonl().strip().split("\n")
    assert len(lines) == len(traj.times)
    first = json.loads(lines[0])
    assert first["t"] == 0.0
    assert first["E"] == pytest.approx(energy(f, params), rel=1e-15)
    assert first["S"] == pytest.approx(enstrophy(f, params), rel=1e-15)
    back, _ = field_from_json(json.dumps(first["field"]) if isinstance(
        first["field"], dict) else first["field"])
    assert np.array_equal(back.coeffs, f.coeffs)


def test_nonfinite_detection_rk4_blowup(params, rng):
    trunc = build_truncation(4)
    table = cached_table(4)
    f = SpectralField(trunc, random_coeffs(trunc, rng, scale=50.0))
    with pytest.raises(NonFiniteError):
        evolve(f, table, StepperConfig(scheme="rk4", dt=50.0), 5000.0,
               record_stride=10 ** 9)


def test_fixed_point_failure_reports_increment(params, rng):
    trunc = build_truncation(4)
    table = cached_table(4)
    f = SpectralField(trunc, random_coeffs(trunc, rng, scale=50.0))
    with pytest.raises((FixedPointError, NonFiniteError)):
        evolve(f, table, StepperConfig(dt=10.0), 100.0, record_stride=10 ** 9)


def test_trajectory_invariants():
    params = ModelParams()
    with pytest.raises(ValueError):
        Trajectory(params=params, times=(0.0, 0.2, 0.1),
                   energies=(1.0, 1.0, 1.0), enstrophies=(1.0, 1.0, 1.0),
                   snapshots={}, final=None)
