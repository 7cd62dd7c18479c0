"""Mode bookkeeping, weights, conserved quantities, coefficients, serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avgeuler import (
    ConjugateSymmetryError,
    DegeneratePairError,
    ModeAbsentError,
    ModelParams,
    SpectralField,
    TruncationMismatchError,
    alpha_coeff,
    build_coeff_table,
    build_truncation,
    energy,
    energy_gradient,
    enstrophy,
    field_from_dict,
    field_from_json,
    field_to_json,
    format_float,
    is_positive,
    lookup,
    pair_coeff,
    sobolev_norm,
    sobolev_weight,
    sobolev_weights,
    to_physical,
    zero_field,
)
from conftest import random_coeffs

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Truncation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("N,dim", [(1, 2), (2, 4), (4, 6), (8, 12), (32, 50), (64, 98)])
def test_truncation_dimensions(N, dim):
    assert build_truncation(N).dim == dim


def test_truncation_modes_positive_sorted_within_disc():
    trunc = build_truncation(8)
    assert trunc.modes == tuple(sorted(trunc.modes))
    for k in trunc.modes:
        assert is_positive(k)
        assert k[0] ** 2 + k[1] ** 2 <= 8
        assert not trunc.contains((0, 0)) or False  # origin never retained
    # every positive mode of the disc is present
    for k1 in range(-3, 4):
        for k2 in range(-3, 4):
            k = (k1, k2)
            if k != (0, 0) and k1 ** 2 + k2 ** 2 <= 8 and is_positive(k):
                assert k in trunc.index


def test_truncation_contains_resolves_conjugates():
    trunc = build_truncation(4)
    assert trunc.contains((0, 1)) and trunc.contains((0, -1))
    assert not trunc.contains((3, 0))


def test_positive_half_lattice_partition():
    # exactly one of k, -k is positive for every nonzero mode
    for k1 in range(-3, 4):
        for k2 in range(-3, 4):
            if (k1, k2) == (0, 0):
                continue
            assert is_positive((k1, k2)) != is_positive((-k1, -k2))


def test_build_truncation_rejects_bad_N():
    with pytest.raises(ValueError):
        build_truncation(0)


# ---------------------------------------------------------------------------
# Parameters and weights
# ---------------------------------------------------------------------------

def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(a=-1.0)
    with pytest.raises(ValueError):
        ModelParams(s=-0.5)
    with pytest.raises(ValueError):
        ModelParams(gamma=0.0)


def test_weight_closed_form():
    params = ModelParams(a=1.0, s=1.0)
    assert sobolev_weight((0, 1), 1.0, params) == 2.0      # 1 * (1+1)
    assert sobolev_weight((1, 1), 1.0, params) == 6.0      # 2 * (1+2)
    assert sobolev_weight((1, 1), 2.0, params) == 36.0
    assert sobolev_weight((2, 0), 1.0, ModelParams(a=0.5, s=2.0)) == 4.0 * 4.0


@given(st.integers(min_value=-5, max_value=5), st.integers(min_value=-5, max_value=5),
       st.floats(min_value=0.0, max_value=3.0), st.floats(min_value=0.0, max_value=3.0))
def test_weight_square_identity(k1, k2, a, s):
    # the p = 2 weight is the exact float square of the p = 1 weight
    if (k1, k2) == (0, 0):
        return
    params = ModelParams(a=a, s=s)
    w1 = sobolev_weight((k1, k2), 1.0, params)
    w2 = sobolev_weight((k1, k2), 2.0, params)
    assert w2 == w1 * w1


def test_weights_vector_matches_scalar(params):
    trunc = build_truncation(8)
    w = sobolev_weights(trunc, -2.0, params)
    for i, k in enumerate(trunc.modes):
        assert w[i] == sobolev_weight(k, -2.0, params)


def test_euler_weights_ignore_a():
    trunc = build_truncation(8)
    w1 = sobolev_weights(trunc, 1.0, ModelParams(a=0.7, s=0.0))
    w2 = sobolev_weights(trunc, 1.0, ModelParams(a=1.9, s=0.0))
    assert np.array_equal(w1, w2)


# ---------------------------------------------------------------------------
# Fields, conserved quantities
# ---------------------------------------------------------------------------

def test_field_construction_and_errors(params, rng):
    trunc = build_truncation(4)
    field = SpectralField(trunc, random_coeffs(trunc, rng))
    assert field.coeffs.dtype == np.complex128
    assert not field.coeffs.flags.writeable
    with pytest.raises(ValueError):
        SpectralField(trunc, np.zeros(trunc.dim + 1, dtype=np.complex128))
    with pytest.raises(ValueError):
        SpectralField(trunc, np.full(trunc.dim, np.nan + 0j))


def test_zero_field_and_from_dict(params):
    trunc = build_truncation(2)
    z = zero_field(trunc)
    assert energy(z, params) == 0.0
    f = field_from_dict(trunc, {(0, 1): 1 + 2j, (1, 0): 3 + 1j})
    assert lookup(f, (0, 1)) == 1 + 2j
    assert lookup(f, (-1, 0)) == 3 - 1j           # conjugate of the stored (1, 0)
    assert lookup(f, (0, -1)) == 1 - 2j
    with pytest.raises(ModeAbsentError):
        lookup(f, (2, 1))
    with pytest.raises(ModeAbsentError):
        field_from_dict(trunc, {(5, 5): 1.0})
    with pytest.raises(ModeAbsentError):
        field_from_dict(trunc, {(-1, 0): 1.0})    # only positive modes stored


def test_energy_enstrophy_single_mode(params):
    trunc = build_truncation(2)
    f = field_from_dict(trunc, {(1, 1): 2.0 + 0j})
    assert energy(f, params) == pytest.approx(0.5 * 6.0 * 4.0, rel=1e-15)
    assert enstrophy(f, params) == pytest.approx(0.5 * 36.0 * 4.0, rel=1e-15)


def test_energy_gradient_formula(rng, params):
    trunc = build_truncation(4)
    coeffs = random_coeffs(trunc, rng)
    f = SpectralField(trunc, coeffs)
    per_mode, norm_sq = energy_gradient(f, params)
    assert np.allclose(per_mode, 2.0 * np.abs(coeffs), rtol=1e-15)
    assert norm_sq == pytest.approx(float(np.sum(4.0 * np.abs(coeffs) ** 2)), rel=1e-14)


def test_sobolev_norm_matches_weights(rng, params):
    trunc = build_truncation(4)
    coeffs = random_coeffs(trunc, rng)
    f = SpectralField(trunc, coeffs)
    w = sobolev_weights(trunc, -2.0, params)
    expected = math.sqrt(float(np.sum(w * np.abs(coeffs) ** 2)))
    assert sobolev_norm(f, -2.0, params) == pytest.approx(expected, rel=1e-15)


# ---------------------------------------------------------------------------
# Interaction coefficients
# ---------------------------------------------------------------------------

def test_alpha_coeff_pinned_value(params):
    # h = (1,1), k = (0,1), a = s = 1: bracket = 1*(1/1) - 1/2, ratio = 1
    assert alpha_coeff((1, 1), (0, 1), params) == pytest.approx(0.5 / TWO_PI, rel=1e-15)


def test_pair_coeff_pinned_value(params):
    # h = (1,1), k = (0,1): (h_perp.k) = 1, lam'(k-h) = 2, lam'(h) = 6, lam'(k) = 2
    assert pair_coeff((1, 1), (0, 1), params) == pytest.approx(
        (2.0 - 6.0) / (2.0 * TWO_PI * 2.0), rel=1e-15)


def test_pair_coeff_zero_cases(params):
    assert pair_coeff((0, 1), (0, 2), params) == 0.0        # h parallel to k
    assert pair_coeff((1, 0), (1, 1), params) == 0.0        # |k-h| == |h|


def test_coeff_degenerate_pairs(params):
    with pytest.raises(DegeneratePairError):
        alpha_coeff((1, 1), (1, 1), params)
    with pytest.raises(DegeneratePairError):
        pair_coeff((1, 2), (1, 2), params)
    with pytest.raises(ValueError):
        pair_coeff((0, 0), (1, 1), params)


@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4),
       st.floats(0.0, 2.0), st.floats(0.0, 2.0))
@settings(max_examples=200)
def test_pair_coeff_symmetric_under_source_swap(h1, h2, k1, k2, a, s):
    h, k = (h1, h2), (k1, k2)
    m = (k1 - h1, k2 - h2)
    if h == (0, 0) or k == (0, 0) or m == (0, 0):
        return
    params = ModelParams(a=a, s=s)
    assert pair_coeff(h, k, params) == pytest.approx(pair_coeff(m, k, params),
                                                     rel=1e-12, abs=1e-15)


def test_euler_alpha_coeff_independent_of_a():
    one = alpha_coeff((1, 1), (0, 1), ModelParams(a=0.3, s=0.0))
    two = alpha_coeff((1, 1), (0, 1), ModelParams(a=2.5, s=0.0))
    assert one == two


def test_coeff_table_entries(params):
    table = build_coeff_table(build_truncation(2), params)
    # (1,1) = (0,1) + (1,0): both sources positive, two ordered terms, so the
    # stored one-per-pair entry doubles the symmetric coefficient... unless
    # the pair is norm-degenerate, which (0,1)+(1,0) is: entry must vanish.
    assert table.entry((0, 1), (1, 1)) == 0.0
    # (0,1) = (1,1) + (-1,0): source pair split across signs
    beta = pair_coeff((1, 1), (0, 1), params)
    assert table.entry((1, 1), (0, 1)) == pytest.approx(2.0 * beta, rel=1e-15)
    assert table.entry((3, 3), (0, 1)) == 0.0     # absent pair reads as zero


def test_coeff_table_truncation_guard(params, rng):
    table = build_coeff_table(build_truncation(2), params)
    other = build_truncation(4)
    with pytest.raises(TruncationMismatchError):
        table.check_same_truncation(SpectralField(other, random_coeffs(other, rng)))


# ---------------------------------------------------------------------------
# Physical-space reconstruction
# ---------------------------------------------------------------------------

def test_to_physical_matches_direct_sum(rng):
    trunc = build_truncation(4)
    coeffs = random_coeffs(trunc, rng)
    f = SpectralField(trunc, coeffs)
    n = 16
    grid = to_physical(f, n)
    assert grid.shape == (n, n)
    assert grid.dtype == np.float64
    xs = np.arange(n) * TWO_PI / n
    # direct evaluation at a few points, summing conjugate pairs explicitly
    for (ix, iy) in [(0, 0), (3, 7), (10, 2)]:
        x, y = xs[ix], xs[iy]
        val = 0.0
        for i, k in enumerate(trunc.modes):
            phase = np.exp(1j * (k[0] * x + k[1] * y))
            val += (coeffs[i] * phase + np.conj(coeffs[i] * phase)).real
        assert grid[ix, iy] == pytest.approx(val / TWO_PI, abs=1e-12)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_format_float_seventeen_digits():
    text = format_float(1.0 / 3.0)
    mantissa = text.split("e")[0].replace("-", "").replace(".", "")
    assert len(mantissa) == 17
    assert float(text) == 1.0 / 3.0


def test_field_json_roundtrip_bitwise(rng):
    trunc = build_truncation(4)
    coeffs = random_coeffs(trunc, rng)
    params = ModelParams(a=0.75, s=2.0)
    f = SpectralField(trunc, coeffs)
    text = field_to_json(f, params)
    g, back_params = field_from_json(text)
    assert np.array_equal(g.coeffs, coeffs)
    assert g.trunc.N == 4
    assert back_params.a == 0.75 and back_params.s == 2.0


def test_field_json_layout(rng):
    import json
    trunc = build_truncation(1)
    f = SpectralField(trunc, np.array([1 + 2j, 3 - 4j]))
    doc = json.loads(field_to_json(f, ModelParams()))
    assert set(doc) == {"N", "a", "s", "modes", "re", "im"}
    assert doc["modes"] == [[0, 1], [1, 0]]
    assert doc["re"] == [1.0, 3.0] and doc["im"] == [2.0, -4.0]
