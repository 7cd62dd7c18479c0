"""The quadratic vector field of the truncated flow and its derived objects.

The time derivative of each retained coefficient is a quadratic form in the
coefficients, assembled from the precomputed interaction table:

    dw_k/dt = B_k = sum_h entry(h, k) w_h w~_{k-h}.

This module evaluates B directly (term-by-term, vectorized over ensembles)
and through a padded FFT pseudo-spectral path, assembles the real-coordinate
Jacobian and the constant second derivative, verifies the divergence-free
and energy/enstrophy-orthogonality structure, computes truncated
Hilbert-Schmidt norms of the first and second derivatives, and evaluates the
partial sums and tail bounds of the Gaussian-ensemble support series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import fft2, ifft2, next_fast_len
from scipy.integrate import quad

from .lattice import (
    TWO_PI,
    CoeffTable,
    ModeAbsentError,
    ModelParams,
    SpectralField,
    Truncation,
    is_positive,
    sobolev_weight,
    sobolev_weights,
)

# A tangent (time derivative of a field) has the same structure as the field
# itself: one complex value per positive retained mode, extended to negative
# modes by conjugation.
Tangent = SpectralField


class AliasingError(ValueError):
    """Raised when a requested FFT grid is too small for alias-free products."""


# ---------------------------------------------------------------------------
# Vector-field evaluation
# ---------------------------------------------------------------------------

def eval_vector_field_batch(coeffs: np.ndarray, table: CoeffTable) -> np.ndarray:
    """Tendency array for a batch of coefficient vectors (shape (..., d)).

    Vectorizes the double-loop sum B_k = sum_h entry(h,k) w_h w~_{k-h} over
    leading batch axes; the per-k summation order is fixed by the table, so
    results are bitwise deterministic.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    d = table.trunc.dim
    if coeffs.shape[-1] != d:
        raise ValueError(
            f"coefficient batch last axis {coeffs.shape[-1]} does not match "
            f"truncation dimension {d}")
    out_idx, h_idx, src_idx, conj_mask, coeff = table._term_arrays
    out = np.zeros(coeffs.shape, dtype=np.complex128)
    if out_idx.size == 0:
        return out
    conj_coeffs = np.conj(coeffs)
    src_vals = np.where(conj_mask, conj_coeffs[..., src_idx], coeffs[..., src_idx])
    terms = coeff * coeffs[..., h_idx] * src_vals
    # out_idx is nondecreasing (entries are built k-major), so contiguous
    # groups of terms share an output mode.
    boundaries = np.searchsorted(out_idx, np.arange(d + 1))
    sums = np.add.reduceat(terms, boundaries[:-1], axis=-1)
    nonempty = boundaries[:-1] < boundaries[1:]
    out[..., nonempty] = sums[..., nonempty]
    return out


def eval_vector_field(field: SpectralField, table: CoeffTable) -> Tangent:
    """Tendency dw/dt of a single field under the truncated dynamics."""
    table.check_same_truncation(field)
    return SpectralField(field.trunc, eval_vector_field_batch(field.coeffs, table))


def _alias_free_grid(trunc: Truncation) -> tuple:
    """(minimal alias-free grid size, padded fast size) for quadratic products.

    The product of two band-limited fields with per-axis wavenumbers up to m
    has wavenumbers up to 2m; reading the result at wavenumbers up to m is
    alias-free iff no wrapped image 3m lands inside the band, which requires
    n >= 3m + 1.
    """
    m = int(np.max(np.abs(trunc.mode_array)))
    minimal = 3 * m + 1
    return minimal, int(next_fast_len(minimal))


def eval_vector_field_fast(field: SpectralField, params: ModelParams,
                           grid_size: int | None = None) -> Tangent:
    """Tendency via a padded FFT pseudo-spectral product.

    Forms q (the filtered Laplacian of the stream function, multiplier
    -|k|^2 (1+a^2|k|^2)^s) and the incompressible velocity (the rotated
    gradient of the stream function) on a physical grid, multiplies
    pointwise to get the advection term, transforms back, restricts to the
    retained disc, and divides by the per-mode multiplier.  The grid is
    padded so the quadratic product is exactly alias-free; a smaller
    explicit grid raises AliasingError rather than silently aliasing.
    """
    trunc = field.trunc
    minimal, padded = _alias_free_grid(trunc)
    n = padded if grid_size is None else int(grid_size)
    if n < minimal:
        raise AliasingError(
            f"grid size {n} is below the alias-free minimum {minimal} for "
            f"truncation N={trunc.N}")
    phi_hat = np.zeros((n, n), dtype=np.complex128)
    k1 = trunc.mode_array[:, 0]
    k2 = trunc.mode_array[:, 1]
    phi_hat[k1 % n, k2 % n] = field.coeffs
    phi_hat[(-k1) % n, (-k2) % n] = np.conj(field.coeffs)
    wav = np.fft.fftfreq(n, d=1.0 / n)  # signed integer wavenumbers
    kx = wav[:, None]
    ky = wav[None, :]
    ksq = kx * kx + ky * ky
    mult = ksq * params.smoothing_factor(ksq)  # |k|^2 (1+a^2|k|^2)^s
    q_hat = -mult * phi_hat
    u1 = ifft2(-1j * ky * phi_hat).real   # velocity = rotated gradient
    u2 = ifft2(1j * kx * phi_hat).real
    dq1 = ifft2(1j * kx * q_hat).real
    dq2 = ifft2(1j * ky * q_hat).real
    w_hat = fft2(u1 * dq1 + u2 * dq2)
    lam = trunc.ksq * params.smoothing_factor(trunc.ksq)
    out = w_hat[k1 % n, k2 % n] * (n * n) / (TWO_PI * lam)
    return SpectralField(trunc, out)


# ---------------------------------------------------------------------------
# Derivatives, divergence, pairings
# ---------------------------------------------------------------------------

def _signed_coeff(field: SpectralField, m: tuple) -> complex:
    """Coefficient at a signed mode; 0 when the mode is not retained."""
    if is_positive(m):
        i = field.trunc.index.get(m)
        return complex(field.coeffs[i]) if i is not None else 0.0 + 0.0j
    i = field.trunc.index.get((-m[0], -m[1]))
    return complex(np.conj(field.coeffs[i])) if i is not None else 0.0 + 0.0j


def _directional_derivatives(field: SpectralField, table: CoeffTable,
                             k: tuple, j: tuple) -> tuple:
    """Holomorphic and conjugate derivatives (dB_k/dw_j, dB_k/dconj(w_j)).

    For positive retained j, the terms of B_k containing w_j are those with
    h = j or k-h = j (unconjugated) and h = k+j (conjugated):

        dB_k/dw_j       = entry(j,k) w~_{k-j} + entry(k-j,k) w_{k-j}
                          (second term only when k-j is positive),
        dB_k/dconj(w_j) = entry(k+j,k) w_{k+j}.
    """
    kmj = (k[0] - j[0], k[1] - j[1])
    dd = 0.0 + 0.0j
    if kmj != (0, 0):
        dd += table.entry(j, k) * _signed_coeff(field, kmj)
        if is_positive(kmj):
            dd += table.entry(kmj, k) * _signed_coeff(field, kmj)
    kpj = (k[0] + j[0], k[1] + j[1])
    dc = table.entry(kpj, k) * _signed_coeff(field, kpj)
    return dd, dc


def jacobian(field: SpectralField, table: CoeffTable) -> np.ndarray:
    """Real Jacobian of the tendency, 2d x 2d over (Re w_k, Im w_k) pairs.

    Row block k and column block j hold the derivatives of (Re B_k, Im B_k)
    with respect to (Re w_j, Im w_j); with D and C the holomorphic and
    conjugate derivatives, the block is
    [[Re(D+C), Im(C-D)], [Im(D+C), Re(D-C)]].
    """
    table.check_same_truncation(field)
    modes = field.trunc.modes
    d = field.trunc.dim
    out = np.zeros((2 * d, 2 * d), dtype=float)
    for ik, k in enumerate(modes):
        for ij, j in enumerate(modes):
            dd, dc = _directional_derivatives(field, table, k, j)
            if dd == 0 and dc == 0:
                continue
            r, c = 2 * ik, 2 * ij
            out[r, c] = (dd + dc).real
            out[r, c + 1] = (dc - dd).imag
            out[r + 1, c] = (dd + dc).imag
            out[r + 1, c + 1] = (dd - dc).real
    return out


def divergence(field: SpectralField, table: CoeffTable) -> float:
    """Phase-space divergence sum_k [dRe B_k/dRe w_k + dIm B_k/dIm w_k].

    The conjugate derivative cancels within each diagonal block and no term
    of B_k contains w_k unconjugated (that would need a zero source mode),
    so the analytic value is 0; the evaluation mirrors the Jacobian diagonal.
    """
    table.check_same_truncation(field)
    total = 0.0
    for k in field.trunc.modes:
        dd, dc = _directional_derivatives(field, table, k, k)
        total += (dd + dc).real + (dd - dc).real
    return total


def hessian_entry(i: tuple, j: tuple, table: CoeffTable) -> Tangent:
    """Constant second derivative d^2 B / dw_i dw_j as a tangent vector.

    The only output mode coupled to the unconjugated pair (w_i, w_j) is
    k = i + j, with value entry(j,k) + entry(i,k); the expression is
    symmetric in (i, j) and handles i = j (the quadratic term w_i^2
    differentiates to twice its coefficient).
    """
    i = (int(i[0]), int(i[1]))
    j = (int(j[0]), int(j[1]))
    for m in (i, j):
        if m not in table.trunc.index:
            raise ModeAbsentError(f"mode {m} is not a positive retained mode")
    coeffs = np.zeros(table.trunc.dim, dtype=np.complex128)
    k = (i[0] + j[0], i[1] + j[1])
    idx = table.trunc.index.get(k)
    if idx is not None:
        coeffs[idx] = table.entry(j, k) + table.entry(i, k)
    return SpectralField(table.trunc, coeffs)


def energy_pairing(field: SpectralField, table: CoeffTable) -> float:
    """d/dt of the energy along the flow: sum_k w_k^(1) Re(B_k conj(w_k)).

    Vanishes to machine precision: the symmetrized interaction table makes
    the truncated convolution conserve the energy exactly.
    """
    b = eval_vector_field(field, table)
    w = sobolev_weights(field.trunc, 1.0, table.params)
    return float(np.sum(w * (b.coeffs * np.conj(field.coeffs)).real))


def enstrophy_pairing(field: SpectralField, table: CoeffTable) -> float:
    """d/dt of the enstrophy along the flow: sum_k w_k^(2) Re(B_k conj(w_k))."""
    b = eval_vector_field(field, table)
    w = sobolev_weights(field.trunc, 2.0, table.params)
    return float(np.sum(w * (b.coeffs * np.conj(field.coeffs)).real))


def pairing_scale(field: SpectralField, table: CoeffTable, p: float) -> float:
    """Magnitude reference sum_k w_k^(p) |B_k||w_k| for pairing tolerances."""
    b = eval_vector_field(field, table)
    w = sobolev_weights(field.trunc, p, table.params)
    return float(np.sum(w * np.abs(b.coeffs) * np.abs(field.coeffs)))


# ---------------------------------------------------------------------------
# Hilbert-Schmidt norms of the first and second derivatives
# ---------------------------------------------------------------------------

def hs_norm_grad(field: SpectralField, table: CoeffTable, alpha: float) -> float:
    """Squared Hilbert-Schmidt norm of the first derivative of the tendency.

    Directions are the order-(2, s) normalized basis vectors; outputs are
    measured in the order-(1-alpha, s) norm:

        sum_{j,k>0} [w_k^(1-alpha) / w_j^(2)] c_{j,k}^2 |w_{k-j}|^2

    with c_{j,k} = entry(j,k) + entry(k-j,k) (second term only when k-j is
    positive) and |w_{k-j}| resolved by conjugation.  Retains terms with
    k-j inside the disc only, so the value is nondecreasing in N.
    """
    table.check_same_truncation(field)
    params = table.params
    modes = field.trunc.modes
    total = 0.0
    for k in modes:
        wk = sobolev_weight(k, 1.0 - alpha, params)
        for j in modes:
            kmj = (k[0] - j[0], k[1] - j[1])
            if kmj == (0, 0):
                continue
            c = table.entry(j, k)
            if is_positive(kmj):
                c += table.entry(kmj, k)
            if c == 0.0:
                continue
            wj = sobolev_weight(j, 2.0, params)
            amp = abs(_signed_coeff(field, kmj))
            total += (wk / wj) * c * c * amp * amp
    return total


def hs_norm_hess(table: CoeffTable, alpha: float) -> float:
    """Squared Hilbert-Schmidt norm of the (constant) second derivative.

        sum_{i,j>0} [w_{i+j}^(1-alpha) / (w_i^(2) w_j^(2))]
                    (entry(j,i+j) + entry(i,i+j))^2

    restricted to i+j inside the retained disc.
    """
    params = table.params
    modes = table.trunc.modes
    total = 0.0
    for i in modes:
        wi = sobolev_weight(i, 2.0, params)
        for j in modes:
            k = (i[0] + j[0], i[1] + j[1])
            if k not in table.trunc.index:
                continue
            c = table.entry(j, k) + table.entry(i, k)
            if c == 0.0:
                continue
            wj = sobolev_weight(j, 2.0, params)
            wk = sobolev_weight(k, 1.0 - alpha, params)
            total += wk / (wi * wj) * c * c
    return total


# ---------------------------------------------------------------------------
# Gaussian-ensemble support series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportSeries:
    """Partial sum and tail bound of the expected squared order-(1-alpha, s)
    norm under the Gaussian ensemble.

    partial_sum is exact for the truncation (it equals the ensemble
    expectation of the squared norm of a truncated sample); tail_bound is a
    rigorous upper bound on the remainder over all modes outside the disc,
    infinite when the series diverges.
    """

    alpha: float
    partial_sum: float
    tail_bound: float
    threshold: float
    converges: bool

    @property
    def upper_bound(self) -> float:
        return self.partial_sum + self.tail_bound


def series_threshold(params: ModelParams) -> float:
    """Largest alpha at which the support series diverges.

    The generic threshold is -s/(s+1); without smoothing (a = 0 or s = 0)
    the smoothing factor is constant and the threshold rises to 0.
    """
    if params.a == 0.0 or params.s == 0.0:
        return 0.0
    return -params.s / (params.s + 1.0)


def support_series(alpha: float, params: ModelParams, N: int) -> SupportSeries:
    """Partial sum and tail bound of (2/gamma) sum_k w_k^{-(1+alpha)}.

    The sum runs over positive modes; the partial sum covers |k|^2 <= N and
    equals the Gaussian-ensemble expectation of the squared order-(1-alpha,s)
    norm at that truncation.  The tail combines exact enumeration out to a
    larger disc with an integral comparison (each excluded lattice point
    dominates the integral of the decreasing radial summand over its unit
    cell, shifted by half a cell diagonal).  Divergent parameters are
    flagged with an infinite tail bound rather than an error.
    """
    trunc = Truncation(int(N))
    pref = 2.0 / params.gamma
    partial = pref * float(np.sum(sobolev_weights(trunc, -(1.0 + alpha), params)))
    threshold = series_threshold(params)
    converges = alpha > threshold
    if not converges:
        return SupportSeries(alpha, partial, math.inf, threshold, False)

    M = max(4 * int(N), 64)
    outer = Truncation(M)
    exact_ring = pref * float(
        np.sum(sobolev_weights(outer, -(1.0 + alpha), params)[outer.ksq > N]))

    def radial(u: float) -> float:
        return u ** (-2.0 * (1.0 + alpha)) * (
            1.0 + params.a * params.a * u * u) ** (-params.s * (1.0 + alpha))

    # Sum over |k|^2 > M  <=  integral of radial(|x| - 1/sqrt(2)) over
    # |x| >= sqrt(M+1) - 1/sqrt(2); halved for the positive half-lattice.
    lo = math.sqrt(M + 1.0) - math.sqrt(2.0)
    integral, _ = quad(lambda u: radial(u) * (u + 0.5 * math.sqrt(2.0)),
                       lo, np.inf)
    tail = exact_ring + pref * 0.5 * TWO_PI * integral
    return SupportSeries(alpha, partial, tail, threshold, True)
