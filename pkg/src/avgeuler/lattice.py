"""Fourier-mode indexing, model parameters, spectral fields, and weights.

The stream function on the 2-torus is expanded in the orthonormal basis
e_k(x) = exp(i k.x)/(2 pi), k in Z^2.  A real, mean-zero field is determined
by its coefficients on the positive half-lattice (k1 > 0, or k1 = 0 and
k2 > 0); the negative-mode coefficients follow by conjugation and the zero
mode is fixed to 0.  A truncation retains the symmetric disc |k|^2 <= N.

The smoothing operator (1 - a^2 Laplacian)^s acts as the spectral multiplier
(1 + a^2 |k|^2)^s.  The two conserved quadratic functionals are

    energy    E = 1/2 sum_k |k|^2 (1 + a^2 |k|^2)^s   |w_k|^2,
    enstrophy S = 1/2 sum_k |k|^4 (1 + a^2 |k|^2)^2s  |w_k|^2.

This module also builds the interaction-coefficient table of the quadratic
vector field; the table is symmetrized over each unordered pair of source
modes so that the truncated convolution conserves both quadratic invariants
exactly (see :class:`CoeffTable`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi

ModeIndex = tuple  # (k1, k2) integer pair, k != (0, 0)


class ModeAbsentError(KeyError):
    """Raised when a looked-up mode is outside the truncation (up to sign)."""


class TruncationMismatchError(ValueError):
    """Raised when two objects built on different truncations are combined."""


class DegeneratePairError(ValueError):
    """Raised for interaction coefficients with k - h = 0 (absent term)."""


class ConjugateSymmetryError(ValueError):
    """Raised when a physical-space reconstruction is not real to tolerance."""


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: filter scale a, filter order s, inverse temperature gamma.

    s = 0 reduces the dynamics to the unfiltered (Euler) system regardless
    of a.  gamma scales the Gaussian ensemble (formally exp(-gamma * S)).
    """

    a: float = 1.0
    s: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError(f"filter order s must be >= 0, got {self.s}")
        if self.a < 0:
            raise ValueError(f"filter scale a must be >= 0, got {self.a}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")

    def smoothing_factor(self, ksq) -> np.ndarray | float:
        """Spectral multiplier (1 + a^2 |k|^2)^s of the smoothing operator."""
        return (1.0 + self.a * self.a * np.asarray(ksq, dtype=float)) ** self.s


def is_positive(k: ModeIndex) -> bool:
    """True iff k is in the positive half-lattice (k1 > 0, or k1 = 0, k2 > 0)."""
    return k[0] > 0 or (k[0] == 0 and k[1] > 0)


def build_truncation(N: int) -> "Truncation":
    """Build the truncation retaining positive modes with |k|^2 <= N."""
    return Truncation(int(N))


@dataclass(frozen=True)
class Truncation:
    """Positive modes k with |k|^2 <= N, in fixed lexicographic order."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"truncation bound N must be >= 1, got {self.N}")

    @cached_property
    def modes(self) -> tuple:
        m = int(math.isqrt(self.N))
        out = []
        for k1 in range(0, m + 1):
            for k2 in range(-m, m + 1):
                if k1 * k1 + k2 * k2 <= self.N and is_positive((k1, k2)):
                    out.append((k1, k2))
        return tuple(sorted(out))

    @cached_property
    def index(self) -> dict:
        return {k: i for i, k in enumerate(self.modes)}

    @cached_property
    def mode_array(self) -> np.ndarray:
        arr = np.array(self.modes, dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def ksq(self) -> np.ndarray:
        arr = np.sum(self.mode_array.astype(float) ** 2, axis=1)
        arr.setflags(write=False)
        return arr

    @property
    def dim(self) -> int:
        return len(self.modes)

    def contains(self, k: ModeIndex) -> bool:
        """True iff k or -k is a retained positive mode (k may be signed)."""
        return k[0] * k[0] + k[1] * k[1] <= self.N and k != (0, 0)


def sobolev_weight(k: ModeIndex, p: float, params: ModelParams) -> float:
    """Weight |k|^2p (1 + a^2 |k|^2)^(p s) of the order-(p, s) inner product.

    Computed as (|k|^2 (1+a^2|k|^2)^s)^p so that the p = 2 weight is exactly
    the square of the p = 1 weight in floating point.
    """
    ksq = float(k[0] * k[0] + k[1] * k[1])
    base = ksq * (1.0 + params.a * params.a * ksq) ** params.s
    if p == 1:
        return base
    if p == 2:
        return base * base
    return base ** p


def sobolev_weights(trunc: Truncation, p: float, params: ModelParams) -> np.ndarray:
    """Vector of sobolev_weight over the truncation's modes."""
    ksq = trunc.ksq
    base = ksq * (1.0 + params.a * params.a * ksq) ** params.s
    if p == 1:
        return base
    if p == 2:
        return base * base
    return base ** p


def sobolev_norm(field: "SpectralField", p: float, params: ModelParams) -> float:
    """Norm (sum_k w_k^(p) |w_k|^2)^(1/2) over the positive retained modes."""
    w = sobolev_weights(field.trunc, p, params)
    return math.sqrt(float(np.sum(w * np.abs(field.coeffs) ** 2)))


@dataclass(frozen=True)
class SpectralField:
    """Complex coefficients on the positive retained modes of a truncation.

    The implied full-lattice field has w_{-k} = conj(w_k) and w_0 = 0, so the
    stream function is real with zero mean.  Instances are immutable; the
    coefficient array is stored read-only.
    """

    trunc: Truncation
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=np.complex128)
        if arr.shape != (self.trunc.dim,):
            raise ValueError(
                f"coefficient shape {arr.shape} does not match truncation "
                f"dimension {self.trunc.dim}")
        if not np.all(np.isfinite(arr.view(float))):
            raise ValueError("coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    def with_coeffs(self, coeffs) -> "SpectralField":
        return SpectralField(self.trunc, coeffs)


def zero_field(trunc: Truncation) -> SpectralField:
    return SpectralField(trunc, np.zeros(trunc.dim, dtype=np.complex128))


def field_from_dict(trunc: Truncation, values: dict) -> SpectralField:
    """Build a field from a {mode: coefficient} mapping (absent modes are 0)."""
    coeffs = np.zeros(trunc.dim, dtype=np.complex128)
    for k, v in values.items():
        k = tuple(int(c) for c in k)
        if k not in trunc.index:
            raise ModeAbsentError(f"mode {k} is not a positive retained mode")
        coeffs[trunc.index[k]] = v
    return SpectralField(trunc, coeffs)


def lookup(field: SpectralField, k: ModeIndex) -> complex:
    """Coefficient w_k of the full-lattice field, resolving conjugation.

    Returns w_k for positive k and conj(w_{-k}) otherwise.  Raises
    ModeAbsentError when neither k nor -k is retained; callers that treat
    absent modes as zero must do so explicitly.
    """
    k = (int(k[0]), int(k[1]))
    if is_positive(k):
        i = field.trunc.index.get(k)
        if i is None:
            raise ModeAbsentError(f"mode {k} absent from truncation N={field.trunc.N}")
        return complex(field.coeffs[i])
    neg = (-k[0], -k[1])
    i = field.trunc.index.get(neg)
    if i is None:
        raise ModeAbsentError(f"mode {k} absent from truncation N={field.trunc.N}")
    return complex(np.conj(field.coeffs[i]))


def energy(field: SpectralField, params: ModelParams) -> float:
    """E = 1/2 sum_k |k|^2 (1 + a^2 |k|^2)^s |w_k|^2 over positive modes."""
    w = sobolev_weights(field.trunc, 1.0, params)
    return 0.5 * float(np.sum(w * np.abs(field.coeffs) ** 2))


def enstrophy(field: SpectralField, params: ModelParams) -> float:
    """S = 1/2 sum_k |k|^4 (1 + a^2 |k|^2)^2s |w_k|^2 over positive modes."""
    w = sobolev_weights(field.trunc, 2.0, params)
    return 0.5 * float(np.sum(w * np.abs(field.coeffs) ** 2))


def energy_gradient(field: SpectralField, params: ModelParams):
    """Energy gradient components in the orthonormal enstrophy-space basis.

    Along the normalized basis vector e_k / (|k|^2 (1+a^2|k|^2)^s) the
    directional derivative of the energy is 2|w_k|, so the squared norm of
    the gradient is sum_k 4 |w_k|^2.

    Returns:
        (per-mode array of 2|w_k|, squared norm sum_k 4|w_k|^2)
    """
    g = 2.0 * np.abs(field.coeffs)
    return g, float(np.sum(g * g))


def alpha_coeff(h: ModeIndex, k: ModeIndex, params: ModelParams) -> float:
    """Unsymmetrized interaction coefficient of the quadratic vector field.

    alpha(h, k) = (1/2pi) [ (h_perp.k)(h.k)/|k|^2 - (h_perp.k)/2 ]
                  * (1 + a^2 |k-h|^2)^s / (1 + a^2 |k|^2)^s

    with h_perp = (-h2, h1).  This is the coefficient in its historical
    one-sided form; the dynamics table (:class:`CoeffTable`) instead stores
    the pair-symmetrized variant that conserves both quadratic invariants
    under truncation.  With s = 0 the smoothing ratio is exactly 1 and the
    value is independent of a.
    """
    if h == (0, 0) or k == (0, 0):
        raise ValueError("modes h and k must be nonzero")
    if h == k:
        raise DegeneratePairError(f"k - h = 0 for h = k = {k}: term absent")
    hp_dot_k = -h[1] * k[0] + h[0] * k[1]
    h_dot_k = h[0] * k[0] + h[1] * k[1]
    ksq = k[0] * k[0] + k[1] * k[1]
    kmh = (k[0] - h[0], k[1] - h[1])
    ratio = params.smoothing_factor(kmh[0] ** 2 + kmh[1] ** 2) / params.smoothing_factor(ksq)
    return (hp_dot_k * (h_dot_k / ksq - 0.5)) * ratio / TWO_PI


def pair_coeff(h: ModeIndex, k: ModeIndex, params: ModelParams) -> float:
    """Conserving interaction coefficient of the unordered source pair {h, k-h}.

    beta(h, k) = (h_perp.k) [ |k-h|^2 (1+a^2|k-h|^2)^s - |h|^2 (1+a^2|h|^2)^s ]
                 / (4 pi |k|^2 (1+a^2|k|^2)^s)

    It is symmetric under h <-> k-h and vanishes exactly when h_perp.k = 0.
    Summing beta once per unordered source pair reproduces the full
    signed-lattice convolution, which conserves energy and enstrophy exactly
    under the symmetric-disc truncation.
    """
    if h == (0, 0) or k == (0, 0):
        raise ValueError("modes h and k must be nonzero")
    kmh = (k[0] - h[0], k[1] - h[1])
    if kmh == (0, 0):
        raise DegeneratePairError(f"k - h = 0 for h = {h}, k = {k}: term absent")
    hp_dot_k = -h[1] * k[0] + h[0] * k[1]
    if hp_dot_k == 0:
        return 0.0
    hsq = h[0] * h[0] + h[1] * h[1]
    msq = kmh[0] * kmh[0] + kmh[1] * kmh[1]
    ksq = k[0] * k[0] + k[1] * k[1]
    num = msq * params.smoothing_factor(msq) - hsq * params.smoothing_factor(hsq)
    return hp_dot_k * num / (2.0 * TWO_PI * ksq * params.smoothing_factor(ksq))


@dataclass(frozen=True)
class CoeffTable:
    """Precomputed interaction coefficients of the quadratic vector field.

    For each positive retained k, the tendency is

        B_k = sum_{h > 0 retained, k-h retained (up to sign), k-h != 0}
              entry(h, k) * w_h * w~_{k-h}

    where w~ resolves negative modes by conjugation.  entry(h, k) equals the
    conserving pair coefficient beta(h, k) when k-h is positive (the pair is
    then visited twice by the sum) and 2*beta(h, k) when k-h is negative
    (visited once), so the sum equals the full signed-lattice convolution
    term by term.  Flattened term arrays are precomputed for vectorized
    evaluation over ensembles.
    """

    params: ModelParams
    trunc: Truncation

    @cached_property
    def entries(self) -> dict:
        """Mapping (h, k) -> coefficient over admissible positive pairs."""
        out = {}
        modes = self.trunc.modes
        for k in modes:
            for h in modes:
                kmh = (k[0] - h[0], k[1] - h[1])
                if kmh == (0, 0) or not self.trunc.contains(kmh):
                    continue
                beta = pair_coeff(h, k, self.params)
                out[(h, k)] = beta if is_positive(kmh) else 2.0 * beta
        return out

    @cached_property
    def _term_arrays(self):
        """(out_idx, h_idx, src_idx, conj_mask, coeff) for vectorized sums."""
        idx = self.trunc.index
        out_idx, h_idx, src_idx, conj_mask, coeff = [], [], [], [], []
        for (h, k), c in self.entries.items():
            kmh = (k[0] - h[0], k[1] - h[1])
            neg = not is_positive(kmh)
            src = (-kmh[0], -kmh[1]) if neg else kmh
            out_idx.append(idx[k])
            h_idx.append(idx[h])
            src_idx.append(idx[src])
            conj_mask.append(neg)
            coeff.append(c)
        return (np.asarray(out_idx, dtype=np.intp),
                np.asarray(h_idx, dtype=np.intp),
                np.asarray(src_idx, dtype=np.intp),
                np.asarray(conj_mask, dtype=bool),
                np.asarray(coeff, dtype=float))

    def entry(self, h: ModeIndex, k: ModeIndex) -> float:
        """Coefficient for the admissible pair (h, k); 0.0 when absent."""
        return self.entries.get((tuple(h), tuple(k)), 0.0)

    def check_same_truncation(self, field: SpectralField):
        if field.trunc != self.trunc:
            raise TruncationMismatchError(
                f"field truncation N={field.trunc.N} does not match "
                f"table truncation N={self.trunc.N}")


def build_coeff_table(trunc: Truncation, params: ModelParams) -> CoeffTable:
    """Precompute the conserving interaction-coefficient table."""
    table = CoeffTable(params, trunc)
    table.entries  # materialize eagerly
    table._term_arrays
    return table


def to_physical(field: SpectralField, n: int) -> np.ndarray:
    """Sample the stream function on an n x n grid over [0, 2pi)^2.

    Evaluates phi(x) = sum_{k>0} w_k e_k(x) + conjugate terms directly.  The
    reconstruction must be real: an imaginary residue above 1e-12 signals a
    broken conjugate-symmetry invariant and raises ConjugateSymmetryError;
    below that it is discarded.
    """
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n}")
    x = TWO_PI * np.arange(n) / n
    k1 = field.trunc.mode_array[:, 0][:, None, None]
    k2 = field.trunc.mode_array[:, 1][:, None, None]
    phase = k1 * x[None, :, None] + k2 * x[None, None, :]
    basis = np.exp(1j * phase) / TWO_PI
    w = field.coeffs[:, None, None]
    grid = np.sum(w * basis + np.conj(w * basis), axis=0)
    residue = float(np.max(np.abs(grid.imag))) if grid.size else 0.0
    if residue > 1e-12:
        raise ConjugateSymmetryError(
            f"imaginary residue {residue:.3e} exceeds 1e-12")
    return np.ascontiguousarray(grid.real)


def format_float(x: float) -> str:
    """Decimal representation with 17 significant digits."""
    return format(float(x), ".16e")


def _float_list(values) -> str:
    return "[" + ", ".join(format_float(v) for v in values) + "]"


def field_to_json(field: SpectralField, params: ModelParams) -> str:
    """Serialize a field with its parameters to the canonical JSON layout.

    Layout: {"N": int, "a": float, "s": float, "modes": [[k1,k2],...],
    "re": [...], "im": [...]} with modes in canonical order and floats at
    17 significant digits.
    """
    modes = "[" + ", ".join(f"[{k[0]}, {k[1]}]" for k in field.trunc.modes) + "]"
    return ("{" + f'"N": {field.trunc.N}, '
            f'"a": {format_float(params.a)}, '
            f'"s": {format_float(params.s)}, '
            f'"modes": {modes}, '
            f'"re": {_float_list(field.coeffs.real)}, '
            f'"im": {_float_list(field.coeffs.imag)}' + "}")


def field_from_json(text: str):
    """Parse the canonical field JSON; returns (field, params).

    The serialized gamma is not part of the layout, so the returned params
    carry gamma = 1; callers that need a different gamma replace it.
    """
    doc = json.loads(text)
    trunc = build_truncation(int(doc["N"]))
    modes = [tuple(int(c) for c in k) for k in doc["modes"]]
    if modes != list(trunc.modes):
        raise ValueError("serialized modes are not in canonical order for N")
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc["im"], dtype=float)
    if re.shape != (trunc.dim,) or im.shape != (trunc.dim,):
        raise ValueError("re/im length does not match the truncation")
    params = ModelParams(a=float(doc["a"]), s=float(doc["s"]), gamma=1.0)
    return SpectralField(trunc, re + 1j * im), params
