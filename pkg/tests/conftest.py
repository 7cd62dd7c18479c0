"""Shared fixtures: cached interaction tables and random field helpers."""

import numpy as np
import pytest

from avgeuler import ModelParams, build_coeff_table, build_truncation

_TABLE_CACHE = {}


def cached_table(N, a=1.0, s=1.0, gamma=1.0):
    key = (N, a, s, gamma)
    if key not in _TABLE_CACHE:
        trunc = build_truncation(N)
        _TABLE_CACHE[key] = build_coeff_table(trunc, ModelParams(a=a, s=s, gamma=gamma))
    return _TABLE_CACHE[key]


def random_coeffs(trunc, rng, scale=1.0, batch=None):
    shape = (trunc.dim,) if batch is None else (batch, trunc.dim)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@pytest.fixture
def params():
    return ModelParams(a=1.0, s=1.0, gamma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
