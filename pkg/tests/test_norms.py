import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracnls.norms import (
    NormReport,
    certified_infimum,
    embedding_constant_c1,
    eta_of,
    l2_norm,
    lemma_c1,
    multi_indices,
    norm_report,
    quadrature_l2,
    sobolev_norm_derivative_sum,
    sobolev_norm_spectral,
    sup_norm,
)
from fracnls.spectral import SpectralField, TorusGrid, evaluate_at, from_function, oversample
from conftest import random_field

seeds = st.integers(0, 2**32 - 1)


def test_constant_l2():
    g = TorusGrid(1, 16)
    F = from_function(g, lambda x: 2 + 0 * x)
    assert l2_norm(F) == pytest.approx(2 * math.sqrt(2 * math.pi))


@pytest.mark.parametrize("r", [0, 1, 2.5])
def test_single_mode_weight(r):
    g = TorusGrid(1, 16)
    F = from_function(g, lambda x: np.exp(3j * x))
    assert sobolev_norm_spectral(F, r) == pytest.approx(math.sqrt(2 * math.pi) * 10 ** (r / 2))


def test_derivative_sum_single_mode():
    g = TorusGrid(1, 16)
    F = from_function(g, lambda x: np.exp(3j * x))
    root = math.sqrt(2 * math.pi)
    assert sobolev_norm_derivative_sum(F, 2) == pytest.approx(root * (1 + 3 + 9))


def test_multi_indices_count():
    assert len(list(multi_indices(2, 2))) == 6
    assert len(list(multi_indices(3, 1, 1))) == 3


@given(seeds)
def test_parseval_against_quadrature(seed):
    F = random_field(TorusGrid(1, 16), np.random.default_rng(seed))
    assert l2_norm(F) == pytest.approx(quadrature_l2(F), rel=1e-12)


@given(seeds, st.sampled_from([1, 2]))
def test_norm_sandwich(seed, dim):
    g = TorusGrid(dim, 8)
    F = random_field(g, np.random.default_rng(seed))
    a, b = sobolev_norm_spectral(F, 1), sobolev_norm_derivative_sum(F, 1)
    assert a <= b * (1 + 1e-12)
    assert b <= math.sqrt(dim + 1) * a * (1 + 1e-12)


@given(seeds)
def test_embedding_bound(seed):
    g = TorusGrid(1, 16)
    F = random_field(g, np.random.default_rng(seed))
    C1 = embedding_constant_c1(1, 1, g)
    assert sup_norm(F, 8) <= C1 * sobolev_norm_spectral(F, 1) * (1 + 1e-12)


def test_embedding_needs_regularity():
    g = TorusGrid(2, 8)
    with pytest.raises(ValueError):
        embedding_constant_c1(1, 2, g)
    assert lemma_c1(2, g) >= 1


@given(seeds, st.floats(0.05, 0.9))
def test_certified_infimum_is_lower_bound(seed, amp):
    rng = np.random.default_rng(seed)
    g = TorusGrid(1, 16)
    pert = random_field(g, rng)
    pert = pert * (amp / np.sum(np.abs(pert.coeffs)))
    coeffs = np.array(pert.coeffs)
    coeffs[0] += 1.0
    F = SpectralField(g, coeffs)
    dense = np.linspace(0, 2 * np.pi, 4001)[:, None]
    true_min = np.min(np.abs(evaluate_at(F, dense)))
    assert certified_infimum(F, 2) <= true_min + 1e-12


def test_certified_infimum_requires_oversampling():
    F = from_function(TorusGrid(1, 8), lambda x: 1 + 0 * x)
    with pytest.raises(ValueError):
        certified_infimum(F, 1)
    assert certified_infimum(F, 2) == pytest.approx(1)
    assert eta_of(F) == pytest.approx(1)
    assert eta_of(from_function(TorusGrid(1, 8), lambda x: np.sin(x))) is None


def test_norm_report_csv():
    F = from_function(TorusGrid(1, 8), lambda x: 1 + 0.1 * np.exp(1j * x))
    rep = norm_report(F, 2)
    row = rep.csv_row(0.5).split(",")
    assert len(row) == len(NormReport.CSV_HEADER)
    assert float(row[0]) == 0.5
    assert rep.inf_lower_bound <= 0.9 + 1e-12
