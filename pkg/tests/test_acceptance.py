"""Desk-scale acceptance criteria, seed 0, default scale.

Each check normalises its worst case by the stated tolerance, so ``worst <= 1``
is the pass condition alongside the per-check verdict and runtime budget.
"""
import pytest

from fracnls.verification import run_check

# (criterion, check name, runtime budget in seconds)
CRITERIA = [
    (1, "plane_wave", 9 * 5.0),
    (2, "constant_ode", 1.0),
    (3, "conservation", 30.0),
    (4, "contraction", 120.0),
    (5, "lemma_g1_bound", 120.0),
    (6, "lemma_gamma2_difference", 120.0),
    (7, "k_constant", 1.0),
    (8, "series_condition", 1.0),
    (9, "rk4_oracle", 120.0),
    (10, "lipschitz", 60.0),
    (11, "non_vanishing", 60.0),
    (12, "norm_equivalence", 1.0),
]


@pytest.mark.parametrize("number,name,budget", CRITERIA, ids=[c[1] for c in CRITERIA])
def test_criterion(number, name, budget, capsys):
    r = run_check(name, 0)
    ok = r.passed and r.worst <= 1.0 and r.elapsed < budget
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: "
              f"{r.passed_samples}/{r.samples} worst={r.worst:.3g} time={r.elapsed:.2f}s (budget {budget:g}s)")
    assert r.passed, r.detail
    assert r.worst <= 1.0
    assert r.elapsed < budget


def test_plane_wave_cases_individually_fast():
    assert run_check("plane_wave", 0).detail["under_5s"]


def test_spot_values():
    k = run_check("k_constant", 0)
    assert k.passed_samples == k.samples
    assert run_check("series_condition", 0).detail["single_term"] == pytest.approx(5.0)
