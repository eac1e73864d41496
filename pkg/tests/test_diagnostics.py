import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracnls.diagnostics import (
    ConservationRecord,
    drift,
    energy,
    kinetic_energy,
    mass,
    read_timeline_csv,
    timeline,
    timeline_csv,
)
from fracnls.initial_data import constant
from fracnls.nonlinearity import NonVanishingError, builtin
from fracnls.solver import SolverConfig, integrate
from fracnls.spectral import TorusGrid, free_propagator, from_function
from fracnls.verification import CHECKS, k_brute_force, run_check, run_verification_suite
from conftest import random_field

G = TorusGrid(1, 32)


def test_mass_examples():
    assert mass(constant(G, 1.5)) == pytest.approx(2 * math.pi * 2.25)
    assert mass(from_function(G, lambda x: np.exp(1j * x) + np.exp(2j * x))) == pytest.approx(4 * math.pi)


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 3), st.floats(-5, 5))
def test_mass_invariant_under_free_flow(seed, s, t):
    F = random_field(G, np.random.default_rng(seed))
    assert mass(free_propagator(F, s, t)) == pytest.approx(mass(F), rel=1e-14)


def test_energy_examples():
    c = 1.3
    assert energy(constant(G, c), builtin("power", gamma=2.0), 1.0) == pytest.approx(-2 * math.pi * c ** 4 / 4)
    F = from_function(G, lambda x: np.exp(1j * x))
    assert energy(F, builtin("zero"), 2.0) == pytest.approx(math.pi)


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 3), st.floats(-5, 5))
def test_free_energy_invariant(seed, s, t):
    F = random_field(G, np.random.default_rng(seed))
    assert kinetic_energy(free_propagator(F, s, t), s) == pytest.approx(kinetic_energy(F, s), rel=1e-12)


def test_energy_singular_domain():
    F = from_function(G, lambda x: np.cos(x))
    with pytest.raises(NonVanishingError):
        energy(F, builtin("log"), 1.0)


def test_timeline_round_trip():
    spec = builtin("log")
    cfg = SolverConfig(s=1.0, J=2, M=32, use_certified_T=False, max_window=0.05)
    traj, _ = integrate(from_function(G, lambda x: 2 + 0.1 * np.exp(1j * x)), spec, cfg, 0.2)
    records = timeline(traj, spec, 1.0, 2)
    assert all(r.mass >= 0 and r.eta_times_inf >= 0.5 for r in records)
    text = timeline_csv(records)
    assert text.splitlines()[0] == ",".join(ConservationRecord.header())
    assert read_timeline_csv(text) == records
    d = drift(records)
    assert d["mass_rel"] < 1e-12 and d["energy_rel"] < 1e-10


def test_k_brute_force_oracle():
    assert k_brute_force(1, 2.0) == 7


def test_suite_deterministic_and_filterable():
    a = run_verification_suite(3, ["k_constant", "norm_equivalence", "lemma_g1_bound"], scale=0.05)
    b = run_verification_suite(3, ["k_constant", "norm_equivalence", "lemma_g1_bound"], scale=0.05)
    assert a.to_jsonl() == b.to_jsonl()
    alone = run_verification_suite(3, ["lemma_g1_bound"], scale=0.05)
    assert alone.checks[0].to_json() == a.checks[2].to_json()
    assert len(a.summary_lines()) == 3


def test_identity_nonlinearity_subset():
    # N = 1: ||N(|u|)u|| = ||u||, so the fitted constant is below 1 and the bound trivially holds
    from fracnls import estimates as est
    from fracnls.verification import perturbed_corpus

    rng = np.random.default_rng(0)
    fields = perturbed_corpus(TorusGrid(1, 32), rng, 20, anchors=True)
    spec = builtin("power", gamma=0.0)
    c = est.fit_empirical_constant(spec, fields, 2, 1)
    assert c <= 1


def test_unknown_check():
    with pytest.raises(KeyError):
        run_check("nope", 0)
    assert len(CHECKS) == 12
