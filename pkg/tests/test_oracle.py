"""Tests for keyleak.oracle"""
from fractions import Fraction

import pytest

import keyleak.bounds
from keyleak.constructions import kpa_counterexample, mixture_feasibility, spiked_distribution
from keyleak.distributions import KeyDistribution, stat_distance
from keyleak.exceptions import BudgetExceededError, ParameterRangeError
from keyleak.models import BoundResult
from keyleak.oracle import (
    MAX_STORED_VIOLATIONS,
    SWEEPS,
    exhaustive_kpa,
    exhaustive_subset_success,
    lhl_empirical,
    mac_attack_search,
    monotonicity_check,
    optimal_distinguisher,
    run_sweep,
    verify_suite,
)
from keyleak.primitives import MacFamily, ToeplitzMatrix


# =============================================================================
# ENUMERATION
# =============================================================================

def test_uniform_subset_success():
    sweep = exhaustive_subset_success(KeyDistribution.uniform(4))
    assert sweep.complete
    assert sweep.subsets_checked == 15
    assert all(value == Fraction(1, 1 << len(subset)) for subset, value in sweep.success.items())


def test_subset_sweep_stops_at_budget():
    sweep = exhaustive_subset_success(KeyDistribution.uniform(4), budget=5)
    assert not sweep.complete
    assert sweep.subsets_checked == 5


def test_subset_sweep_size_limit():
    with pytest.raises(ParameterRangeError):
        exhaustive_subset_success(KeyDistribution.uniform(13))


def test_kpa_average_is_tight_but_individual_is_total():
    P = kpa_counterexample(6, 3)
    report = exhaustive_kpa(P, [0, 1, 2])
    delta = Fraction(1, 8) - Fraction(1, 64)
    assert report.weighted_average == Fraction(1, 8) + delta
    assert report.worst == 1
    assert report.worst_k1 == 0
    assert report.per_k1[1] == Fraction(1, 8)
    assert report.prefix_probability[0] == Fraction(1, 8)


@pytest.mark.parametrize("n,m", [(6, 3), (8, 4), (10, 5)])
def test_known_prefix_counterexample_at_every_size(n, m):
    P = kpa_counterexample(n, m)
    delta = stat_distance(P, KeyDistribution.uniform(n))
    report = exhaustive_kpa(P, list(range(m)))
    bound = keyleak.bounds.kpa_average_bound(n - m, delta)
    assert report.worst == 1
    assert report.weighted_average == bound.exact
    assert float(report.weighted_average) <= bound.value
    assert not mixture_feasibility(P, delta).feasible


def test_kpa_needs_unknown_bits():
    with pytest.raises(ParameterRangeError):
        exhaustive_kpa(KeyDistribution.uniform(3), [0, 1, 2])


# =============================================================================
# PRIVACY AMPLIFICATION
# =============================================================================

def test_hashing_uniform_key_within_bound():
    report = lhl_empirical(KeyDistribution.uniform(6, exact=False), 3)
    assert report.enumerated
    assert report.family_size == 256
    assert report.bound == pytest.approx(2.0 ** -1.5)
    assert report.within_bound


def test_hashing_spiked_key_within_bound():
    report = lhl_empirical(spiked_distribution(8, 5, exact=False), 2)
    assert report.within_bound
    assert not report.vacuous


def test_sampled_family_is_reproducible():
    P = spiked_distribution(8, 3, exact=False)
    first = lhl_empirical(P, 2, family="sample", samples=64, seed=9)
    second = lhl_empirical(P, 2, family="sample", samples=64, seed=9)
    assert first == second
    assert first.seed == 9


@pytest.mark.parametrize("output_bits", [2, 4, 6])
def test_full_family_hashing_of_eight_bit_key(output_bits):
    report = lhl_empirical(KeyDistribution.uniform(8, exact=False), output_bits, family="full")
    assert report.enumerated
    assert report.family_size == 1 << (output_bits + 7)
    assert report.bound == pytest.approx(2.0 ** (-(8 - output_bits) / 2))
    assert report.average_distance <= report.bound
    assert report.within_bound


def test_full_family_budget():
    with pytest.raises(BudgetExceededError):
        lhl_empirical(KeyDistribution.uniform(12, exact=False), 10)


# =============================================================================
# DISTINGUISHER AND MONOTONICITY
# =============================================================================

def test_distinguisher_formula_matches_bayes():
    result = optimal_distinguisher(kpa_counterexample(2, 1), KeyDistribution.uniform(2), Fraction(1, 2))
    assert result.formula_value == Fraction(5, 8)
    assert result.bayes_value == Fraction(5, 8)
    assert result.agree


def test_distinguisher_float(random_distribution):
    result = optimal_distinguisher(random_distribution(4), random_distribution(4), 0.3)
    assert result.agree


def test_uniform_key_through_pipeline():
    T = ToeplitzMatrix.from_int(4, 8, 0b10000000111)
    assert T.full_rank
    report = monotonicity_check(KeyDistribution.uniform(8), T)
    assert report.triple == (Fraction(1, 256), Fraction(1, 256), Fraction(1, 16))
    assert report.monotone


def test_pipeline_with_syndrome_is_monotone(rng):
    P = spiked_distribution(8, 4)
    report = monotonicity_check(P, ToeplitzMatrix.random(3, 8, rng), rng.integers(0, 2, size=(2, 8)))
    assert not report.ecc_identity
    assert report.monotone


# =============================================================================
# MAC ATTACKS
# =============================================================================

def test_uniform_mac_key_meets_epsilon():
    family = MacFamily(3, 1)
    report = mac_attack_search(family, KeyDistribution.uniform(6))
    assert report.epsilon == pytest.approx(1 / 8)
    assert report.key_delta == pytest.approx(0.0)
    assert report.average_success == pytest.approx(1 / 8)
    assert report.worst_tag_success == pytest.approx(1 / 8)
    assert report.impersonation_success == pytest.approx(1 / 8)


def test_known_mac_key_is_forgeable():
    family = MacFamily(3, 1)
    report = mac_attack_search(family, KeyDistribution.point_mass(6, 5))
    assert report.average_success == pytest.approx(1.0)
    assert report.worst_tag_success == pytest.approx(1.0)
    assert report.within_average_cap and report.within_worst_tag_cap


def test_mac_key_size_mismatch():
    with pytest.raises(ParameterRangeError):
        mac_attack_search(MacFamily(3, 1), KeyDistribution.uniform(5))


# =============================================================================
# SWEEPS
# =============================================================================

SOUNDNESS = [name for name, spec in SWEEPS.items() if spec.kind == "soundness"]
REFUTATION = [name for name, spec in SWEEPS.items() if spec.kind == "refutation"]


@pytest.mark.parametrize("name", SOUNDNESS)
def test_soundness_sweeps_find_no_violation(name):
    report = run_sweep(name, instances=12, seed=1, bits=4)
    assert report.instances_checked > 0
    assert report.violation_count == 0
    assert not report.failed


@pytest.mark.parametrize("name", REFUTATION)
def test_flagged_formulas_are_refuted(name):
    report = run_sweep(name, instances=40, seed=1, bits=5)
    assert report.flagged
    assert report.refuted
    assert not report.failed


@pytest.mark.parametrize("name,bits", [("fano", 10), ("monotonicity", 10), ("pinsker", 6)])
def test_thousand_instance_soundness(name, bits):
    report = run_sweep(name, instances=1000, seed=0, bits=bits)
    assert report.instances_checked > 0
    assert report.violation_count == 0
    assert report.complete


def test_subset_budget_marks_sweep_incomplete():
    full = run_sweep("subset_leak", instances=3, seed=0, bits=3)
    assert full.complete
    assert full.instances_checked == 3 * 7
    capped = run_sweep("subset_leak", instances=3, seed=0, bits=3, subset_budget=3)
    assert not capped.complete
    assert capped.instances_checked == 3 * 3
    assert not capped.failed
    reports = verify_suite(["subset_leak"], instances=3, seed=0, bits=3, subset_budget=3)
    assert not reports[0].complete


def test_broken_bound_is_caught(monkeypatch):
    def broken(subset_len, delta):
        return BoundResult(formula="subset_leak", value=0.0)

    monkeypatch.setattr(keyleak.bounds, "subset_leak_bound", broken)
    report = run_sweep("subset_leak", instances=5, seed=0, bits=4)
    assert report.failed
    assert report.violation_count > MAX_STORED_VIOLATIONS
    assert len(report.violations) == MAX_STORED_VIOLATIONS


def test_sweep_ignores_worker_count():
    inline = run_sweep("triangle", instances=16, seed=5, bits=4, workers=1)
    pooled = run_sweep("triangle", instances=16, seed=5, bits=4, workers=2)
    assert inline == pooled


def test_sweep_depends_on_seed():
    first = run_sweep("triangle", instances=8, seed=1, bits=4)
    second = run_sweep("triangle", instances=8, seed=2, bits=4)
    assert first.min_slack != second.min_slack


def test_sweep_argument_checks():
    with pytest.raises(ParameterRangeError):
        run_sweep("nonsense")
    with pytest.raises(ParameterRangeError):
        run_sweep("triangle", bits=13)


def test_suite_keeps_requested_order():
    reports = verify_suite(["markov", "triangle"], instances=5, seed=0, bits=3)
    assert [r.bound_name for r in reports] == ["markov", "triangle"]
