from __future__ import annotations

import math

import numpy as np
import pytest

from gapsub import (
    CapExceededError,
    ConfigError,
    DecouplingFailure,
    ErrorSchedule,
    GapSchedule,
    IIDMeasure,
    MarkovMeasure,
    MixtureMeasure,
    ShiftMeasure,
    ValidationError,
    check_trajectory_subadditivity,
    decoupling_defect,
    decoupling_to_theorem_data,
    markov_decoupling_bound,
    minimal_decoupling_constants,
    sample_trajectory,
)

from conftest import WORKED_P, WORKED_PI


# --------------------------------------------------------------- the bound


def test_markov_bound_worked_chain(worked_chain):
    """Worst ratio P(i,j)/pi(j) for the worked chain is 0.8/(1/3) = 2.4."""
    c = markov_decoupling_bound(worked_chain, 0)
    assert abs(c - math.log(2.4)) < 1e-12
    expected = math.log(0.8) - math.log(WORKED_PI[1])
    assert abs(c - expected) < 1e-14


def test_markov_bound_with_gap_uses_the_two_step_kernel(worked_chain):
    c1 = markov_decoupling_bound(worked_chain, 1)
    P2 = np.linalg.matrix_power(np.asarray(WORKED_P), 2)
    expected = float(
        np.max(np.log(P2) - np.log(np.asarray(WORKED_PI))[None, :])
    )
    assert abs(c1 - expected) < 1e-14
    # mixing brings the kernel closer to pi, so the constant shrinks
    assert c1 < markov_decoupling_bound(worked_chain, 0)


def test_markov_bound_iid_rows_is_exactly_zero():
    Q = MarkovMeasure(np.tile([0.25, 0.75], (2, 1)))
    assert markov_decoupling_bound(Q, 0) == 0.0
    assert markov_decoupling_bound(Q, 3) == 0.0


def test_markov_bound_requires_stationary_positive_start():
    Q = MarkovMeasure(WORKED_P, start=[0.5, 0.5])
    with pytest.raises(ValidationError):
        markov_decoupling_bound(Q, 0)
    with pytest.raises(ConfigError):
        markov_decoupling_bound(MarkovMeasure(WORKED_P), -1)


# ---------------------------------------------------------------- the audit


def test_audit_constants_never_exceed_the_bound(worked_chain):
    rep = minimal_decoupling_constants(worked_chain, 4, 4, GapSchedule.zero())
    bound = markov_decoupling_bound(worked_chain, 0)
    assert rep.method == "enumeration"
    assert rep.n_values == (1, 2, 3, 4)
    assert all(c <= bound + 1e-12 for c in rep.constants)
    assert rep.max_constant <= bound + 1e-12
    assert not rep.failed
    # the worst pair must realize its reported defect
    w = rep.worst_pairs[-1]
    d = decoupling_defect(worked_chain, w.a, w.b, 0)
    assert abs(d - w.defect) < 1e-12


def test_audit_matches_per_pair_defects_with_gap(worked_chain):
    """Cross-check the table enumeration against the one-pair routine,
    which sums the gap block out along a different code path."""
    tau = GapSchedule.constant(1)
    rep = minimal_decoupling_constants(worked_chain, 2, 2, tau)
    for n in (1, 2):
        best = -np.inf
        for m in (1, 2):
            for a in worked_chain.alphabet.words(n):
                for b in worked_chain.alphabet.words(m):
                    best = max(best, decoupling_defect(worked_chain, a, b, 1))
        assert abs(rep.constant(n) - best) < 1e-12


def test_iid_product_shortcut_is_exact():
    Q = IIDMeasure([0.3, 0.7])
    rep = minimal_decoupling_constants(Q, 3, 3, GapSchedule.zero())
    assert rep.method == "product-identity"
    assert rep.constants == (0.0, 0.0, 0.0)
    assert rep.worst_pairs == ()
    forced = minimal_decoupling_constants(
        Q, 3, 3, GapSchedule.zero(), product_shortcut=False
    )
    assert forced.method == "enumeration"
    assert max(abs(c) for c in forced.constants) < 1e-12


def test_audit_cap():
    Q = IIDMeasure([0.2, 0.3, 0.5])
    with pytest.raises(CapExceededError):
        minimal_decoupling_constants(
            Q, 8, 8, GapSchedule.zero(), cap=100, product_shortcut=False
        )


def test_audit_report_json(worked_chain):
    rep = minimal_decoupling_constants(worked_chain, 2, 2, GapSchedule.zero())
    js = rep.to_json()
    assert js["n_values"] == [1, 2]
    assert js["failed"] is False
    assert js["method"] == "enumeration"
    assert len(js["worst_pairs"]) == 2


# ----------------------------------------------------------- defect values


def test_defect_of_iid_pair_vanishes():
    Q = IIDMeasure([0.2, 0.8])
    assert abs(decoupling_defect(Q, [0, 1], [1, 1], 0)) < 1e-12
    assert abs(decoupling_defect(Q, [0], [1], 2)) < 1e-12


def test_mixture_diagonal_defect_matches_hand_formula(half_half_mixture):
    # Q(0^n) = (0.9^n + 0.1^n) / 2, so the defect at (0^n, 0^n) with no
    # gap is log Q(0^{2n}) - 2 log Q(0^n), computable directly
    for n in (1, 2, 4):
        q = lambda m: 0.5 * (0.9**m + 0.1**m)
        expected = math.log(q(2 * n)) - 2.0 * math.log(q(n))
        got = decoupling_defect(half_half_mixture, [0] * n, [0] * n, 0)
        assert abs(got - expected) < 1e-12


def test_defect_needs_positive_halves():
    Q = IIDMeasure([1.0, 0.0])
    with pytest.raises(ValidationError):
        decoupling_defect(Q, [1], [0], 0)
    with pytest.raises(ConfigError):
        decoupling_defect(Q, [0], [0], -1)


# ------------------------------------------------- failure detection path


class _BrokenMeasure(ShiftMeasure):
    """Deliberately inconsistent tables: mass at level 2 sits on words
    whose level-1 halves have none.  Only the audit entry points are
    implemented."""

    def __init__(self):
        from gapsub import Alphabet

        self.alphabet = Alphabet(2)

    @property
    def family(self) -> str:
        return "broken"

    @property
    def label(self) -> str:
        return "broken"

    def log_marginal(self, word) -> float:
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    def _sample(self, n, rng):
        raise NotImplementedError

    def log_marginals_level(self, n: int, cap: int = 10**7) -> np.ndarray:
        if n == 1:
            return np.asarray([0.0, -np.inf])
        return np.full(2**n, -n * math.log(2.0))


def test_positivity_failure_is_recorded_and_refused():
    rep = minimal_decoupling_constants(_BrokenMeasure(), 1, 1, GapSchedule.zero())
    assert rep.failed
    assert rep.constants == (np.inf,)
    assert rep.positivity_failures
    pf = rep.positivity_failures[0]
    assert pf.a == (0,) and pf.b == (1,)
    with pytest.raises(DecouplingFailure):
        decoupling_to_theorem_data(rep)


# ------------------------------------------------------------ theorem data


def test_theorem_data_from_report(worked_chain):
    tau = GapSchedule.constant(1)
    rep = minimal_decoupling_constants(worked_chain, 3, 3, tau)
    data = decoupling_to_theorem_data(rep)
    assert data.source == "audit"
    assert data.sigma == tau
    for n in (1, 2, 3):
        assert data.rho.value(n) == max(rep.constant(n), 0.0)


def test_theorem_data_from_scalar():
    data = decoupling_to_theorem_data(0.7, tau=2)
    assert data.source == "bound"
    assert data.rho.value(100) == 0.7
    assert data.sigma.value(100) == 2
    clamped = decoupling_to_theorem_data(-0.3, tau=0)
    assert clamped.rho.value(5) == 0.0
    with pytest.raises(ConfigError):
        decoupling_to_theorem_data(0.5)
    with pytest.raises(DecouplingFailure):
        decoupling_to_theorem_data(float("inf"), tau=0)


# ------------------------------------------------- trajectory inequalities


def test_trajectory_check_passes_with_the_bound(worked_chain):
    c = markov_decoupling_bound(worked_chain, 0)
    x = sample_trajectory(worked_chain, 400, seed=101)
    chk = check_trajectory_subadditivity(
        x, worked_chain, ErrorSchedule.constant(c), GapSchedule.zero()
    )
    assert chk.ok and chk.violation_count == 0
    assert chk.max_excess <= 1e-10


def test_trajectory_check_flags_zero_rho(worked_chain):
    # without the decoupling allowance the split at a sticky transition
    # fails: P(0 -> 0) = 0.9 > pi(0) = 2/3
    x = sample_trajectory(worked_chain, 400, seed=101)
    chk = check_trajectory_subadditivity(
        x, worked_chain, ErrorSchedule.zero(), GapSchedule.zero()
    )
    assert not chk.ok
    assert chk.violation_count > 0
    assert chk.max_excess >= math.log(0.9 / WORKED_PI[0]) - 1e-10
    assert chk.max_excess <= math.log(2.4) + 1e-10
    v = chk.violations[0]
    assert v.excess > chk.tol


def test_trajectory_check_with_gap_schedule(worked_chain):
    c1 = markov_decoupling_bound(worked_chain, 1)
    x = sample_trajectory(worked_chain, 300, seed=103)
    chk = check_trajectory_subadditivity(
        x, worked_chain, ErrorSchedule.constant(c1), GapSchedule.constant(1)
    )
    assert chk.ok


def test_trajectory_check_slow_family_cap(half_half_mixture):
    x = sample_trajectory(half_half_mixture, 650, seed=107)
    with pytest.raises(CapExceededError):
        check_trajectory_subadditivity(
            x, half_half_mixture, ErrorSchedule.constant(math.log(2.0)), GapSchedule.zero()
        )
    # under the cap the generic path runs; log 2 = -log(min weight) is a
    # true decoupling constant for a two-component equal mixture
    chk = check_trajectory_subadditivity(
        x,
        half_half_mixture,
        ErrorSchedule.constant(math.log(2.0)),
        GapSchedule.zero(),
        N=120,
    )
    assert chk.ok


def test_trajectory_check_horizon_validation(worked_chain):
    x = sample_trajectory(worked_chain, 50, seed=109)
    with pytest.raises(ConfigError):
        check_trajectory_subadditivity(
            x, worked_chain, ErrorSchedule.zero(), GapSchedule.zero(), N=51
        )


def test_trajectory_check_json(worked_chain):
    x = sample_trajectory(worked_chain, 100, seed=113)
    chk = check_trajectory_subadditivity(
        x, worked_chain, ErrorSchedule.zero(), GapSchedule.zero()
    )
    js = chk.to_json()
    assert js["horizon"] == 100
    assert js["violation_count"] >= len(js["violations"])
