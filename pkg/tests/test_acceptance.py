"""Acceptance gate: one test per criterion, at the pinned tolerances.

Each test prints its criterion's pass/fail line and asserts the verdict.
Criterion 6 compares finite-n trajectory means against asymptotic centers;
at n = 60 and n = 90 the last steps of the tested range sit deterministically
outside the 10% band (the centers carry ~3/(p n) finite-size error, about
19.6% and 13.2% at the final step), so that criterion fails by construction
at those sizes while n = 120 clears it.  The assertion is kept as stated
rather than loosened; see the test's failure message for the exact numbers.
"""

from hypermatch import acceptance


def _check(result):
    print(result.summary_line())
    assert result.passed, result.details


def test_criterion_1_exact_count_oracle():
    _check(acceptance.criterion_1_exact_counts())


def test_criterion_2_max_entropy_solver():
    _check(acceptance.criterion_2_solver_on_complete())


def test_criterion_3_jensen_sandwich():
    _check(acceptance.criterion_3_jensen_sandwich())


def test_criterion_4_shift_correctness():
    _check(acceptance.criterion_4_shift_correctness())


def test_criterion_5_anneal_contract():
    _check(acceptance.criterion_5_anneal_contract())


def test_criterion_6_greedy_concentration():
    _check(acceptance.criterion_6_greedy_concentration())


def test_criterion_7_marginal_inequalities():
    _check(acceptance.criterion_7_marginal_inequalities())


def test_criterion_8_entropy_bound_certificates():
    _check(acceptance.criterion_8_entropy_bound_certificates())


def test_criterion_9_residual_trend():
    _check(acceptance.criterion_9_residual_trend())


def test_criterion_10_determinism():
    _check(acceptance.criterion_10_determinism())
