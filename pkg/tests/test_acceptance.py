"""Acceptance criteria 1-13, one test each; every test reports a PASS/FAIL line."""

import pytest

from gaussimag.validation import CRITERIA, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, report_line):
    result = run_criterion(number)
    print(result.line())
    report_line(result.line())
    assert result.passed, result.detail
    assert result.within_budget, f"took {result.seconds:.1f}s, budget {result.budget:g}s"
