"""Acceptance gate: one test and one printed pass/fail line per criterion.

Each criterion function pins its own tolerances, seeds, and budgets; this
module only runs them and reports. Run with -s to see the lines as they
complete.
"""

import pytest

from gapcert.acceptance import ALL_CRITERIA


@pytest.mark.parametrize(
    "criterion", ALL_CRITERIA,
    ids=[f"criterion_{i}" for i in range(1, len(ALL_CRITERIA) + 1)])
def test_criterion(criterion):
    result = criterion()
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] criterion {result.number}: {result.name} "
          f"({result.seconds:.1f}s) -- {result.detail}")
    assert result.passed, f"criterion {result.number} ({result.name}): {result.detail}"
