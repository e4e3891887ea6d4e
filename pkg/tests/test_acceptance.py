"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import pytest

from hbargeo import acceptance as A

from .conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def ctx():
    return A.Context(seed=0)


@pytest.mark.parametrize("k", sorted(A.CRITERIA))
def test_criterion(k, ctx):
    res = A.run_criterion(k, ctx)
    line = res.line() + f" [{res.seconds:.1f} s]"
    ACCEPTANCE_LINES.append((k, line))
    print(line)
    assert res.passed, line
