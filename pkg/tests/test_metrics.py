import numpy as np
import pytest

from metrics import UndefinedExpectedCountError, table_stats
from evidence import table_stats as reexported


def test_positive_association_table():
    result = table_stats([16, 5, 14, 18])
    assert result['chi2'] == pytest.approx(5.43, abs=0.01)
    assert result['chi2_pvalue'] == pytest.approx(0.0198, abs=0.0005)
    assert result['g2'] == pytest.approx(5.63, abs=0.01)
    assert result['g2_pvalue'] == pytest.approx(0.0176, abs=0.0005)


def test_proportional_table():
    result = table_stats(np.full((2, 2), 10))
    assert result['chi2'] == pytest.approx(0.0)
    assert result['g2'] == pytest.approx(0.0)
    assert result['chi2_pvalue'] == pytest.approx(1.0)


@pytest.mark.parametrize('counts', [(0, 0, 3, 4), (3, 0, 4, 0)])
def test_zero_margin(counts):
    with pytest.raises(UndefinedExpectedCountError):
        table_stats(counts)


def test_negative_cells():
    with pytest.raises(ValueError):
        table_stats([1, -1, 2, 3])


def test_available_from_evidence():
    assert reexported is table_stats
