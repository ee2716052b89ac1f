import numpy as np
from scipy.stats import chi2_contingency


class UndefinedExpectedCountError(ValueError):
    pass


def table_stats(counts):
    '''
    Pearson and likelihood-ratio tests of independence for a 2x2 table.
    @param counts: the four cells (x11, x12, x21, x22) or a 2x2 array
    @return: dict with chi2, chi2_pvalue, g2 and g2_pvalue (chi-squared tail with one degree of freedom)
    '''
    table = np.asarray(counts, dtype=float).reshape(2, 2)
    if np.any(table < 0):
        raise ValueError('cell counts must be non-negative, got {}'.format(table.ravel()))
    if np.any(table.sum(axis=0) == 0) or np.any(table.sum(axis=1) == 0):
        raise UndefinedExpectedCountError('a zero margin leaves expected counts undefined')

    chi2, chi2_pvalue, _, _ = chi2_contingency(table, correction=False)
    g2, g2_pvalue, _, _ = chi2_contingency(table, correction=False, lambda_='log-likelihood')

    return {
        'chi2': float(chi2),
        'chi2_pvalue': float(chi2_pvalue),
        'g2': float(g2),
        'g2_pvalue': float(g2_pvalue),
    }
