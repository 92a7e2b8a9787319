"""Monomial coefficients of the orthonormal reference basis, built independently of the compiler."""
import itertools

import numpy as np

from momentdensity.polybasis import enumerate_indices
from momentdensity.refbasis import _legendre_coeffs


def tensor_coefficients(box, order):
    """Column c holds the monomial coefficients of U_c for |c| <= order."""
    basis = enumerate_indices(len(box), order)
    pos = {e: i for i, e in enumerate(basis)}
    coeffs = [_legendre_coeffs(lo, hi, order) for lo, hi in box]
    out = np.zeros((len(basis), len(basis)))
    for col, c in enumerate(basis):
        for exps in itertools.product(*[range(ci + 1) for ci in c]):
            value = 1.0
            for dim, e in enumerate(exps):
                value *= float(coeffs[dim][c[dim]][e])
            out[pos[exps], col] = value
    return out
