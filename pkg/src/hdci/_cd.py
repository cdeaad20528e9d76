"""Coordinate-descent kernel shared by the Lasso fits and the score QP dual."""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def cd_gram(gram, c, pen, beta, grad, tol, max_sweeps):
    """Minimize 0.5 b'Gb - c'b + sum_j pen_j |b_j| in place.

    ``grad`` must hold ``c - G beta`` on entry and is kept in sync. Stops when
    the largest scaled update |delta_j| * sqrt(G_jj) of a full sweep is at most
    ``tol``. Returns the number of sweeps run, or -1 if ``max_sweeps`` ran out.
    """
    p = beta.shape[0]
    for sweep in range(max_sweeps):
        biggest = 0.0
        for j in range(p):
            gjj = gram[j, j]
            if gjj <= 0.0:
                continue
            old = beta[j]
            z = grad[j] + gjj * old
            if z > pen[j]:
                new = (z - pen[j]) / gjj
            elif z < -pen[j]:
                new = (z + pen[j]) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                for i in range(p):
                    grad[i] -= gram[i, j] * delta
                step = abs(delta) * np.sqrt(gjj)
                if step > biggest:
                    biggest = step
        if biggest <= tol:
            return sweep + 1
    return -1
