"""Independent reference computations used by the tests.

None of these share code with the package: they are brute-force or
enumeration methods chosen for being obviously correct rather than fast.
"""

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def golden_min(f, a, b, tol=1e-12, max_iter=400):
    """Golden-section search for a unimodal f on [a, b]."""
    inv = (math.sqrt(5) - 1) / 2
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def scaled_lasso_brute(x, y, lambda0, box=4.0, step=1e-3, levels=3):
    """Minimize ||y - Xb||^2/(2 n s) + s/2 + lambda0 sum_j (||X_j||/sqrt n)|b_j| by search.

    beta: a grid of the given step over [-box, box]^p, then zoomed grids
    (each 100x finer, +-60 cells around the incumbent). sigma: golden-section
    search at the best beta. Works for p <= 2.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n, p = x.shape
    w = np.linalg.norm(x, axis=0) / math.sqrt(n)

    def profile(b):
        # b has shape (m, p); sigma profiled out
        r = y[None, :] - b @ x.T
        return np.linalg.norm(r, axis=1) / math.sqrt(n) + lambda0 * np.abs(b) @ w

    def grid(center, half, h):
        axes = [np.arange(c - half, c + half + h / 2, h) for c in center]
        best_val, best_pt = math.inf, None
        # sweep the first axis in blocks to bound memory
        for start in range(0, axes[0].size, 100):
            block = [axes[0][start:start + 100]] + axes[1:]
            mesh = np.stack(np.meshgrid(*block, indexing="ij"), axis=-1).reshape(-1, p)
            vals = profile(mesh)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_pt = float(vals[i]), mesh[i]
        return best_pt

    best = grid(np.zeros(p), box, step)
    h = step
    for _ in range(levels):
        h /= 100
        best = grid(best, 60 * h, h)

    def full(s):
        r = y - x @ best
        return float(r @ r / (2 * n * s) + s / 2 + lambda0 * w @ np.abs(best))

    rnorm = float(np.linalg.norm(y - x @ best)) / math.sqrt(n)
    s, val = golden_min(full, 1e-9, 4 * max(rnorm, 1e-6) + 1.0)
    return best, s, val


def score_qp_active_set(mat, xi, lam):
    """min u'Su s.t. |(Su - xi)_i| <= lam by enumerating active sign patterns (S SPD)."""
    mat = np.asarray(mat, float)
    xi = np.asarray(xi, float)
    p = xi.size
    best = (math.inf, None)
    for pattern in itertools.product((-1, 0, 1), repeat=p):
        act = [i for i in range(p) if pattern[i] != 0]
        if act:
            sa = mat[act, :]
            kkt = np.block([[2 * mat, sa.T], [sa, np.zeros((len(act), len(act)))]])
            rhs = np.concatenate([np.zeros(p),
                                  xi[act] + lam * np.array([pattern[i] for i in act])])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            u = sol[:p]
        else:
            u = np.zeros(p)
        if np.max(np.abs(mat @ u - xi)) <= lam + 1e-12:
            obj = float(u @ mat @ u)
            if obj < best[0]:
                best = (obj, u)
    return best[1], best[0]


def min_feasible_lambda_primal(mat, xi):
    """min_u ||S u - xi||_inf as a plain LP in (u, t)."""
    p = xi.size
    ones = np.ones((p, 1))
    a_ub = np.block([[mat, -ones], [-mat, -ones]])
    b_ub = np.concatenate([xi, -xi])
    cost = np.zeros(p + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * p + [(0, None)],
                  method="highs")
    return float(res.x[-1])


def chisq_monte_carlo(n, p1, m, rho, c, pairs, seed, chunk=100_000):
    """Mean and standard error of (1 - c delta'delta~)^(-n) - 1 over random spike pairs.

    Each draw builds two 0/rho vectors with m random nonzeros among p1 and
    takes their actual inner product.
    """
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < pairs:
        b = min(chunk, pairs - done)
        keys1 = rng.random((b, p1))
        keys2 = rng.random((b, p1))
        s1 = np.argpartition(keys1, m - 1, axis=1)[:, :m]
        s2 = np.argpartition(keys2, m - 1, axis=1)[:, :m]
        d1 = np.zeros((b, p1))
        d2 = np.zeros((b, p1))
        rows = np.arange(b)[:, None]
        d1[rows, s1] = rho
        d2[rows, s2] = rho
        inner = np.einsum("ij,ij->i", d1, d2)
        vals = (1 - c * inner) ** (-n) - 1
        total += vals.sum()
        total_sq += (vals * vals).sum()
        done += b
    mean = total / pairs
    var = total_sq / pairs - mean * mean
    return mean, math.sqrt(max(var, 0.0) / pairs)


def hypergeom_pmf_exact(p, k):
    """P(J = j) from integer binomials (exact rational arithmetic, then float)."""
    from fractions import Fraction

    denom = math.comb(p, k)
    return [float(Fraction(math.comb(k, j) * math.comb(p - k, k - j), denom))
            for j in range(k + 1)]
