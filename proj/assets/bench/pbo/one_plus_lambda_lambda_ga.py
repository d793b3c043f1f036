import numpy as np


class OnePlusLambdaLambdaGA:
    """Self-adjusting (1+(lambda,lambda)) genetic algorithm."""

    def __init__(self, budget, dim, seed=None):
        self.budget = budget
        self.dim = dim
        self.rng = np.random.default_rng(seed)

    def _left(self, func):
        return self.budget - func.state.evaluations

    def __call__(self, func):
        n = self.dim
        lam = 1.0
        x = self.rng.integers(0, 2, n)
        fx = func(x)
        while self._left(func) > 0 and fx < func.optimum.y:
            k = max(1, int(round(lam)))
            p = min(lam / n, 1.0)
            c = 1.0 / lam
            ell = self.rng.binomial(n, p)
            if ell == 0:
                ell = 1
            best_m, best_fm = None, -np.inf
            for _ in range(k):
                if self._left(func) <= 0:
                    return fx, x
                m = x.copy()
                idx = self.rng.choice(n, ell, replace=False)
                m[idx] = 1 - m[idx]
                fm = func(m)
                if fm > best_fm:
                    best_m, best_fm = m, fm
            best_y, best_fy = x, fx
            for _ in range(k):
                if self._left(func) <= 0:
                    break
                take = self.rng.random(n) < c
                y = np.where(take, best_m, x)
                if np.array_equal(y, x):
                    continue
                fy = func(y)
                if fy > best_fy:
                    best_y, best_fy = y, fy
            if best_fy > fx:
                lam = max(lam / 1.5, 1.0)
            else:
                lam = min(lam * 1.5 ** 0.25, float(n))
            if best_fy >= fx:
                x, fx = best_y, best_fy
        return fx, x
