import numpy as np


class RandomLocalSearch:
    def __init__(self, budget, dim, seed=None):
        self.budget = budget
        self.dim = dim
        self.rng = np.random.default_rng(seed)

    def __call__(self, func):
        x = self.rng.integers(0, 2, self.dim)
        fx = func(x)
        while func.state.evaluations < self.budget and fx < func.optimum.y:
            y = x.copy()
            i = self.rng.integers(self.dim)
            y[i] = 1 - y[i]
            fy = func(y)
            if fy >= fx:
                x, fx = y, fy
        return fx, x
