import numpy as np


class OnePlusOneEA:
    def __init__(self, budget, dim, seed=None):
        self.budget = budget
        self.dim = dim
        self.rng = np.random.default_rng(seed)

    def __call__(self, func):
        rate = 1.0 / self.dim
        x = self.rng.integers(0, 2, self.dim)
        fx = func(x)
        while func.state.evaluations < self.budget and fx < func.optimum.y:
            flips = self.rng.random(self.dim) < rate
            if not flips.any():
                flips[self.rng.integers(self.dim)] = True
            y = np.where(flips, 1 - x, x)
            fy = func(y)
            if fy >= fx:
                x, fx = y, fy
        return fx, x
