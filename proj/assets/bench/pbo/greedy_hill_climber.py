import numpy as np


class GreedyHillClimber:
    def __init__(self, budget, dim, seed=None):
        self.budget = budget
        self.dim = dim
        self.rng = np.random.default_rng(seed)

    def __call__(self, func):
        self.mutation_rate = 1.0 / self.dim
        x = self.rng.integers(0, 2, self.dim)
        fx = func(x)
        idx = 0
        while func.state.evaluations < self.budget:
            y = x.copy()
            y[idx] = 1 - y[idx]
            idx = (idx + 1) % self.dim
            fy = func(y)
            if fy > fx:
                x, fx = y, fy
            if fy >= func.optimum.y:
                break
        return fx, x
