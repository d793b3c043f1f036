import numpy as np


class FastGA:
    """(1+1) EA whose mutation strength follows a power law."""

    def __init__(self, budget, dim, seed=None, beta=1.5):
        self.budget = budget
        self.dim = dim
        self.beta = beta
        self.rng = np.random.default_rng(seed)
        upper = max(1, dim // 2)
        weights = np.arange(1, upper + 1, dtype=float) ** -beta
        self.strengths = np.arange(1, upper + 1)
        self.probs = weights / weights.sum()

    def __call__(self, func):
        x = self.rng.integers(0, 2, self.dim)
        fx = func(x)
        while func.state.evaluations < self.budget and fx < func.optimum.y:
            alpha = self.rng.choice(self.strengths, p=self.probs)
            flips = self.rng.random(self.dim) < alpha / self.dim
            if not flips.any():
                flips[self.rng.integers(self.dim)] = True
            y = np.where(flips, 1 - x, x)
            fy = func(y)
            if fy >= fx:
                x, fx = y, fy
        return fx, x
