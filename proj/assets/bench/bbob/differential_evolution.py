import numpy as np


class DifferentialEvolution:
    """DE/rand/1/bin with one-to-one survivor selection."""

    def __init__(self, budget, dim, seed=None, pop_size=None, F=0.5, CR=0.9):
        self.budget = budget
        self.dim = dim
        self.pop_size = pop_size or max(10, 5 * dim)
        self.F = F
        self.CR = CR
        self.rng = np.random.default_rng(seed)

    def __call__(self, func):
        n, N = self.dim, self.pop_size
        lb, ub = func.bounds.lb, func.bounds.ub
        pop = self.rng.uniform(lb, ub, (N, n))
        fit = np.full(N, np.inf)
        f_opt, x_opt = np.inf, None
        for i in range(N):
            if func.state.evaluations >= self.budget:
                return f_opt, x_opt
            fit[i] = func(pop[i])
            if fit[i] < f_opt:
                f_opt, x_opt = fit[i], pop[i].copy()
            if f_opt <= func.optimum.y:
                return f_opt, x_opt
        while func.state.evaluations < self.budget:
            for i in range(N):
                if func.state.evaluations >= self.budget:
                    break
                a, b, c = self.rng.choice([j for j in range(N) if j != i], 3, replace=False)
                mutant = np.clip(pop[a] + self.F * (pop[b] - pop[c]), lb, ub)
                cross = self.rng.random(n) < self.CR
                cross[self.rng.integers(n)] = True
                trial = np.where(cross, mutant, pop[i])
                ft = func(trial)
                if ft <= fit[i]:
                    pop[i], fit[i] = trial, ft
                    if ft < f_opt:
                        f_opt, x_opt = ft, trial.copy()
                if f_opt <= func.optimum.y:
                    return f_opt, x_opt
        return f_opt, x_opt
