import numpy as np


class ParticleSwarm:
    """Global-best particle swarm with inertia weight and velocity clamping."""

    def __init__(self, budget, dim, seed=None, swarm_size=30, w=0.7298, c1=1.49618, c2=1.49618):
        self.budget = budget
        self.dim = dim
        self.swarm_size = swarm_size
        self.w, self.c1, self.c2 = w, c1, c2
        self.rng = np.random.default_rng(seed)

    def __call__(self, func):
        n, S = self.dim, self.swarm_size
        lb, ub = func.bounds.lb, func.bounds.ub
        vmax = 0.2 * (ub - lb)
        x = self.rng.uniform(lb, ub, (S, n))
        v = self.rng.uniform(-vmax, vmax, (S, n))
        pbest = x.copy()
        pfit = np.full(S, np.inf)
        f_opt, x_opt = np.inf, None
        while func.state.evaluations < self.budget:
            for i in range(S):
                if func.state.evaluations >= self.budget:
                    break
                f = func(x[i])
                if f < pfit[i]:
                    pfit[i], pbest[i] = f, x[i].copy()
                if f < f_opt:
                    f_opt, x_opt = f, x[i].copy()
                if f_opt <= func.optimum.y:
                    return f_opt, x_opt
            g = pbest[np.argmin(pfit)]
            r1 = self.rng.random((S, n))
            r2 = self.rng.random((S, n))
            v = self.w * v + self.c1 * r1 * (pbest - x) + self.c2 * r2 * (g - x)
            v = np.clip(v, -vmax, vmax)
            x = np.clip(x + v, lb, ub)
        return f_opt, x_opt
