import numpy as np


class CSAES:
    """(mu/mu, lambda) evolution strategy with isotropic mutations and
    cumulative step-size adaptation."""

    def __init__(self, budget, dim, seed=None):
        self.budget = budget
        self.dim = dim
        self.rng = np.random.default_rng(seed)

    def __call__(self, func):
        n = self.dim
        lb, ub = func.bounds.lb, func.bounds.ub
        lam = 4 + int(3 * np.log(n))
        mu = lam // 2
        cs = 1.0 / np.sqrt(n)
        damps = 1.0 + np.sqrt(1.0 / n)
        chin = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))
        mean = self.rng.uniform(lb, ub)
        sigma = 0.3 * (ub[0] - lb[0])
        ps = np.zeros(n)
        f_opt, x_opt = np.inf, None
        while func.state.evaluations < self.budget:
            z = self.rng.standard_normal((lam, n))
            xs = mean + sigma * z
            fs = np.full(lam, np.inf)
            for k in range(lam):
                if func.state.evaluations >= self.budget:
                    break
                fs[k] = func(np.clip(xs[k], lb, ub))
                if fs[k] < f_opt:
                    f_opt, x_opt = fs[k], xs[k].copy()
            if f_opt <= func.optimum.y or not np.isfinite(fs).all():
                break
            # Out-of-box samples are ranked with a quadratic penalty.
            order = np.argsort(fs + np.sum((xs - np.clip(xs, lb, ub)) ** 2, axis=1))[:mu]
            z_mean = z[order].mean(axis=0)
            mean = mean + sigma * z_mean
            ps = (1 - cs) * ps + np.sqrt(cs * (2 - cs) * mu) * z_mean
            sigma *= np.exp(cs / damps * (np.linalg.norm(ps) / chin - 1))
            if sigma < 1e-12 or sigma > 1e6:
                mean = self.rng.uniform(lb, ub)
                sigma = 0.3 * (ub[0] - lb[0])
                ps = np.zeros(n)
        return f_opt, x_opt
