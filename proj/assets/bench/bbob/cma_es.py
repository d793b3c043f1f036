import numpy as np


class CMAES:
    """(mu/mu_w, lambda) CMA-ES with rank-one and rank-mu covariance updates."""

    def __init__(self, budget, dim, seed=None):
        self.budget = budget
        self.dim = dim
        self.rng = np.random.default_rng(seed)

    def __call__(self, func):
        n = self.dim
        lb, ub = func.bounds.lb, func.bounds.ub
        lam = 4 + int(3 * np.log(n))
        mu = lam // 2
        w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        w /= w.sum()
        mueff = 1.0 / np.sum(w ** 2)
        cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        cs = (mueff + 2) / (n + mueff + 5)
        c1 = 2 / ((n + 1.3) ** 2 + mueff)
        cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        damps = 1 + 2 * max(0, np.sqrt((mueff - 1) / (n + 1)) - 1) + cs
        chin = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))

        mean = self.rng.uniform(lb, ub)
        sigma = 0.3 * (ub[0] - lb[0])
        C = np.eye(n)
        B = np.eye(n)
        D = np.ones(n)
        pc = np.zeros(n)
        ps = np.zeros(n)
        f_opt, x_opt = np.inf, None
        gen = 0
        while func.state.evaluations < self.budget:
            z = self.rng.standard_normal((lam, n))
            y = z @ (B * D).T
            xs = mean + sigma * y
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
            y_w = w @ y[order]
            mean = mean + sigma * y_w
            inv_sqrt = B @ np.diag(1 / D) @ B.T
            ps = (1 - cs) * ps + np.sqrt(cs * (2 - cs) * mueff) * inv_sqrt @ y_w
            gen += 1
            hsig = np.linalg.norm(ps) / np.sqrt(1 - (1 - cs) ** (2 * gen)) / chin < 1.4 + 2 / (n + 1)
            pc = (1 - cc) * pc + hsig * np.sqrt(cc * (2 - cc) * mueff) * y_w
            rank_mu = (y[order].T * w) @ y[order]
            C = ((1 - c1 - cmu) * C + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * C)
                 + cmu * rank_mu)
            sigma *= np.exp((cs / damps) * (np.linalg.norm(ps) / chin - 1))
            C = np.triu(C) + np.triu(C, 1).T
            eig, B = np.linalg.eigh(C)
            D = np.sqrt(np.maximum(eig, 1e-20))
            if sigma * D.max() < 1e-12 or sigma > 1e6:
                mean = self.rng.uniform(lb, ub)
                sigma = 0.3 * (ub[0] - lb[0])
                C, B, D = np.eye(n), np.eye(n), np.ones(n)
                pc, ps = np.zeros(n), np.zeros(n)
                gen = 0
        return f_opt, x_opt
