import numpy as np


class CholeskyCMAES:
    """CMA-ES variant that adapts a factor A of the covariance (C = A A^T)
    with rank-one updates instead of eigendecompositions."""

    def __init__(self, budget, dim, seed=None):
        self.budget = budget
        self.dim = dim
        self.rng = np.random.default_rng(seed)

    @staticmethod
    def _rank_one(A, alpha, beta, v):
        # A' with A'A'^T = alpha * A A^T + beta * v v^T.
        w = np.linalg.solve(A, v)
        ww = float(w @ w)
        if ww < 1e-300:
            return np.sqrt(alpha) * A
        coef = np.sqrt(alpha) / ww * (np.sqrt(1 + beta / alpha * ww) - 1)
        return np.sqrt(alpha) * A + coef * np.outer(v, w)

    def __call__(self, func):
        n = self.dim
        lb, ub = func.bounds.lb, func.bounds.ub
        lam = 4 + int(3 * np.log(n))
        mu = lam // 2
        w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        w /= w.sum()
        mueff = 1.0 / np.sum(w ** 2)
        cs = (mueff + 2) / (n + mueff + 5)
        cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        c1 = 2 / ((n + 1.3) ** 2 + mueff)
        damps = 1 + 2 * max(0, np.sqrt((mueff - 1) / (n + 1)) - 1) + cs
        chin = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))

        mean = self.rng.uniform(lb, ub)
        sigma = 0.3 * (ub[0] - lb[0])
        A = np.eye(n)
        pc = np.zeros(n)
        ps = np.zeros(n)
        f_opt, x_opt = np.inf, None
        while func.state.evaluations < self.budget:
            z = self.rng.standard_normal((lam, n))
            y = z @ A.T
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
            z_w = w @ z[order]
            y_w = A @ z_w
            mean = mean + sigma * y_w
            ps = (1 - cs) * ps + np.sqrt(cs * (2 - cs) * mueff) * z_w
            pc = (1 - cc) * pc + np.sqrt(cc * (2 - cc) * mueff) * y_w
            A = self._rank_one(A, 1 - c1, c1, pc)
            sigma *= np.exp((cs / damps) * (np.linalg.norm(ps) / chin - 1))
            if sigma < 1e-12 or sigma > 1e6:
                mean = self.rng.uniform(lb, ub)
                sigma = 0.3 * (ub[0] - lb[0])
                A, pc, ps = np.eye(n), np.zeros(n), np.zeros(n)
        return f_opt, x_opt
