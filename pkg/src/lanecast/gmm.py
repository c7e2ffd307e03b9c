"""Gaussian mixture fitting with automatic component-count selection.

The default fitting mode realizes the variational treatment as EM with a
Dirichlet weight prior (coordinate-ascent updates on a Dirichlet /
Normal-Wishart posterior).  The number of retained components adjusts
itself in two ways: components whose posterior weight falls below
``1e-3 / k_max`` are pruned outright, and after convergence the weakest
component is tentatively annihilated and the fit re-converged for as
long as the variational lower bound improves.  On data that a single
Gaussian explains, this collapses the mixture all the way to one
component; on genuinely multimodal data the first refused annihilation
ends the search.

The recorded objective (per-sample lower bound, or the plain
log-likelihood in ``mode="em"``) is non-decreasing within every stage of
constant component count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import digamma, gammaln, logsumexp

LOG_2PI = np.log(2.0 * np.pi)


class GmmFitError(Exception):
    pass


@dataclass
class GmmModel:
    """Weighted full-covariance Gaussian mixture over named dimensions."""

    dims: list[str]
    weights: np.ndarray
    means: np.ndarray          # (K, d)
    covariances: np.ndarray    # (K, d, d)
    fit_info: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def k_eff(self) -> int:
        return len(self.weights)

    @property
    def n_dims(self) -> int:
        return len(self.dims)

    def validate(self) -> None:
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1 within 1e-12")
        if np.any(self.weights < 0):
            raise ValueError("mixture weights must be non-negative")
        for k in range(self.k_eff):
            try:
                np.linalg.cholesky(self.covariances[k])
            except np.linalg.LinAlgError:
                raise ValueError(f"covariance of component {k} not positive definite")

    def component_logpdfs(self, points: np.ndarray) -> np.ndarray:
        """(N, K) per-component Gaussian log densities."""
        pts = np.atleast_2d(points)
        if pts.shape[1] != self.n_dims:
            raise ValueError(
                f"point dimension {pts.shape[1]} does not match model dims {self.n_dims}")
        out = np.empty((len(pts), self.k_eff))
        for k in range(self.k_eff):
            L = np.linalg.cholesky(self.covariances[k])
            sol = solve_triangular(L, (pts - self.means[k]).T, lower=True)
            maha = np.sum(sol ** 2, axis=0)
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            out[:, k] = -0.5 * (self.n_dims * LOG_2PI + logdet + maha)
        return out

    def logpdf(self, points: np.ndarray) -> np.ndarray | float:
        """Mixture log density via log-sum-exp; scalar for one point."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        comp = self.component_logpdfs(pts)
        vals = logsumexp(comp + np.log(self.weights)[None, :], axis=1)
        return float(vals[0]) if single else vals

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GmmModel":
        return cls(
            dims=list(data["dims"]),
            weights=np.asarray(data["weights"], dtype=float),
            means=np.asarray(data["means"], dtype=float),
            covariances=np.asarray(data["covariances"], dtype=float),
        )


def _sq_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((X ** 2).sum(1)[:, None] - 2.0 * X @ centers.T + (centers ** 2).sum(1)[None])
    return np.maximum(d2, 0.0)


def _kmeans_responsibilities(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Hard assignments from k-means++ seeding plus a few Lloyd sweeps."""
    n = len(X)
    centers = X[rng.integers(n)][None, :].copy()
    for _ in range(k - 1):
        d2 = _sq_distances(X, centers).min(axis=1)
        total = d2.sum()
        if total <= 0:
            centers = np.vstack([centers, X[rng.integers(n)]])
        else:
            centers = np.vstack([centers, X[rng.choice(n, p=d2 / total)]])
    assign = None
    for _ in range(6):
        assign = np.argmin(_sq_distances(X, centers), axis=1)
        for j in range(k):
            mask = assign == j
            if mask.any():
                centers[j] = X[mask].mean(axis=0)
    r = np.zeros((n, k))
    r[np.arange(n), assign] = 1.0
    return r


def _first_singular(matrices: np.ndarray) -> int:
    for j in range(len(matrices)):
        try:
            np.linalg.cholesky(matrices[j])
        except np.linalg.LinAlgError:
            return j
    return -1


def _log_dirichlet_norm(alpha: np.ndarray) -> float:
    return float(gammaln(alpha.sum()) - gammaln(alpha).sum())


def _log_mvgamma(a: float, d: int) -> float:
    i = np.arange(1, d + 1)
    return float(d * (d - 1) / 4.0 * np.log(np.pi) + gammaln(a + (1 - i) / 2.0).sum())


def _log_mvgamma_vec(a: np.ndarray, d: int) -> np.ndarray:
    i = np.arange(1, d + 1)
    return d * (d - 1) / 4.0 * np.log(np.pi) + gammaln(a[:, None] + (1 - i)[None] / 2.0).sum(axis=1)


def _log_wishart_b(w_inv_logdet: float, nu: float, d: int) -> float:
    return 0.5 * nu * w_inv_logdet - 0.5 * nu * d * np.log(2.0) - _log_mvgamma(nu / 2.0, d)


class _VariationalState:
    """Dirichlet / Normal-Wishart posterior of one fitting stage."""

    def __init__(self, X, k, alpha0, beta0, m0, nu0, w0_inv, reg):
        self.X = X
        n, d = X.shape
        # x x^T rows as flat sufficient statistics; turns every
        # responsibility-weighted scatter into one matrix product
        self.XX = (X[:, :, None] * X[:, None, :]).reshape(n, d * d)
        self.k = k
        self.alpha0, self.beta0, self.m0, self.nu0 = alpha0, beta0, m0, nu0
        self.w0_inv = w0_inv
        self.w0_inv_logdet = float(np.linalg.slogdet(w0_inv)[1])
        self.reg = reg
        self.resp = None

    def m_step(self):
        X, r = self.X, self.resp
        n, d = X.shape
        nk = r.sum(axis=0) + 10.0 * np.finfo(float).tiny
        xbar = (r.T @ X) / nk[:, None]
        self.alpha = self.alpha0 + nk
        self.beta = self.beta0 + nk
        self.m = (self.beta0 * self.m0[None] + nk[:, None] * xbar) / self.beta[:, None]
        self.nu = self.nu0 + nk
        raw = (r.T @ self.XX).reshape(self.k, d, d)
        scatter = raw - nk[:, None, None] * (xbar[:, :, None] * xbar[:, None, :])
        scatter = 0.5 * (scatter + scatter.transpose(0, 2, 1))
        dm = xbar - self.m0[None]
        shrink = (self.beta0 * nk / self.beta)[:, None, None]
        self.w_inv = (self.w0_inv[None] + scatter
                      + shrink * (dm[:, :, None] * dm[:, None, :])
                      + (self.reg * self.nu)[:, None, None] * np.eye(d)[None])

    def e_step(self) -> float:
        """Update responsibilities; return the per-sample lower bound."""
        X = self.X
        n, d = X.shape
        ln_pi = digamma(self.alpha) - digamma(self.alpha.sum())
        try:
            chols = np.linalg.cholesky(self.w_inv)
        except np.linalg.LinAlgError:
            bad = _first_singular(self.w_inv)
            raise GmmFitError(f"singular covariance in component {bad} after regularization")
        self._chols = chols
        w_inv_ld = 2.0 * np.log(chols[:, np.arange(d), np.arange(d)]).sum(axis=1)
        self._w_inv_logdets = w_inv_ld
        self._ln_det_lambda = (
            digamma((self.nu[:, None] - np.arange(d)[None]) / 2.0).sum(axis=1)
            + d * np.log(2.0) - w_inv_ld)
        # mahalanobis terms expanded over the x x^T statistics: one
        # matrix product across all components instead of K solves
        scale_inv = np.linalg.inv(self.w_inv)
        scale_inv = 0.5 * (scale_inv + scale_inv.transpose(0, 2, 1))
        self._scale_inv = scale_inv
        wm = np.einsum("kde,ke->kd", scale_inv, self.m)
        maha = (self.XX @ scale_inv.reshape(self.k, d * d).T
                - 2.0 * (X @ wm.T)
                + np.einsum("kd,kd->k", wm, self.m)[None])
        quad = self.nu[None] * maha + d / self.beta[None]
        log_rho = (ln_pi[None] + 0.5 * self._ln_det_lambda[None]
                   - 0.5 * d * LOG_2PI - 0.5 * quad)
        peak = log_rho.max(axis=1)
        np.subtract(log_rho, peak[:, None], out=log_rho)
        np.exp(log_rho, out=log_rho)
        total = log_rho.sum(axis=1)
        log_norm = np.log(total) + peak
        self.resp = log_rho / total[:, None]
        return (log_norm.sum() - self._kl_terms()) / n

    def _kl_terms(self) -> float:
        d = self.X.shape[1]
        kl = (_log_dirichlet_norm(self.alpha)
              - _log_dirichlet_norm(np.full(self.k, self.alpha0))
              + float(((self.alpha - self.alpha0)
                       * (digamma(self.alpha) - digamma(self.alpha.sum()))).sum()))
        dm = self.m - self.m0[None]
        quad_m = self.nu * np.einsum("kd,kde,ke->k", dm, self._scale_inv, dm)
        kl += float(np.sum(0.5 * (self.beta0 / self.beta * d + self.beta0 * quad_m
                                  - d + d * np.log(self.beta / self.beta0))))
        w_inv_ld = self._w_inv_logdets
        tr_term = self.nu * np.einsum("kde,de->k", self._scale_inv, self.w0_inv)
        ln_b1 = (0.5 * self.nu * w_inv_ld - 0.5 * self.nu * d * np.log(2.0)
                 - _log_mvgamma_vec(self.nu / 2.0, d))
        ln_b0 = _log_wishart_b(self.w0_inv_logdet, self.nu0, d)
        kl += float(np.sum(ln_b1 - ln_b0
                           + (self.nu - self.nu0) / 2.0 * self._ln_det_lambda
                           - self.nu * d / 2.0 + 0.5 * tr_term))
        return kl

    def converge(self, max_iter: int, tol: float) -> list[float]:
        history = []
        stall = 0
        for _ in range(max_iter):
            self.m_step()
            history.append(self.e_step())
            if len(history) > 1:
                if history[-1] - history[-2] < tol:
                    stall += 1
                    if stall >= 3:
                        break
                else:
                    stall = 0
        return history

    def drop(self, indices: list[int]):
        keep = [j for j in range(self.k) if j not in set(indices)]
        self.k = len(keep)
        r = self.resp[:, keep]
        norm = r.sum(axis=1, keepdims=True)
        dead = norm[:, 0] <= 0
        if dead.any():
            r[dead] = 1.0 / self.k
            norm[dead] = 1.0
        self.resp = r / norm

    def extract(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        weights = self.alpha / self.alpha.sum()
        covs = self.w_inv / self.nu[:, None, None]
        return weights, self.m.copy(), covs

    def snapshot(self) -> dict:
        return {"k": self.k, "resp": self.resp.copy()}

    def restore(self, snap: dict):
        self.k = snap["k"]
        self.resp = snap["resp"].copy()
        self.m_step()
        self.e_step()


def _fit_variational(X, k_max, seed, reg, max_iter, tol, prune_weight):
    n, d = X.shape
    rng = np.random.default_rng(seed)
    k = min(k_max, n)
    alpha0 = 1.0 / k_max
    beta0 = 1.0
    m0 = X.mean(axis=0)
    nu0 = float(d)
    cov = np.cov(X.T).reshape(d, d) if n > 1 else np.eye(d)
    w0_inv = cov * nu0 + reg * np.eye(d)

    state = _VariationalState(X, k, alpha0, beta0, m0, nu0, w0_inv, reg)
    state.resp = _kmeans_responsibilities(X, k, rng)
    stages = [state.converge(max_iter, tol)]
    best = {"elbo": stages[-1][-1], "params": state.extract(), "k": state.k}

    while state.k > 1:
        weights = state.alpha / state.alpha.sum()
        below = [j for j in range(state.k) if weights[j] < prune_weight]
        if below and len(below) < state.k:
            state.drop(below)
            stages.append(state.converge(max_iter, tol))
            if stages[-1][-1] >= best["elbo"]:
                best = {"elbo": stages[-1][-1], "params": state.extract(), "k": state.k}
            continue
        # annihilate the weakest components while the bound improves;
        # wide steps first so rich mixtures settle in few stages
        snap = state.snapshot()
        prev_elbo = stages[-1][-1]
        step = max(1, state.k // 8)
        accepted = False
        while step >= 1:
            order = np.argsort(weights)[:step]
            state.drop(list(order))
            trial = state.converge(max_iter, tol)
            if trial[-1] >= prev_elbo:
                stages.append(trial)
                best = {"elbo": trial[-1], "params": state.extract(), "k": state.k}
                accepted = True
                break
            state.restore(snap)
            step //= 2
        if not accepted:
            break

    weights, means, covs = best["params"]
    return weights, means, covs, stages, best["elbo"]


def _fit_em(X, k_max, seed, reg, max_iter, tol):
    n, d = X.shape
    rng = np.random.default_rng(seed)
    k = min(k_max, n)
    resp = _kmeans_responsibilities(X, k, rng)
    weights = np.full(k, 1.0 / k)
    means = np.zeros((k, d))
    covs = np.tile(np.eye(d), (k, 1, 1))
    history = []
    stall = 0
    eye = np.eye(d)
    for _ in range(max_iter):
        nk = resp.sum(axis=0) + 10.0 * np.finfo(float).tiny
        weights = nk / nk.sum()
        means = (resp.T @ X) / nk[:, None]
        for j in range(k):
            diff = X - means[j]
            covs[j] = (resp[:, j][:, None] * diff).T @ diff / nk[j] + reg * eye
        log_comp = np.empty((n, k))
        for j in range(k):
            try:
                L = np.linalg.cholesky(covs[j])
            except np.linalg.LinAlgError:
                raise GmmFitError(f"singular covariance in component {j} after regularization")
            sol = solve_triangular(L, (X - means[j]).T, lower=True)
            log_comp[:, j] = -0.5 * (d * LOG_2PI + 2 * np.log(np.diag(L)).sum()
                                     + np.sum(sol ** 2, axis=0))
        log_norm = logsumexp(log_comp + np.log(weights)[None], axis=1)
        resp = np.exp(log_comp + np.log(weights)[None] - log_norm[:, None])
        history.append(log_norm.mean())
        if len(history) > 1:
            if history[-1] - history[-2] < tol:
                stall += 1
                if stall >= 3:
                    break
            else:
                stall = 0
    return weights, means, covs, [history]


def fit_gmm(rows: np.ndarray, dims: list[str], k_max: int = 50,
            mode: str = "variational", seed: int = 0, reg: float = 1e-6,
            max_iter: int = 500, tol: float = 1e-6, n_init: int = 3,
            threads: int = 1) -> GmmModel:
    """Fit a full-covariance mixture; best of ``n_init`` seeded restarts.

    ``mode="variational"`` adds the Dirichlet weight prior and the
    component-count search; ``mode="em"`` is plain maximum likelihood at
    fixed K.  In both modes components with weight below
    ``1e-3 / k_max`` are pruned from the returned model and the
    covariance regularizer ``reg * I`` enters every iteration.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) == 0:
        raise GmmFitError("cannot fit a mixture to an empty data set")
    if not np.isfinite(X).all():
        raise GmmFitError("mixture training data must be finite")
    if X.shape[1] != len(dims):
        raise ValueError("dims must name every column of rows")
    if mode not in ("variational", "em"):
        raise ValueError(f"unknown fitting mode {mode!r}")

    prune_weight = 1e-3 / k_max

    def run_restart(restart: int):
        sub_seed = np.random.default_rng((seed, 4001, restart)).integers(2 ** 63)
        if mode == "variational":
            weights, means, covs, stages, _ = _fit_variational(
                X, k_max, sub_seed, reg, max_iter, tol, prune_weight)
        else:
            weights, means, covs, stages = _fit_em(X, k_max, sub_seed, reg, max_iter, tol)
        keep = weights >= prune_weight
        if not keep.any():
            keep = weights == weights.max()
        weights, means, covs = weights[keep], means[keep], covs[keep]
        weights = weights / weights.sum()
        model = GmmModel(dims=list(dims), weights=weights, means=means,
                         covariances=covs,
                         fit_info={"mode": mode, "objective_stages": stages,
                                   "restart": restart})
        loglik = float(np.mean(model.logpdf(X)))
        return loglik, restart, model

    if threads > 1 and n_init > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            candidates = list(pool.map(run_restart, range(n_init)))
    else:
        candidates = [run_restart(r) for r in range(n_init)]

    candidates.sort(key=lambda c: (-c[0], c[1]))
    best = candidates[0][2]
    best.fit_info["restart_logliks"] = [c[0] for c in sorted(candidates, key=lambda c: c[1])]
    return best
