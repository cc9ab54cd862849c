"""Regressors from task vectors to compressed trajectories.

All models share a small interface: ``predict(x)`` for one query, ``predict_batch(X)``
for many, and ``to_dict`` / ``model_from_dict`` for persistence.

* :class:`GprModel` -- zero-mean Gaussian process with a squared-exponential
  kernel; the prediction is the posterior mean.
* :class:`GmrModel` -- Gaussian mixture on the joint ``(x, y)`` fitted by EM,
  conditioned on ``x`` and collapsed to one mean by moment matching.
* :class:`BgmrModel` -- Dirichlet-process mixture with a Normal-inverse-Wishart
  prior, inferred by collapsed Gibbs sampling.  Its conditional is a mixture of
  Student-t components, so several modes can be reported.
* :class:`KnnModel` -- nearest-neighbour lookup.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist
from scipy.special import gammaln, logsumexp

log = logging.getLogger(__name__)

KINDS = ("gpr", "gmr", "bgmr", "knn")


class RegressorError(ValueError):
    pass


def _as_xy(X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(X) != len(Y):
        raise RegressorError(f"{len(X)} inputs but {len(Y)} outputs")
    if len(X) == 0:
        raise RegressorError("no training data")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise RegressorError("training data must be finite")
    return X, Y


class _Regressor:
    kind = ""

    def predict(self, x) -> np.ndarray:
        return self.predict_batch(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def predict_batch(self, X) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


# --------------------------------------------------------------------------- GPR


@dataclass(frozen=True)
class GprHyper:
    lengthscale: float
    signal_var: float
    noise_var: float

    def __post_init__(self):
        if not (self.lengthscale > 0 and self.signal_var > 0 and self.noise_var > 0):
            raise RegressorError("kernel hyperparameters must be positive")


def default_hyper(X, Y, noise_ratio: float = 1e-6) -> GprHyper:
    """Median pairwise input distance, mean output variance, relative noise."""
    X, Y = _as_xy(X, Y)
    d = pdist(X) if len(X) > 1 else np.array([1.0])
    ell = float(np.median(d))
    if not ell > 0:
        ell = 1.0
    var = float(np.mean(np.var(Y, axis=0)))
    if not var > 0:
        var = 1.0
    return GprHyper(ell, var, noise_ratio * var)


LENGTHSCALE_GRID = (0.5, 1.0, 2.0, 4.0, 8.0)


def loo_error(X, Y, hyper: GprHyper) -> float:
    """Mean squared leave-one-out residual, from one factorisation.

    Uses the identity ``y_i - mu_{-i}(x_i) = alpha_i / [K^-1]_ii``.
    """
    model = gpr_fit(X, Y, hyper)
    Kinv = linalg.cho_solve((model.factor, True), np.eye(len(model.X_train)))
    resid = model.alpha / np.diag(Kinv)[:, None]
    return float(np.mean(np.sum(resid * resid, axis=1)))


def refine_hyper(X, Y, base: GprHyper | None = None, factors=LENGTHSCALE_GRID) -> GprHyper:
    """Scale the default lengthscale by the grid factor with the lowest LOO error."""
    X, Y = _as_xy(X, Y)
    base = base or default_hyper(X, Y)
    if len(X) < 3:
        return base
    best = None
    for f in factors:
        h = GprHyper(base.lengthscale * f, base.signal_var, base.noise_var)
        try:
            err = loo_error(X, Y, h)
        except RegressorError:
            continue
        log.debug("GPR lengthscale %.4g: LOO error %.6g", h.lengthscale, err)
        if best is None or err < best[0]:
            best = (err, h)
    return best[1] if best else base


def rbf_kernel(A, B, hyper: GprHyper) -> np.ndarray:
    d2 = cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean")
    return hyper.signal_var * np.exp(-0.5 * d2 / hyper.lengthscale**2)


class GprModel(_Regressor):
    kind = "gpr"

    def __init__(self, X, Y, hyper: GprHyper, factor, alpha):
        self.X_train, self.Y_train, self.hyper = X, Y, hyper
        self.factor = factor
        self.alpha = alpha

    def gram(self) -> np.ndarray:
        """``K(X, X) + noise * I`` as used for the factorisation."""
        return rbf_kernel(self.X_train, self.X_train, self.hyper) + self.hyper.noise_var * np.eye(len(self.X_train))

    def predict_batch(self, X) -> np.ndarray:
        return rbf_kernel(X, self.X_train, self.hyper) @ self.alpha

    def posterior_cov(self, X) -> np.ndarray:
        """Posterior covariance at ``X`` (not used for point predictions)."""
        Ks = rbf_kernel(X, self.X_train, self.hyper)
        v = linalg.solve_triangular(self.factor, Ks.T, lower=True)
        return rbf_kernel(X, X, self.hyper) - v.T @ v

    def to_dict(self) -> dict:
        h = self.hyper
        return {
            "kind": self.kind,
            "X": self.X_train.tolist(),
            "Y": self.Y_train.tolist(),
            "hyper": {"lengthscale": h.lengthscale, "signal_var": h.signal_var, "noise_var": h.noise_var},
        }

    @classmethod
    def from_dict(cls, d):
        return gpr_fit(d["X"], d["Y"], GprHyper(**d["hyper"]))


def gpr_fit(X, Y, hyper: GprHyper | None = None, max_jitter_tries: int = 6) -> GprModel:
    """Factor ``K + noise*I`` once; predictions reuse ``alpha = (K + noise*I)^-1 Y``.

    If the Cholesky factorisation fails, extra diagonal jitter is added in
    decades, starting at ``1e-10 * signal_var``.
    """
    X, Y = _as_xy(X, Y)
    hyper = hyper or default_hyper(X, Y)
    G = rbf_kernel(X, X, hyper) + hyper.noise_var * np.eye(len(X))
    jitter = 0.0
    for attempt in range(max_jitter_tries + 1):
        try:
            L = np.linalg.cholesky(G + jitter * np.eye(len(X)) if jitter else G)
            break
        except np.linalg.LinAlgError:
            jitter = 1e-10 * hyper.signal_var * 10.0**attempt
            log.warning("GPR Gram matrix not positive definite, adding jitter %.3g", jitter)
    else:
        raise RegressorError("GPR Gram matrix is not positive definite even after jitter")
    alpha = linalg.cho_solve((L, True), Y)
    return GprModel(X, Y, hyper, L, alpha)


# --------------------------------------------------------------------------- GMR


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 300
    tol: float = 1e-7
    cov_floor: float = 1e-6
    restarts: int = 5


def kmeans_pp(Z, k, rng) -> np.ndarray:
    """k-means++ seeding: indices of ``k`` initial centres."""
    n = len(Z)
    first = int(rng.integers(n))
    idx = [first]
    d2 = np.sum((Z - Z[first]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            nxt = int(rng.integers(n))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((Z - Z[nxt]) ** 2, axis=1))
    return np.array(idx)


def kmeans_labels(Z, k, rng, iters: int = 20) -> np.ndarray:
    centres = Z[kmeans_pp(Z, k, rng)].copy()
    labels = np.zeros(len(Z), dtype=int)
    for _ in range(iters):
        labels = np.argmin(cdist(Z, centres, "sqeuclidean"), axis=1)
        for j in range(k):
            if np.any(labels == j):
                centres[j] = Z[labels == j].mean(axis=0)
    return labels


def _gauss_logpdf(Z, mean, chol) -> np.ndarray:
    d = Z.shape[1]
    sol = linalg.solve_triangular(chol, (Z - mean).T, lower=True)
    return -0.5 * np.sum(sol * sol, axis=0) - np.sum(np.log(np.diag(chol))) - 0.5 * d * np.log(2 * np.pi)


def _floored_cov(S, floor):
    """Return ``(cov, cholesky, floored)``; the floor is added only when needed."""
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
        if np.min(np.diag(L)) ** 2 > floor:
            return S, L, False
    except np.linalg.LinAlgError:
        pass
    S = S + floor * np.eye(len(S))
    try:
        return S, np.linalg.cholesky(S), True
    except np.linalg.LinAlgError:
        lam_min = float(np.linalg.eigvalsh(S)[0])
        S = S + (floor - lam_min) * np.eye(len(S))
        return S, np.linalg.cholesky(S), True


class GmrModel(_Regressor):
    kind = "gmr"

    def __init__(self, weights, means, covariances, dx, log_likelihoods=(), floored=False):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.covariances = np.asarray(covariances, dtype=float)
        self.dx = int(dx)
        self.log_likelihoods = list(log_likelihoods)
        self.floored = bool(floored)
        self._prepare()

    @property
    def K_components(self) -> int:
        return len(self.weights)

    def _prepare(self):
        dx = self.dx
        self._chol_xx, self._A, self._b = [], [], []
        for mu, S in zip(self.means, self.covariances):
            Sxx, Syx = S[:dx, :dx], S[dx:, :dx]
            L = np.linalg.cholesky(Sxx)
            A = linalg.cho_solve((L, True), Syx.T).T
            self._chol_xx.append(L)
            self._A.append(A)
            self._b.append(mu[dx:] - A @ mu[:dx])

    def responsibilities(self, X) -> np.ndarray:
        """``p(k | x)`` for each query row; rows sum to one."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        logp = np.column_stack(
            [np.log(w) + _gauss_logpdf(X, mu[: self.dx], L) for w, mu, L in zip(self.weights, self.means, self._chol_xx)]
        )
        return np.exp(logp - logsumexp(logp, axis=1, keepdims=True))

    def conditional_means(self, X) -> np.ndarray:
        """Per-component conditional means, shape ``(n, K, M)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([X @ A.T + b for A, b in zip(self._A, self._b)], axis=1)

    def predict_batch(self, X) -> np.ndarray:
        h = self.responsibilities(X)
        return np.einsum("nk,nkm->nm", h, self.conditional_means(X))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dx": self.dx,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d["means"], d["covariances"], d["dx"])


def _em(Z, k, rng, cfg: EmConfig):
    n, d = Z.shape
    labels = kmeans_labels(Z, k, rng) if k > 1 else np.zeros(n, dtype=int)
    R = np.zeros((n, k))
    R[np.arange(n), labels] = 1.0
    lls = []
    floored = False
    for _ in range(cfg.max_iters):
        Nk = R.sum(axis=0) + 1e-300
        weights = Nk / n
        means = (R.T @ Z) / Nk[:, None]
        covs, chols = [], []
        for j in range(k):
            D = Z - means[j]
            S, L, fl = _floored_cov((R[:, j, None] * D).T @ D / Nk[j], cfg.cov_floor)
            floored |= fl
            covs.append(S)
            chols.append(L)
        logp = np.column_stack([np.log(weights[j]) + _gauss_logpdf(Z, means[j], chols[j]) for j in range(k)])
        norm = logsumexp(logp, axis=1)
        ll = float(norm.sum())
        R = np.exp(logp - norm[:, None])
        converged = lls and abs(ll - lls[-1]) < cfg.tol * max(1.0, abs(ll))
        lls.append(ll)
        if converged:
            break
    return weights, means, np.array(covs), lls, floored


def gmr_fit(X, Y, K_components: int = 5, seed=0, em_config: EmConfig | None = None) -> GmrModel:
    """EM on the joint ``[x, y]`` from k-means++ seeds; best of several restarts.

    The log-likelihood recorded for each EM iteration is that of the
    parameters estimated in the same iteration.
    """
    cfg = em_config or EmConfig()
    X, Y = _as_xy(X, Y)
    if len(X) < K_components:
        raise RegressorError(f"need at least K={K_components} samples, got {len(X)}")
    Z = np.hstack([X, Y])
    restarts = 1 if K_components == 1 else max(1, cfg.restarts)
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        result = _em(Z, K_components, np.random.default_rng(child), cfg)
        if best is None or result[3][-1] > best[3][-1]:
            best = result
    weights, means, covs, lls, floored = best
    if floored:
        log.warning("GMR: at least one covariance was floored at %.3g", cfg.cov_floor)
    return GmrModel(weights, means, covs, X.shape[1], lls, floored)


# --------------------------------------------------------------------------- BGMR


@dataclass(frozen=True)
class NiwPrior:
    """Normal-inverse-Wishart prior; ``None`` entries are set from the data."""

    alpha: float = 1.0
    kappa0: float = 0.01
    nu0: float | None = None
    scale: float = 0.1
    mean0: tuple | None = None

    def resolve(self, Z):
        d = Z.shape[1]
        nu0 = float(self.nu0) if self.nu0 is not None else d + 2.0
        if nu0 <= d - 1:
            raise RegressorError("prior degrees of freedom must exceed dimension - 1")
        m0 = np.asarray(self.mean0, dtype=float) if self.mean0 is not None else Z.mean(axis=0)
        var = np.var(Z, axis=0)
        var = np.where(var > 0, var, 1.0)
        # prior expected covariance: a fraction of each coordinate's spread
        psi0 = np.diag(self.scale * var) * max(nu0 - d - 1.0, 1.0)
        return m0, float(self.kappa0), nu0, psi0


class _Cluster:
    """Sufficient statistics of one mixture component and its NIW posterior."""

    def __init__(self, d):
        self.n = 0
        self.s1 = np.zeros(d)
        self.s2 = np.zeros((d, d))

    def add(self, z):
        self.n += 1
        self.s1 += z
        self.s2 += np.outer(z, z)

    def remove(self, z):
        self.n -= 1
        self.s1 -= z
        self.s2 -= np.outer(z, z)


def _niw_posterior(n, s1, s2, m0, kappa0, nu0, psi0):
    kn = kappa0 + n
    nun = nu0 + n
    mn = (kappa0 * m0 + s1) / kn
    psin = psi0 + s2 + kappa0 * np.outer(m0, m0) - kn * np.outer(mn, mn)
    return mn, kn, nun, 0.5 * (psin + psin.T)


def _student_params(mn, kn, nun, psin):
    """Parameters ``(loc, scale, dof)`` of the posterior predictive t."""
    d = len(mn)
    dof = nun - d + 1.0
    return mn, psin * (kn + 1.0) / (kn * dof), dof


def _t_logpdf(Z, loc, chol, dof) -> np.ndarray:
    Z = np.atleast_2d(Z)
    d = Z.shape[1]
    sol = linalg.solve_triangular(chol, (Z - loc).T, lower=True)
    maha = np.sum(sol * sol, axis=0)
    return (
        gammaln(0.5 * (dof + d))
        - gammaln(0.5 * dof)
        - 0.5 * d * np.log(dof * np.pi)
        - np.sum(np.log(np.diag(chol)))
        - 0.5 * (dof + d) * np.log1p(maha / dof)
    )


@dataclass
class _Component:
    weight: float
    loc: np.ndarray
    scale: np.ndarray
    dof: float
    n: int = 0
    chol_xx: np.ndarray = field(default=None, repr=False)
    A: np.ndarray = field(default=None, repr=False)
    b: np.ndarray = field(default=None, repr=False)


class BgmrModel(_Regressor):
    """Posterior predictive of a Dirichlet-process Gaussian mixture.

    ``components`` hold the Student-t predictive of every occupied cluster plus
    one for a new cluster drawn from the prior; their weights sum to one.
    """

    kind = "bgmr"

    def __init__(self, components, dx, truncation, labels=None, saturated=False, log_joint=float("nan")):
        self.components = list(components)
        self.dx = int(dx)
        self.truncation = int(truncation)
        self.labels = None if labels is None else np.asarray(labels)
        self.saturated = bool(saturated)
        self.log_joint = float(log_joint)
        for c in self.components:
            Sxx, Syx = c.scale[: self.dx, : self.dx], c.scale[self.dx :, : self.dx]
            c.chol_xx = np.linalg.cholesky(Sxx)
            c.A = linalg.cho_solve((c.chol_xx, True), Syx.T).T
            c.b = c.loc[self.dx :] - c.A @ c.loc[: self.dx]

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def modes(self, x):
        """Conditional components at ``x`` as ``(probability, mean)`` pairs, most probable first."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        logp = np.array(
            [np.log(c.weight) + _t_logpdf(x[None, :], c.loc[: self.dx], c.chol_xx, c.dof)[0] for c in self.components]
        )
        p = np.exp(logp - logsumexp(logp))
        out = [(float(pk), c.A @ x + c.b) for pk, c in zip(p, self.components)]
        order = sorted(range(len(out)), key=lambda i: -out[i][0])
        return [out[i] for i in order]

    def predict_batch(self, X) -> np.ndarray:
        return np.stack([self.modes(x)[0][1] for x in np.atleast_2d(X)])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dx": self.dx,
            "truncation": self.truncation,
            "components": [
                {"weight": c.weight, "loc": c.loc.tolist(), "scale": c.scale.tolist(), "dof": c.dof, "n": c.n}
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, d):
        comps = [
            _Component(c["weight"], np.asarray(c["loc"]), np.asarray(c["scale"]), c["dof"], c["n"]) for c in d["components"]
        ]
        return cls(comps, d["dx"], d["truncation"])


def _log_marginal(n, s1, s2, m0, kappa0, nu0, psi0) -> float:
    """Log marginal likelihood of a cluster's data under the NIW prior."""
    d = len(m0)
    _, kn, nun, psin = _niw_posterior(n, s1, s2, m0, kappa0, nu0, psi0)
    ld0 = np.linalg.slogdet(psi0)[1]
    ldn = np.linalg.slogdet(psin)[1]
    j = np.arange(d)
    return float(
        -0.5 * n * d * np.log(np.pi)
        + np.sum(gammaln(0.5 * (nun - j)) - gammaln(0.5 * (nu0 - j)))
        + 0.5 * nu0 * ld0
        - 0.5 * nun * ldn
        + 0.5 * d * (np.log(kappa0) - np.log(kn))
    )


def bgmr_fit(
    X,
    Y,
    truncation: int = 20,
    prior: NiwPrior | None = None,
    seed=0,
    burn_in: int = 50,
    kept: int = 50,
    init_components: int = 5,
) -> BgmrModel:
    """Collapsed Gibbs sampling of cluster labels under a truncated DP prior.

    Each sweep reassigns every point given all others, with probability
    proportional to the cluster size (or ``alpha`` for a new cluster) times the
    Student-t posterior predictive of the point.  At most ``truncation``
    clusters may be occupied.  After ``burn_in`` sweeps, the kept sweep with the
    highest joint probability supplies the predictive mixture.
    """
    prior = prior or NiwPrior()
    X, Y = _as_xy(X, Y)
    Z = np.hstack([X, Y])
    n, d = Z.shape
    if truncation < 1:
        raise RegressorError("truncation must be at least 1")
    m0, kappa0, nu0, psi0 = prior.resolve(Z)
    rng = np.random.default_rng(seed)
    k0 = max(1, min(init_components, truncation, n))
    labels = kmeans_labels(Z, k0, rng) if k0 > 1 else np.zeros(n, dtype=int)
    clusters = [_Cluster(d) for _ in range(truncation)]
    for i, z in enumerate(Z):
        clusters[labels[i]].add(z)

    def predictive(c):
        mn, kn, nun, psin = _niw_posterior(c.n, c.s1, c.s2, m0, kappa0, nu0, psi0)
        loc, scale, dof = _student_params(mn, kn, nun, psin)
        return loc, np.linalg.cholesky(scale), dof

    cache = [predictive(c) for c in clusters]
    prior_pred = predictive(_Cluster(d))
    alpha = prior.alpha
    saturated = False
    best = None
    for sweep in range(burn_in + kept):
        for i in range(n):
            z = Z[i]
            old = labels[i]
            clusters[old].remove(z)
            cache[old] = predictive(clusters[old]) if clusters[old].n else prior_pred
            occupied = [j for j in range(truncation) if clusters[j].n > 0]
            empty = [j for j in range(truncation) if clusters[j].n == 0]
            cand = list(occupied)
            logw = [np.log(clusters[j].n) + _t_logpdf(z, *cache[j])[0] for j in occupied]
            if empty:
                cand.append(empty[0])
                logw.append(np.log(alpha) + _t_logpdf(z, *prior_pred)[0])
            else:
                saturated = True
            logw = np.array(logw)
            p = np.exp(logw - logsumexp(logw))
            new = cand[int(rng.choice(len(cand), p=p))]
            labels[i] = new
            clusters[new].add(z)
            cache[new] = predictive(clusters[new])
        if sweep >= burn_in:
            occ = [j for j in range(truncation) if clusters[j].n > 0]
            sizes = np.array([clusters[j].n for j in occ])
            log_crp = len(occ) * np.log(alpha) + np.sum(gammaln(sizes))
            lj = float(log_crp + sum(_log_marginal(clusters[j].n, clusters[j].s1, clusters[j].s2, m0, kappa0, nu0, psi0) for j in occ))
            if best is None or lj > best[0]:
                best = (lj, labels.copy())
    if saturated:
        log.warning("BGMR: all %d clusters were occupied; consider a larger truncation", truncation)
    lj, labels = best
    comps = []
    total = n + alpha
    for j in np.unique(labels):
        c = _Cluster(d)
        for z in Z[labels == j]:
            c.add(z)
        loc, scale, dof = _student_params(*_niw_posterior(c.n, c.s1, c.s2, m0, kappa0, nu0, psi0))
        comps.append(_Component(c.n / total, loc, scale, dof, c.n))
    loc, scale, dof = _student_params(m0, kappa0, nu0, psi0)
    comps.append(_Component(alpha / total, loc, scale, dof, 0))
    # relabel so labels index the returned components in order
    _, labels = np.unique(labels, return_inverse=True)
    return BgmrModel(comps, X.shape[1], truncation, labels, saturated, lj)


# --------------------------------------------------------------------------- KNN


class KnnModel(_Regressor):
    kind = "knn"

    def __init__(self, X, Y, k: int = 1):
        X, Y = _as_xy(X, Y)
        if not 1 <= k <= len(X):
            raise RegressorError(f"k={k} must lie in [1, {len(X)}]")
        self.X_train, self.Y_train, self.k = X, Y, int(k)

    def neighbours(self, X) -> np.ndarray:
        """Indices of the ``k`` nearest training rows; ties go to the lower index."""
        d2 = cdist(np.atleast_2d(X), self.X_train, "sqeuclidean")
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def predict_batch(self, X) -> np.ndarray:
        return self.Y_train[self.neighbours(X)].mean(axis=1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "X": self.X_train.tolist(), "Y": self.Y_train.tolist(), "k": self.k}

    @classmethod
    def from_dict(cls, d):
        return cls(d["X"], d["Y"], d["k"])


def knn_fit(X, Y, k: int = 1) -> KnnModel:
    return KnnModel(X, Y, k)


# --------------------------------------------------------------------------- dispatch

_CLASSES = {"gpr": GprModel, "gmr": GmrModel, "bgmr": BgmrModel, "knn": KnnModel}


def fit_regressor(kind: str, X, Y, seed=0, **options):
    kind = kind.lower()
    if kind == "gpr":
        hyper = options.get("hyper")
        if hyper is None and options.get("refine", True):
            hyper = refine_hyper(X, Y)
        return gpr_fit(X, Y, hyper)
    if kind == "gmr":
        return gmr_fit(X, Y, options.get("K_components", 5), seed, options.get("em_config"))
    if kind == "bgmr":
        return bgmr_fit(X, Y, options.get("truncation", 20), options.get("prior"), seed)
    if kind == "knn":
        return knn_fit(X, Y, options.get("k", 1))
    raise RegressorError(f"unknown regressor kind {kind!r}; expected one of {KINDS}")


def model_from_dict(d: dict):
    try:
        cls = _CLASSES[d["kind"]]
    except KeyError as exc:
        raise RegressorError(f"unknown regressor record {d.get('kind')!r}") from exc
    return cls.from_dict(d)
