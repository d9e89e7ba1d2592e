"""Gaussian latent-variable world: masked regression vs two-stage regression,
PCA recovery bounds, closed-form conditional MI, and lasso structure learning.

The generative model is Z ~ N(0, Sigma_ZZ), X ~ N(AZ, Sigma_XX): a latent
vector feeding every coordinate plus sparse direct couplings among the
observed coordinates. Everything here is population-exact linear algebra
except where sampling is explicitly requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ConvergenceError
from ..rng import Stream
from .report import PropReport

_PD_FLOOR = 1e-6


@dataclass(frozen=True)
class GaussianModel:
    a: np.ndarray  # (L, k) loading matrix
    sigma_zz: np.ndarray  # (k, k) PD
    sigma_xx: np.ndarray  # (L, L) PD with sparse off-diagonal
    edges: frozenset = field(default_factory=frozenset)  # planted graph

    def __post_init__(self):
        for m, label in ((self.sigma_zz, "Sigma_ZZ"), (self.sigma_xx, "Sigma_XX")):
            if not np.allclose(m, m.T):
                raise ConfigError(f"{label} must be symmetric")
            try:
                np.linalg.cholesky(m)
            except np.linalg.LinAlgError:
                raise ConfigError(f"{label} is not positive definite") from None

    @property
    def n_obs(self):
        return self.a.shape[0]

    @property
    def n_latent(self):
        return self.a.shape[1]

    @property
    def cov_x(self):
        return self.a @ self.sigma_zz @ self.a.T + self.sigma_xx


def _planted_coupling(n, n_edges, scale, stream):
    """Symmetric hollow matrix with n_edges entries of magnitude in scale*[0.5, 1]."""
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not (0 <= n_edges <= len(all_pairs)):
        raise ConfigError(f"n_edges must lie in [0, {len(all_pairs)}]")
    chosen = stream.choice(len(all_pairs), size=n_edges, replace=False) if n_edges else []
    s = np.zeros((n, n))
    edges = set()
    for p in sorted(int(c) for c in chosen):
        i, j = all_pairs[p]
        mag = scale * (0.5 + 0.5 * stream.random())
        sign = 1.0 if stream.random() < 0.5 else -1.0
        s[i, j] = s[j, i] = sign * mag
        edges.add((i, j))
    return s, frozenset(edges)


def _inflate_to_pd(m):
    eig_min = np.linalg.eigvalsh(m)[0]
    if eig_min < _PD_FLOOR:
        m = m + (_PD_FLOOR - eig_min) * np.eye(m.shape[0])
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise ConfigError("positive-definite repair failed") from None
    return m


def gaussian_gen(n_obs, n_latent, n_edges, scale, seed, orthonormal_a=False,
                 z_var=1.0) -> GaussianModel:
    """Random model: A iid standard normal (optionally orthonormalized),
    Sigma_ZZ = z_var * I, Sigma_XX = I + coupling, inflated to PD if needed."""
    if n_obs < 3 or n_latent < 1:
        raise ConfigError("need n_obs >= 3 and n_latent >= 1")
    stream = Stream.from_seed(seed, "gaussian-model")
    a = stream.normal(0.0, 1.0, (n_obs, n_latent))
    if orthonormal_a:
        q, _ = np.linalg.qr(a)
        a = q[:, :n_latent]
    s, edges = _planted_coupling(n_obs, n_edges, scale, stream)
    sigma_xx = _inflate_to_pd(np.eye(n_obs) + s)
    return GaussianModel(a=a, sigma_zz=z_var * np.eye(n_latent), sigma_xx=sigma_xx,
                         edges=edges)


def precision_graph_gen(n_obs, n_edges, scale, seed) -> GaussianModel:
    """Pure graphical model (A = 0) whose planted edges live in the precision
    matrix, so disconnected pairs have exactly zero conditional MI."""
    if n_obs < 3:
        raise ConfigError("need n_obs >= 3")
    stream = Stream.from_seed(seed, "precision-graph")
    s, edges = _planted_coupling(n_obs, n_edges, scale, stream)
    theta = _inflate_to_pd(np.eye(n_obs) + s)
    sigma_xx = np.linalg.inv(theta)
    sigma_xx = 0.5 * (sigma_xx + sigma_xx.T)
    return GaussianModel(a=np.zeros((n_obs, 1)), sigma_zz=np.eye(1),
                         sigma_xx=sigma_xx, edges=edges)


# ---------------------------------------------------------------------------
# Masked regression vs two-stage regression (latent recovery)


def masked_beta(model: GaussianModel, i: int) -> np.ndarray:
    """Population coefficients of regressing x_i on all other coordinates."""
    cov = model.cov_x
    keep = [r for r in range(model.n_obs) if r != i]
    sub = cov[np.ix_(keep, keep)]
    cross = cov[keep, i]
    try:
        return np.linalg.solve(sub, cross)
    except np.linalg.LinAlgError:
        raise ConfigError(f"singular covariance submatrix at coordinate {i}") from None


def two_stage_beta(model: GaussianModel, i: int) -> np.ndarray:
    """Coefficients of the two-stage path: others -> latent -> x_i."""
    keep = [r for r in range(model.n_obs) if r != i]
    a_i = model.a[i]
    a_rest = model.a[keep]
    m = a_rest @ model.sigma_zz @ a_rest.T + model.sigma_xx[np.ix_(keep, keep)]
    cross = a_rest @ model.sigma_zz @ a_i
    try:
        return np.linalg.solve(m, cross)
    except np.linalg.LinAlgError:
        raise ConfigError(f"singular covariance submatrix at coordinate {i}") from None


def prop1_check(model: GaussianModel, i: int) -> PropReport:
    """Masked regression equals two-stage regression up to the off-diagonal
    coupling of x_i, with the inverse-covariance operator norm as constant."""
    keep = [r for r in range(model.n_obs) if r != i]
    lhs = float(np.linalg.norm(masked_beta(model, i) - two_stage_beta(model, i)))
    coupling = float(np.linalg.norm(model.sigma_xx[keep, i]))
    inv_norm = 1.0 / float(np.linalg.eigvalsh(model.cov_x)[0])
    return PropReport(name="prop1", lhs=lhs, rhs=coupling * inv_norm,
                      meta={"i": i})


# ---------------------------------------------------------------------------
# PCA recovery bound


def sample_gaussian(model: GaussianModel, n: int, stream: Stream):
    """Draw (z, x) with x = A z + noise. Shapes (n, k) and (n, L)."""
    chol_z = np.linalg.cholesky(model.sigma_zz)
    chol_x = np.linalg.cholesky(model.sigma_xx)
    z = stream.normal(0.0, 1.0, (n, model.n_latent)) @ chol_z.T
    noise = stream.normal(0.0, 1.0, (n, model.n_obs)) @ chol_x.T
    return z, z @ model.a.T + noise


def pca_project(model: GaussianModel, samples, k: int):
    """Project samples onto the top-k eigenvectors of the population Cov(X).

    Returns (projected, V, eigenvalues_descending).
    """
    if not (1 <= k <= model.n_obs):
        raise ConfigError("k must lie in [1, L]")
    eigvals, eigvecs = np.linalg.eigh(model.cov_x)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    v = eigvecs[:, order[:k]]
    return samples @ v @ v.T, v, eigvals


def prop2_check(model: GaussianModel, n_samples: int, stream: Stream) -> PropReport:
    """Davis-Kahan style recovery bound for PCA against the latent signal.

    lhs is the Monte-Carlo mean of ||A z - x_PCA||; rhs averages the
    per-sample bound. Requires orthonormal A columns (the projection step
    of the argument needs A A^T to be a projector).
    """
    k = model.n_latent
    if not np.allclose(model.a.T @ model.a, np.eye(k), atol=1e-10):
        raise ConfigError("prop2_check requires orthonormal A columns")
    sig = model.a @ model.sigma_zz @ model.a.T
    lam_k = np.sort(np.linalg.eigvalsh(sig))[::-1][k - 1]
    lam_xx = np.sort(np.linalg.eigvalsh(model.sigma_xx))[::-1]
    lam_xx_k1 = lam_xx[k] if k < model.n_obs else 0.0
    gap = lam_k - lam_xx_k1
    if gap <= 0:
        return PropReport(name="prop2", lhs=0.0, rhs=np.inf,
                          meta={"vacuous": True, "gap": float(gap)})

    z, x = sample_gaussian(model, n_samples, stream)
    x_pca, _, _ = pca_project(model, x, k)
    az = z @ model.a.T
    err = np.linalg.norm(az - x_pca, axis=1)

    dk = np.sqrt(2.0) * lam_xx[0] / gap
    aat_op = float(np.linalg.norm(model.a @ model.a.T, ord=2))
    sqrt_tr = np.sqrt(np.trace(model.sigma_xx))
    bounds = dk * (np.linalg.norm(az, axis=1) + sqrt_tr) + aat_op * sqrt_tr
    return PropReport(name="prop2", lhs=float(err.mean()), rhs=float(bounds.mean()),
                      meta={"gap": float(gap), "n_samples": n_samples})


# ---------------------------------------------------------------------------
# Conditional MI and structure learning


def gaussian_cond_mi(cov, i: int, j: int) -> float:
    """Exact I(x_i; x_j | rest) in nats from the precision matrix."""
    cov = np.asarray(cov)
    theta = np.linalg.inv(cov)
    rho = -theta[i, j] / np.sqrt(theta[i, i] * theta[j, j])
    if abs(rho) >= 1.0:
        raise ConfigError(f"partial correlation {rho} out of range")
    return -0.5 * float(np.log1p(-rho * rho))


def _soft_threshold(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def lasso_cd(x, y, lam, tol=1e-8, max_sweeps=10_000) -> np.ndarray:
    """Cyclic coordinate descent for (1/2n)||y - Xw||^2 + lam ||w||_1."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    col_sq = (x * x).sum(axis=0) / n
    w = np.zeros(p)
    r = y.copy()
    for _sweep in range(max_sweeps):
        max_delta = 0.0
        for jj in range(p):
            old = w[jj]
            if old != 0.0:
                r += x[:, jj] * old
            rho = float(x[:, jj] @ r) / n
            new = 0.0 if col_sq[jj] == 0.0 else _soft_threshold(rho, lam) / col_sq[jj]
            if new != 0.0:
                r -= x[:, jj] * new
            w[jj] = new
            max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            return w
    raise ConvergenceError("lasso coordinate descent did not converge", max_sweeps)


def neighborhood_select(samples, lam, tol=1e-8, max_sweeps=10_000) -> frozenset:
    """Estimate the conditional dependence graph by per-node lasso.

    An edge is declared when either endpoint's regression selects the other
    (OR rule). Expects a zero-mean (n, L) sample matrix with n > L.
    """
    x = np.asarray(samples, dtype=float)
    n, n_nodes = x.shape
    if n <= n_nodes:
        raise ConfigError("need more samples than nodes")
    selected = np.zeros((n_nodes, n_nodes), dtype=bool)
    for i in range(n_nodes):
        others = [c for c in range(n_nodes) if c != i]
        w = lasso_cd(x[:, others], x[:, i], lam, tol=tol, max_sweeps=max_sweeps)
        for c, wc in zip(others, w):
            if wc != 0.0:
                selected[i, c] = True
    edges = set()
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if selected[i, j] or selected[j, i]:
                edges.add((i, j))
    return frozenset(edges)
