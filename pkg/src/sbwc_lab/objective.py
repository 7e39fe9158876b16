"""Empirical risk of the two-layer net: value, gradient, curvature.

The objective is the mean of per-sample losses f(y_i Phi(w, x_i)); the
leave-one-out variant drops sample i but still divides by n.  Gradients
and Hessian-vector products are exact analytic expressions built on the
block-diagonal model Hessian; a dense Hessian is never formed outside
the small-problem eigensolver fallback.

Kernels chunk over neurons so that the n-x-m pre-activation matrix never
exceeds ~2^23 entries; per-sample contributions are summed in fixed
index order (inside BLAS calls over fixed-layout arrays), which keeps
repeated evaluations bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .activations import ActivationSpec
from .datasets import Dataset
from .losses import LossSpec, loss_eval
from .model import NetworkShape, Weights
from .rng import substream

_CHUNK_ENTRIES = 1 << 23  # max n*chunk pre-activation entries held at once


def _as_vector(w) -> np.ndarray:
    if isinstance(w, Weights):
        return w.w
    return np.asarray(w, dtype=np.float64)


def forward_batch(shape: NetworkShape, act: ActivationSpec, weights: Weights,
                  X: np.ndarray) -> np.ndarray:
    """Phi(w, x_i) for every row of X, chunked over neurons."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != shape.d:
        raise ValueError(f"X must be (n, {shape.d})")
    W = weights.as_matrix()
    signs = weights.signs
    n = X.shape[0]
    chunk = max(1, min(shape.m, _CHUNK_ENTRIES // max(1, n)))
    phi = np.zeros(n)
    for j0 in range(0, shape.m, chunk):
        j1 = min(shape.m, j0 + chunk)
        Z = X @ W[j0:j1].T
        sig, _, _ = act.eval(Z)
        phi += sig @ signs[j0:j1]
    return phi / np.sqrt(shape.m)


@dataclass(frozen=True)
class ObjectiveStats:
    """Risk plus the derivative averages that enter every curvature bound."""

    risk: float
    fprime: float        # (1/n) sum |f'(y_i Phi_i)|
    fdoubleprime: float  # (1/n) sum f''(y_i Phi_i)
    grad_norm: float
    smoothness: float    # ell^2 R^2 + L R^2 / sqrt(m)

    def __post_init__(self):
        vals = (self.risk, self.fprime, self.fdoubleprime, self.grad_norm, self.smoothness)
        if not all(np.isfinite(v) and v >= 0.0 for v in vals):
            raise ValueError(f"objective stats must be finite and non-negative: {vals}")


@dataclass(frozen=True)
class Objective:
    """Empirical risk over a dataset, optionally leave-one-out."""

    dataset: Dataset
    loss: LossSpec
    activation: ActivationSpec
    shape: NetworkShape
    excluded_index: int | None = None

    def __post_init__(self):
        if self.dataset.n == 0:
            raise ValueError("objective needs a non-empty dataset")
        if self.dataset.d != self.shape.d:
            raise ValueError(f"dataset dimension {self.dataset.d} != network input dim {self.shape.d}")
        if self.excluded_index is not None and not (0 <= self.excluded_index < self.dataset.n):
            raise ValueError(f"excluded_index {self.excluded_index} out of range [0, {self.dataset.n})")

    # -- derived constants -------------------------------------------------

    @property
    def n(self) -> int:
        """Normalization count: always the full sample size."""
        return self.dataset.n

    @property
    def ell(self) -> float:
        return self.activation.ell

    @property
    def big_l(self) -> float:
        return self.activation.big_l

    @property
    def R(self) -> float:
        return self.dataset.R

    @property
    def smoothness(self) -> float:
        """L_F = ell^2 R^2 + L R^2 / sqrt(m)."""
        return self.ell**2 * self.R**2 + self.big_l * self.R**2 / np.sqrt(self.shape.m)

    @property
    def kappa(self) -> float:
        """Weak-convexity scale beta_f * L R^2 / sqrt(m)."""
        beta_f = self.loss.beta_f if self.loss.beta_f is not None else 1.0
        return beta_f * self.big_l * self.R**2 / np.sqrt(self.shape.m)

    def exclude(self, i: int) -> "Objective":
        return replace(self, excluded_index=i)

    def _included(self):
        X, y = self.dataset.X, self.dataset.y
        if self.excluded_index is None:
            return X, y
        mask = np.ones(self.dataset.n, dtype=bool)
        mask[self.excluded_index] = False
        return X[mask], y[mask]

    def _chunk(self, n_rows: int) -> int:
        return max(1, min(self.shape.m, _CHUNK_ENTRIES // max(1, n_rows)))

    # -- evaluations ---------------------------------------------------------

    def margins(self, w) -> np.ndarray:
        """u_i = y_i Phi(w, x_i) over included samples."""
        wv = _as_vector(w)
        X, y = self._included()
        W = wv.reshape(self.shape.m, self.shape.d)
        signs = self.shape_signs(w)
        phi = np.zeros(X.shape[0])
        chunk = self._chunk(X.shape[0])
        for j0 in range(0, self.shape.m, chunk):
            j1 = min(self.shape.m, j0 + chunk)
            Z = X @ W[j0:j1].T
            sig, _, _ = self.activation.eval(Z)
            phi += sig @ signs[j0:j1]
        return y * phi / np.sqrt(self.shape.m)

    def shape_signs(self, w) -> np.ndarray:
        if isinstance(w, Weights):
            return w.signs
        from .model import balanced_signs
        return balanced_signs(self.shape.m)

    def risk(self, w) -> float:
        u = self.margins(w)
        f, _, _ = loss_eval(self.loss, u)
        return float(np.sum(f)) / self.n

    def risk_and_grad(self, w):
        """(F(w), grad F(w)) sharing the forward pass."""
        wv = _as_vector(w)
        X, y = self._included()
        W = wv.reshape(self.shape.m, self.shape.d)
        signs = self.shape_signs(w)
        u = self.margins(w)
        f, d1, _ = loss_eval(self.loss, u)
        c = d1 * y / (self.n * np.sqrt(self.shape.m))
        G = np.empty_like(W)
        chunk = self._chunk(X.shape[0])
        for j0 in range(0, self.shape.m, chunk):
            j1 = min(self.shape.m, j0 + chunk)
            Z = X @ W[j0:j1].T
            _, s1, _ = self.activation.eval(Z)
            G[j0:j1] = signs[j0:j1, None] * ((s1 * c[:, None]).T @ X)
        return float(np.sum(f)) / self.n, G.ravel()

    def grad(self, w) -> np.ndarray:
        return self.risk_and_grad(w)[1]

    def hvp(self, w, v) -> np.ndarray:
        return self.hvp_operator(w)(v)

    def hvp_operator(self, w):
        """Return v -> (nabla^2 F(w)) v with per-w quantities precomputed.

        The product combines the Gauss-Newton part
        f''(u_i) <gPhi_i, v> gPhi_i and the curvature part
        f'(u_i) y_i (nabla^2 Phi_i) v, both averaged over samples.
        """
        wv = _as_vector(w)
        X, y = self._included()
        W = wv.reshape(self.shape.m, self.shape.d)
        signs = self.shape_signs(w)
        u = self.margins(w)
        _, d1, d2 = loss_eval(self.loss, u)
        sqm = np.sqrt(self.shape.m)
        n_rows = X.shape[0]
        chunk = self._chunk(n_rows)
        small = self.shape.m <= chunk  # single-chunk problems cache activations
        cache = None
        if small:
            Z = X @ W.T
            _, s1, s2 = self.activation.eval(Z)
            cache = (s1, s2)

        def apply(v):
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (self.shape.param_dim,):
                raise ValueError(f"direction must have length {self.shape.param_dim}")
            V = v.reshape(self.shape.m, self.shape.d)
            if n_rows == 0:
                return np.zeros(self.shape.param_dim)
            # pass 1: g_i = <grad Phi_i, v>
            g = np.zeros(n_rows)
            if small:
                s1, s2 = cache
                P = X @ V.T
                g = ((s1 * signs[None, :]) * P).sum(axis=1) / sqm
                a = d2 * g / self.n  # y_i^2 = 1 in the Gauss-Newton weight
                b = d1 * y / (self.n * sqm)
                out = signs[:, None] * (((s1 * (a / sqm)[:, None]) + (s2 * P * b[:, None])).T @ X)
                return out.ravel()
            for j0 in range(0, self.shape.m, chunk):
                j1 = min(self.shape.m, j0 + chunk)
                Zc = X @ W[j0:j1].T
                _, s1, _ = self.activation.eval(Zc)
                Pc = X @ V[j0:j1].T
                g += ((s1 * signs[None, j0:j1]) * Pc).sum(axis=1)
            g /= sqm
            a = d2 * g / self.n
            b = d1 * y / (self.n * sqm)
            out = np.empty_like(W)
            for j0 in range(0, self.shape.m, chunk):
                j1 = min(self.shape.m, j0 + chunk)
                Zc = X @ W[j0:j1].T
                _, s1, s2 = self.activation.eval(Zc)
                Pc = X @ V[j0:j1].T
                out[j0:j1] = signs[j0:j1, None] * (((s1 * (a / sqm)[:, None]) + (s2 * Pc * b[:, None])).T @ X)
            return out.ravel()

        return apply

    def stats(self, w) -> ObjectiveStats:
        u = self.margins(w)
        f, d1, d2 = loss_eval(self.loss, u)
        _, g = self.risk_and_grad(w)
        return ObjectiveStats(
            risk=float(np.sum(f)) / self.n,
            fprime=float(np.sum(np.abs(d1))) / self.n,
            fdoubleprime=float(np.sum(np.abs(d2))) / self.n,
            grad_norm=float(np.linalg.norm(g)),
            smoothness=self.smoothness,
        )

    def segment_stats(self, w1, w2, alphas):
        """Risk, F', F'' at w_alpha = alpha*w1 + (1-alpha)*w2 for each alpha.

        Pre-activations are linear in alpha (Z_alpha = alpha*Z1 +
        (1-alpha)*Z2), so after two forward passes each segment point
        costs one activation/loss sweep instead of a matmul.  Used by
        the segment-maximization checkers.
        """
        alphas = np.asarray(alphas, dtype=np.float64)
        X, y = self._included()
        W1 = _as_vector(w1).reshape(self.shape.m, self.shape.d)
        W2 = _as_vector(w2).reshape(self.shape.m, self.shape.d)
        signs = self.shape_signs(w1)
        sqm = np.sqrt(self.shape.m)
        n_rows = X.shape[0]
        risks = np.zeros(alphas.shape[0])
        fprimes = np.zeros(alphas.shape[0])
        fdoubles = np.zeros(alphas.shape[0])
        if n_rows == 0:
            return risks, fprimes, fdoubles
        Z1 = X @ W1.T
        Z2 = X @ W2.T
        dZ = Z1 - Z2
        block = max(1, _CHUNK_ENTRIES // max(1, n_rows * self.shape.m))
        for a0 in range(0, alphas.shape[0], block):
            a1 = min(alphas.shape[0], a0 + block)
            al = alphas[a0:a1]
            Za = Z2[None, :, :] + al[:, None, None] * dZ[None, :, :]
            sig, _, _ = self.activation.eval(Za)
            u = y[None, :] * (sig @ signs) / sqm
            f, d1, d2 = loss_eval(self.loss, u)
            risks[a0:a1] = np.sum(f, axis=1) / self.n
            fprimes[a0:a1] = np.sum(np.abs(d1), axis=1) / self.n
            fdoubles[a0:a1] = np.sum(np.abs(d2), axis=1) / self.n
        return risks, fprimes, fdoubles

    def segment_risk(self, w1, w2, alpha: float) -> float:
        return float(self.segment_stats(w1, w2, np.array([alpha]))[0][0])

    def per_sample(self, w):
        """Per-included-sample margins, losses and exact gradient norms.

        ||grad of f(y_i Phi(., x_i))|| = |f'(u_i)| * ||grad Phi(., x_i)||
        with ||grad Phi_i|| = ||x_i|| sqrt(mean_j sigma'(z_ij)^2).
        """
        wv = _as_vector(w)
        X, y = self._included()
        W = wv.reshape(self.shape.m, self.shape.d)
        u = self.margins(w)
        f, d1, _ = loss_eval(self.loss, u)
        sum_s1sq = np.zeros(X.shape[0])
        chunk = self._chunk(X.shape[0])
        for j0 in range(0, self.shape.m, chunk):
            j1 = min(self.shape.m, j0 + chunk)
            Z = X @ W[j0:j1].T
            _, s1, _ = self.activation.eval(Z)
            sum_s1sq += np.sum(s1 * s1, axis=1)
        phi_grad_norm = np.linalg.norm(X, axis=1) * np.sqrt(sum_s1sq / self.shape.m)
        return {"margins": u, "losses": f, "grad_norms": np.abs(d1) * phi_grad_norm}


# ---------------------------------------------------------------------------
# Minimum-eigenvalue estimation


class MinEigError(RuntimeError):
    """Eigenvalue iteration failed to reach the residual tolerance."""

    def __init__(self, message, best, residual):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass(frozen=True)
class MinEigResult:
    lambda_min: float
    residual: float
    iterations: int
    method: str


def _dense_from_operator(apply, dim: int) -> np.ndarray:
    H = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        H[:, j] = apply(e)
        e[j] = 0.0
    return 0.5 * (H + H.T)


def min_eig(obj: Objective, w, tol: float | None = None, method: str = "auto",
            max_dim: int = 200, seed: int = 0) -> MinEigResult:
    """Estimate lambda_min(nabla^2 F(w)) using only Hessian-vector products.

    Lanczos with full reorthogonalization (Krylov dimension
    min(param_dim, max_dim), deterministic seeded start vector); dense
    eigendecomposition when param_dim <= 400.  The default tolerance is
    1e-8 * max(1, estimated ||H||).  Raises MinEigError (carrying the
    best estimate) if the explicit residual ||Hv - lambda v|| stays
    above the tolerance.
    """
    if tol is not None and tol <= 0:
        raise ValueError("tol must be positive")
    dim = obj.shape.param_dim
    apply = obj.hvp_operator(w)

    if method == "dense" or (method == "auto" and dim <= 400):
        H = _dense_from_operator(apply, dim)
        vals, vecs = np.linalg.eigh(H)
        lam = float(vals[0])
        v = vecs[:, 0]
        res = float(np.linalg.norm(apply(v) - lam * v))
        eff_tol = tol if tol is not None else 1e-8 * max(1.0, float(np.max(np.abs(vals))))
        if res > eff_tol:
            raise MinEigError(f"dense residual {res} above tolerance {eff_tol}", lam, res)
        return MinEigResult(lambda_min=lam, residual=res, iterations=dim, method="dense")

    k_max = min(dim, max_dim)
    rng = substream(seed, "lanczos")
    q = rng.standard_normal(dim)
    q /= np.linalg.norm(q)
    Q = np.empty((dim, k_max))
    alphas = np.empty(k_max)
    betas = np.empty(max(0, k_max - 1))
    k = 0
    Q[:, 0] = q
    u = apply(q)
    alphas[0] = q @ u
    r = u - alphas[0] * q
    k = 1
    while k < k_max:
        # full reorthogonalization, applied twice for stability
        r -= Q[:, :k] @ (Q[:, :k].T @ r)
        r -= Q[:, :k] @ (Q[:, :k].T @ r)
        beta = np.linalg.norm(r)
        if beta < 1e-13:
            break  # invariant subspace found; Ritz values are exact
        betas[k - 1] = beta
        q = r / beta
        Q[:, k] = q
        u = apply(q)
        alphas[k] = q @ u
        r = u - alphas[k] * q - beta * Q[:, k - 1]
        k += 1

    from scipy.linalg import eigh_tridiagonal
    vals, vecs = eigh_tridiagonal(alphas[:k], betas[:max(0, k - 1)])
    lam = float(vals[0])
    ritz = Q[:, :k] @ vecs[:, 0]
    ritz /= np.linalg.norm(ritz)
    res = float(np.linalg.norm(apply(ritz) - lam * ritz))
    eff_tol = tol if tol is not None else 1e-8 * max(1.0, float(np.max(np.abs(vals))))
    if res > eff_tol:
        raise MinEigError(
            f"Lanczos residual {res} above tolerance {eff_tol} after {k} iterations", lam, res)
    return MinEigResult(lambda_min=lam, residual=res, iterations=k, method="lanczos")
