"""Datasets, tangent-feature margins, and realizability certificates.

Generators produce bounded-feature binary-labeled samples with a
recorded radius R:

* noisy XOR: uniform over {(1,0),(0,1),(-1,0),(0,-1)} x {-1,1}^(d-2),
  scaled by 1/sqrt(d-1) so every point has unit norm; label -1 iff the
  first coordinate vanishes.
* planted linear margin: unit-sphere points with y*<v_star, x> >= gamma
  for a planted unit direction, enforced by remapping the component
  along v_star instead of rejection so generation cost stays bounded
  for gamma near 1.

The tangent-feature machinery computes rows grad_w Phi(w0, x_i), solves
the hard-margin problem max_{||w||<=1} min_i y_i <phi_i, w> by projected
subgradient ascent with a soft-min warm start (any iterate is feasible,
so the returned margin is a certified lower bound), and packages
explicit low-loss weight vectors as realizability certificates.
"""

from __future__ import annotations

import csv as _csv
import json
from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationSpec
from .model import NetworkShape, Weights, balanced_signs, new_weights
from .rng import substream

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, labels in {+1,-1}, and recorded feature radius."""

    X: np.ndarray
    y: np.ndarray
    R: float
    provenance: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("X must be (n, d) with matching label vector")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        norms = np.linalg.norm(X, axis=1)
        if norms.size and float(np.max(norms)) > self.R * (1.0 + 1e-12) + 1e-300:
            raise ValueError("feature radius R does not cover all samples")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def gen_xor(d: int, n: int, seed) -> Dataset:
    """Sample n points from the noisy XOR distribution in dimension d >= 3."""
    if d < 3:
        raise ValueError(f"noisy XOR needs d >= 3, got {d}")
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "data")
    heads = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    idx = rng.integers(0, 4, size=n)
    X = np.empty((n, d))
    X[:, :2] = heads[idx]
    X[:, 2:] = rng.integers(0, 2, size=(n, d - 2)) * 2.0 - 1.0
    y = np.where(X[:, 0] == 0.0, -1.0, 1.0)
    X /= np.sqrt(d - 1.0)
    return Dataset(X=X, y=y, R=1.0, provenance=f"xor(d={d})")


def xor_support(d: int) -> Dataset:
    """The full 2^d-point support of the noisy XOR distribution."""
    if d < 3:
        raise ValueError(f"noisy XOR needs d >= 3, got {d}")
    heads = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    tails = np.array(np.meshgrid(*([[-1.0, 1.0]] * (d - 2)), indexing="ij"))
    tails = tails.reshape(d - 2, -1).T if d > 2 else np.zeros((1, 0))
    rows = []
    for h in heads:
        for t in tails:
            rows.append(np.concatenate([h, t]))
    X = np.array(rows)
    y = np.where(X[:, 0] == 0.0, -1.0, 1.0)
    X /= np.sqrt(d - 1.0)
    return Dataset(X=X, y=y, R=1.0, provenance=f"xor-support(d={d})")


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X


def gen_linsep(d: int, gamma: float, n: int, seed, v_star: np.ndarray | None = None):
    """Unit-sphere points, linearly separable with margin gamma.

    Returns (dataset, v_star).  Points whose margin falls short have the
    component along v_star remapped into [gamma, 1] (and the orthogonal
    part rescaled to keep unit norm), so no rejection loop is needed.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"margin gamma must be in (0, 1), got {gamma}")
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "data")
    if v_star is None:
        v_star = rng.standard_normal(d)
        v_star /= np.linalg.norm(v_star)
    U = _unit_rows(rng, n, d)
    y = rng.integers(0, 2, size=n) * 2.0 - 1.0
    s = U @ v_star
    t = y * s
    bad = t < gamma
    t_new = gamma + (1.0 - gamma) * (t[bad] + 1.0) / 2.0
    perp = U[bad] - s[bad, None] * v_star[None, :]
    pn = np.linalg.norm(perp, axis=1)
    degenerate = pn < 1e-12
    if np.any(degenerate):
        fresh = rng.standard_normal((int(np.sum(degenerate)), d))
        fresh -= (fresh @ v_star)[:, None] * v_star[None, :]
        perp[degenerate] = fresh
        pn = np.linalg.norm(perp, axis=1)
    X = U.copy()
    X[bad] = (y[bad] * t_new)[:, None] * v_star[None, :] \
        + np.sqrt(np.maximum(0.0, 1.0 - t_new**2))[:, None] * (perp / pn[:, None])
    return Dataset(X=X, y=y, R=1.0, provenance=f"linsep(d={d},gamma={gamma})"), v_star


@dataclass(frozen=True)
class Scenario:
    """A resampleable data distribution (for stability experiments)."""

    kind: str  # "xor" | "linsep"
    d: int
    gamma: float | None = None
    v_star: np.ndarray | None = None

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        if self.kind == "xor":
            return gen_xor(self.d, n, rng)
        if self.kind == "linsep":
            ds, _ = gen_linsep(self.d, self.gamma, n, rng, v_star=self.v_star)
            return ds
        raise ValueError(f"unknown scenario kind {self.kind!r}")


def make_scenario(kind: str, d: int, gamma: float | None = None, seed: int = 0) -> Scenario:
    if kind == "linsep":
        if gamma is None:
            raise ValueError("linsep scenario needs a margin gamma")
        rng = substream(seed, "vstar")
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        return Scenario(kind=kind, d=d, gamma=gamma, v_star=v)
    if kind == "xor":
        return Scenario(kind=kind, d=d)
    raise ValueError(f"unknown scenario kind {kind!r}")


# ---------------------------------------------------------------------------
# CSV ingestion


def load_csv(path) -> Dataset:
    """Load "label,feat1,...,featd" rows; R is the observed max norm."""
    rows = []
    labels = []
    with open(path, "r", newline="") as fh:
        for lineno, row in enumerate(_csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                lab = float(row[0])
                feats = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}: parse error at line {lineno}: {exc}") from None
            if lab not in (-1.0, 1.0):
                raise ValueError(f"{path}: parse error at line {lineno}: label must be +1 or -1, got {row[0]!r}")
            if rows and len(feats) != len(rows[0]):
                raise ValueError(f"{path}: parse error at line {lineno}: expected {len(rows[0])} features, got {len(feats)}")
            if not feats:
                raise ValueError(f"{path}: parse error at line {lineno}: no features")
            labels.append(lab)
            rows.append(feats)
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    X = np.array(rows)
    R = float(np.max(np.linalg.norm(X, axis=1)))
    return Dataset(X=X, y=np.array(labels), R=R, provenance=f"csv({path})")


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        for yi, xi in zip(dataset.y, dataset.X):
            writer.writerow([int(yi)] + [repr(float(v)) for v in xi])


# ---------------------------------------------------------------------------
# Tangent features, margins, initialization bound


def ntk_features(shape: NetworkShape, act: ActivationSpec, w0: Weights,
                 dataset: Dataset) -> np.ndarray:
    """Rows grad_w Phi(w0, x_i); an (n, m*d) matrix."""
    if w0.m != shape.m or w0.d != shape.d or dataset.d != shape.d:
        raise ValueError("shape, weights and dataset dimensions disagree")
    Z = dataset.X @ w0.as_matrix().T  # (n, m)
    _, d1, _ = act.eval(Z)
    coeff = d1 * (w0.signs / np.sqrt(shape.m))[None, :]  # (n, m)
    # feature[i, j*d:(j+1)*d] = coeff[i, j] * x_i
    return (coeff[:, :, None] * dataset.X[:, None, :]).reshape(dataset.n, shape.param_dim)


@dataclass(frozen=True)
class MarginCert:
    """Feasible lower bound for the hard tangent-feature margin."""

    w_star: np.ndarray = field(repr=False)
    gamma_hat: float
    iterations: int

    @property
    def separated(self) -> bool:
        return self.gamma_hat > 0.0

    def to_json(self) -> str:
        return json.dumps({
            "schema_version": SCHEMA_VERSION,
            "w_star": [repr(float(v)) for v in self.w_star],
            "gamma_hat": repr(float(self.gamma_hat)),
            "iterations": self.iterations,
        })

    @classmethod
    def from_json(cls, text: str) -> "MarginCert":
        obj = json.loads(text)
        return cls(w_star=np.array([float(v) for v in obj["w_star"]]),
                   gamma_hat=float(obj["gamma_hat"]),
                   iterations=int(obj["iterations"]))


def ntk_margin(features: np.ndarray, y: np.ndarray, max_iters: int = 2000) -> MarginCert:
    """Approximately solve max_{||w|| <= 1} min_i y_i <phi_i, w>.

    Soft-min ascent with annealed temperature warm-starts a projected
    subgradient phase on the hard min (step c/sqrt(k)).  The hard min is
    re-evaluated exactly at every projected iterate and the best iterate
    is returned, so gamma_hat never exceeds the true optimum.  A
    non-positive gamma_hat means "not separated at this width/seed" and
    is reported in the certificate, not raised.
    """
    M = y[:, None] * features  # rows y_i * phi_i
    n = M.shape[0]
    if n < 1:
        raise ValueError("margin needs at least one sample")
    row_norm = float(np.max(np.linalg.norm(M, axis=1)))
    if row_norm == 0.0:
        return MarginCert(w_star=np.zeros(M.shape[1]), gamma_hat=0.0, iterations=0)

    def project(w):
        nw = np.linalg.norm(w)
        return w / nw if nw > 1.0 else w

    def hard_min(w):
        return float(np.min(M @ w))

    w = project(np.sum(M, axis=0) / (n * row_norm))
    best_w = w.copy()
    best_val = hard_min(w)

    # Soft-min warm start over a geometric temperature ladder.
    n_soft = max_iters // 2
    taus = row_norm * np.geomspace(1.0, 1e-6, 8)
    per_tau = max(1, n_soft // len(taus))
    iters = 0
    for tau in taus:
        for _ in range(per_tau):
            iters += 1
            margins = M @ w
            p = np.exp((np.min(margins) - margins) / tau)
            p /= np.sum(p)
            g = M.T @ p
            gn = np.linalg.norm(g)
            if gn < 1e-300:
                break
            w = project(w + (0.5 / row_norm) * g / gn * row_norm)
            val = hard_min(w)
            if val > best_val:
                best_val = val
                best_w = w.copy()

    # Hard-min projected subgradient, diminishing steps c/sqrt(k).
    c = 1.0 / row_norm
    w = best_w.copy()
    for k in range(1, max_iters - iters + 1):
        margins = M @ w
        i = int(np.argmin(margins))
        w = project(w + (c / np.sqrt(k)) * M[i])
        val = hard_min(w)
        if val > best_val:
            best_val = val
            best_w = w.copy()
    iters = max_iters

    return MarginCert(w_star=best_w, gamma_hat=best_val, iterations=iters)


@dataclass(frozen=True)
class InitBound:
    """Measured vs. theoretical bound on |Phi(w0, x_i)| at initialization."""

    C: float
    theoretical: float
    delta: float


def init_output_bound(shape: NetworkShape, act: ActivationSpec, w0: Weights,
                      dataset: Dataset, delta: float) -> InitBound:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    from .objective import forward_batch
    phi = forward_batch(shape, act, w0, dataset.X)
    C = float(np.max(np.abs(phi))) if dataset.n else 0.0
    theo = act.ell * dataset.R * np.sqrt(2.0 * np.log(2.0 * dataset.n / delta))
    return InitBound(C=C, theoretical=float(theo), delta=delta)


# ---------------------------------------------------------------------------
# Realizability certificates


@dataclass(frozen=True)
class RealizabilityCert:
    """Explicit weights with risk <= eps at distance g_eps from init."""

    w_eps: Weights = field(repr=False)
    eps: float
    g_eps: float
    construction: str  # "linear" | "ntk"
    measured_risk: float = float("nan")
    width_required: float | None = None
    width_ok: bool | None = None

    def to_json(self) -> str:
        return json.dumps({
            "schema_version": SCHEMA_VERSION,
            "w_eps": [repr(float(v)) for v in self.w_eps.w],
            "eps": repr(float(self.eps)),
            "g_eps": repr(float(self.g_eps)),
            "construction": self.construction,
            "checks": {
                "measured_risk": repr(float(self.measured_risk)),
                "width_required": None if self.width_required is None else repr(float(self.width_required)),
                "width_ok": self.width_ok,
            },
        })


def build_realizability_linear(obj, v_star: np.ndarray, gamma: float,
                               eps: float) -> RealizabilityCert:
    """Certificate for linearly separable data, odd activation, zero init.

    Stacks +/- alpha * v_star with alpha = 2 log(1/eps) / (gamma sqrt(m));
    needs sigma odd with sigma(u) >= u/2 on [0, 1] (tanh qualifies) and
    logistic loss, m >= 4 log^2(1/eps).  Then every sample margin is at
    least log(1/eps) and the risk is at most eps, at distance
    g(eps) = 2 log(1/eps) / gamma from zero.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if obj.activation.kind != "tanh":
        raise ValueError("linear realizability construction needs an odd activation with sigma(u) >= u/2 on [0,1] (tanh)")
    if obj.loss.kind != "logistic":
        raise ValueError("linear realizability construction is for logistic loss")
    shape = obj.shape
    log_inv = np.log(1.0 / eps)
    if shape.m < 4.0 * log_inv**2:
        raise ValueError(f"width too small for eps={eps}: need m >= {4.0 * log_inv ** 2:.1f}, have {shape.m}")
    alpha = 2.0 * log_inv / (gamma * np.sqrt(shape.m))
    signs = balanced_signs(shape.m)
    W = signs[:, None] * (alpha * np.asarray(v_star, dtype=np.float64))[None, :]
    w_eps = Weights(w=W.ravel(), signs=signs)
    g_eps = 2.0 * log_inv / gamma
    risk_val = obj.risk(w_eps.w)
    return RealizabilityCert(w_eps=w_eps, eps=eps, g_eps=float(g_eps),
                             construction="linear", measured_risk=float(risk_val))


def build_realizability_ntk(obj, w0: Weights, cert: MarginCert, C: float,
                            eps: float) -> RealizabilityCert:
    """Certificate from a tangent-feature margin: w0 + w*/gamma*(2C+log(1/eps)).

    The theory-side width condition m >= L^2 R^4 (2C+log(1/eps))^4 / (4 gamma^4 C^2)
    is evaluated and reported; when it fails the certificate is still
    built but flagged (width_ok=False), since the measured risk may or
    may not meet eps.
    """
    if cert.gamma_hat <= 0.0:
        raise ValueError("margin certificate is not separated (gamma_hat <= 0)")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    if obj.loss.kind != "logistic":
        raise ValueError("ntk realizability construction is for logistic loss")
    gamma = cert.gamma_hat
    shape = obj.shape
    scale = (2.0 * C + np.log(1.0 / eps)) / gamma
    w_vec = w0.w + scale * cert.w_star
    w_eps = Weights(w=w_vec, signs=w0.signs)
    L, R = obj.activation.big_l, obj.dataset.R
    if C > 0.0:
        required = (L**2 * R**4 / (4.0 * gamma**4 * C**2)) * (2.0 * C + np.log(1.0 / eps))**4
    else:
        required = float("inf") if np.log(1.0 / eps) > 0 else 0.0
    risk_val = obj.risk(w_eps.w)
    return RealizabilityCert(w_eps=w_eps, eps=eps, g_eps=float(scale),
                             construction="ntk", measured_risk=float(risk_val),
                             width_required=float(required),
                             width_ok=bool(shape.m >= required))
