"""Target log-joint densities f(z) = log p(x, z).

Each model exposes its dimension, the log joint, an analytic gradient, and an
analytic Hessian-vector product. Gradients are hand-derived; finite-difference
tests pin their correctness. Dataset ingestion (libsvm, csv, frisk-style
tables) and desk-scale synthetic generators live here too.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# data containers


@dataclass(frozen=True)
class ClassificationData:
    features: np.ndarray  # (n, p)
    labels: np.ndarray    # (n,) in {0, 1}

    def __post_init__(self):
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ValueError("labels must be binary")


@dataclass(frozen=True)
class FriskData:
    counts: np.ndarray   # (n_e, n_p) integer >= 0
    offsets: np.ndarray  # (n_e, n_p) integer >= 1

    def __post_init__(self):
        if self.counts.shape != self.offsets.shape:
            raise ValueError("counts and offsets must share shape")
        if np.any(self.offsets < 1):
            raise ValueError("offsets must be >= 1")


@dataclass(frozen=True)
class RegressionData:
    features: np.ndarray  # (n, p)
    targets: np.ndarray   # (n,)


# ---------------------------------------------------------------------------
# model interface


class LogJointModel:
    """A target density: log_joint, grad and hvp over an unconstrained z."""

    dim: int

    def log_joint(self, z: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hvp(self, z: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[0] != self.dim:
            raise ValueError(f"expected dim {self.dim}, got {z.shape[0]}")
        if not np.all(np.isfinite(z)):
            raise ValueError("non-finite input")
        return z


class QuadraticModel(LogJointModel):
    """f(z) = -1/2 (z - m)^T A (z - m); exact surrogate targets and Gaussians."""

    def __init__(self, mean: np.ndarray, curvature: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.curvature = np.asarray(curvature, dtype=float)
        self.dim = self.mean.shape[0]

    def log_joint(self, z):
        z = self._check(z)
        delta = z - self.mean
        return float(-0.5 * delta @ (self.curvature @ delta))

    def grad(self, z):
        z = self._check(z)
        return -self.curvature @ (z - self.mean)

    def hvp(self, z, v):
        self._check(z)
        return -self.curvature @ np.asarray(v, dtype=float)


def standard_normal_model(d: int) -> QuadraticModel:
    return QuadraticModel(np.zeros(d), np.eye(d))


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    # log(1 / (1 + e^{-x})) without overflow
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                    x - np.log1p(np.exp(-np.abs(x))))


class LogisticModel(LogJointModel):
    """Bayesian logistic regression with N(0,1) priors on all coefficients.

    A bias column is prepended, so d = p + 1. The success probability is
    p_i = sigmoid(-(z . x_i)); y_i = 1 is taken to be the event with
    probability p_i.
    """

    def __init__(self, data: ClassificationData):
        n, p = data.features.shape
        self.x = np.hstack([np.ones((n, 1)), data.features])
        self.y = data.labels.astype(float)
        self.dim = p + 1

    def log_joint(self, z):
        z = self._check(z)
        eta = self.x @ z
        loglik = float(self.y @ _log_sigmoid(-eta)
                       + (1.0 - self.y) @ _log_sigmoid(eta))
        logprior = float(-0.5 * z @ z - 0.5 * self.dim * LOG_2PI)
        return loglik + logprior

    def grad(self, z):
        z = self._check(z)
        eta = self.x @ z
        s = 1.0 / (1.0 + np.exp(-eta))  # sigmoid(eta) = 1 - p_i
        return self.x.T @ ((1.0 - self.y) - s) - z

    def hvp(self, z, v):
        z = self._check(z)
        v = np.asarray(v, dtype=float)
        eta = self.x @ z
        s = 1.0 / (1.0 + np.exp(-eta))
        return -self.x.T @ (s * (1.0 - s) * (self.x @ v)) - v


class HierarchicalPoissonModel(LogJointModel):
    """Poisson counts with crossed random effects and log-scale hyperpriors.

    z packs (mu, log sigma_alpha, log sigma_beta, alpha_1..n_e, beta_1..n_p);
    log lambda_ep = mu + alpha_e + beta_p + log N_ep.
    """

    HYPER_SD = 10.0

    def __init__(self, data: FriskData):
        self.counts = data.counts.astype(float)
        self.log_offsets = np.log(data.offsets.astype(float))
        self.n_e, self.n_p = data.counts.shape
        self.dim = 3 + self.n_e + self.n_p
        # log(Y!) is a constant of the data
        self._log_fact = float(
            np.sum([np.sum(np.log(np.arange(1, int(y) + 1)))
                    for y in self.counts.ravel()]))

    def _unpack(self, z):
        mu, lsa, lsb = z[0], z[1], z[2]
        alpha = z[3:3 + self.n_e]
        beta = z[3 + self.n_e:]
        return mu, lsa, lsb, alpha, beta

    def _log_lambda(self, mu, alpha, beta):
        return mu + alpha[:, None] + beta[None, :] + self.log_offsets

    def log_joint(self, z):
        z = self._check(z)
        mu, lsa, lsb, alpha, beta = self._unpack(z)
        log_lam = self._log_lambda(mu, alpha, beta)
        lam = np.exp(log_lam)
        poisson = float(np.sum(self.counts * log_lam - lam)) - self._log_fact
        sd2 = self.HYPER_SD ** 2
        hyper = sum(-0.5 * t * t / sd2 - 0.5 * np.log(sd2) - 0.5 * LOG_2PI
                    for t in (mu, lsa, lsb))
        va, vb = np.exp(2.0 * lsa), np.exp(2.0 * lsb)
        pri_a = float(np.sum(-0.5 * alpha ** 2 / va - lsa - 0.5 * LOG_2PI))
        pri_b = float(np.sum(-0.5 * beta ** 2 / vb - lsb - 0.5 * LOG_2PI))
        return poisson + float(hyper) + pri_a + pri_b

    def grad(self, z):
        z = self._check(z)
        mu, lsa, lsb, alpha, beta = self._unpack(z)
        lam = np.exp(self._log_lambda(mu, alpha, beta))
        resid = self.counts - lam
        sd2 = self.HYPER_SD ** 2
        va, vb = np.exp(2.0 * lsa), np.exp(2.0 * lsb)
        g = np.empty(self.dim)
        g[0] = np.sum(resid) - mu / sd2
        g[1] = -self.n_e + float(np.sum(alpha ** 2)) / va - lsa / sd2
        g[2] = -self.n_p + float(np.sum(beta ** 2)) / vb - lsb / sd2
        g[3:3 + self.n_e] = resid.sum(axis=1) - alpha / va
        g[3 + self.n_e:] = resid.sum(axis=0) - beta / vb
        return g

    def hvp(self, z, v):
        z = self._check(z)
        v = np.asarray(v, dtype=float)
        mu, lsa, lsb, alpha, beta = self._unpack(z)
        vmu, vlsa, vlsb, valpha, vbeta = self._unpack(v)
        lam = np.exp(self._log_lambda(mu, alpha, beta))
        sd2 = self.HYPER_SD ** 2
        va, vb = np.exp(2.0 * lsa), np.exp(2.0 * lsb)
        # Poisson block: Hessian is -sum_ep lam_ep s s^T with s = e_mu+e_ae+e_bp
        s = vmu + valpha[:, None] + vbeta[None, :]
        ls = lam * s
        out = np.zeros(self.dim)
        out[0] = -np.sum(ls) - vmu / sd2
        out[3:3 + self.n_e] = -ls.sum(axis=1)
        out[3 + self.n_e:] = -ls.sum(axis=0)
        # random-effect priors: depend on (alpha, lsa) jointly
        out[1] = (-2.0 * float(np.sum(alpha ** 2)) / va * vlsa
                  + 2.0 * float(alpha @ valpha) / va - vlsa / sd2)
        out[2] = (-2.0 * float(np.sum(beta ** 2)) / vb * vlsb
                  + 2.0 * float(beta @ vbeta) / vb - vlsb / sd2)
        out[3:3 + self.n_e] += -valpha / va + 2.0 * alpha / va * vlsa
        out[3 + self.n_e:] += -vbeta / vb + 2.0 * beta / vb * vlsb
        return out


class BayesianNN(LogJointModel):
    """One-hidden-layer ReLU regression network with hierarchical priors.

    z packs (log alpha, log tau, W1, b1, w2, b2). alpha is the weight
    precision and tau the observation precision; both carry Gamma(shape=1,
    rate=0.1) priors on the positive scale, evaluated at e^z with the log
    Jacobian so z stays unconstrained.
    """

    GAMMA_RATE = 0.1

    def __init__(self, data: RegressionData, hidden: int = 50):
        self.x = np.asarray(data.features, dtype=float)
        self.y = np.asarray(data.targets, dtype=float)
        self.n, self.p = self.x.shape
        self.hidden = hidden
        self.n_weights = hidden * self.p + hidden + hidden + 1
        self.dim = 2 + self.n_weights

    def _unpack(self, z):
        h, p = self.hidden, self.p
        la, lt = z[0], z[1]
        i = 2
        w1 = z[i:i + h * p].reshape(h, p); i += h * p
        b1 = z[i:i + h]; i += h
        w2 = z[i:i + h]; i += h
        b2 = z[i]
        return la, lt, w1, b1, w2, b2

    def _pack(self, la, lt, w1, b1, w2, b2):
        return np.concatenate([[la, lt], w1.ravel(), b1, w2, [b2]])

    @staticmethod
    def _log_gamma_prior(log_x, rate):
        # shape-1 Gamma on x = e^{log_x}, with change-of-variables Jacobian
        return float(np.log(rate) - rate * np.exp(log_x) + log_x)

    def log_joint(self, z):
        z = self._check(z)
        la, lt, w1, b1, w2, b2 = self._unpack(z)
        alpha, tau = np.exp(la), np.exp(lt)
        pre = self.x @ w1.T + b1
        h = np.maximum(pre, 0.0)
        yhat = h @ w2 + b2
        r = self.y - yhat
        loglik = float(-0.5 * tau * r @ r
                       + 0.5 * self.n * (lt - LOG_2PI))
        wsq = float(w1.ravel() @ w1.ravel() + b1 @ b1 + w2 @ w2 + b2 * b2)
        logprior = (-0.5 * alpha * wsq
                    + 0.5 * self.n_weights * (la - LOG_2PI))
        logprior += self._log_gamma_prior(la, self.GAMMA_RATE)
        logprior += self._log_gamma_prior(lt, self.GAMMA_RATE)
        return loglik + float(logprior)

    def grad(self, z):
        z = self._check(z)
        la, lt, w1, b1, w2, b2 = self._unpack(z)
        alpha, tau = np.exp(la), np.exp(lt)
        pre = self.x @ w1.T + b1
        mask = (pre > 0).astype(float)
        h = pre * mask
        yhat = h @ w2 + b2
        r = self.y - yhat
        g_w2 = tau * (h.T @ r) - alpha * w2
        g_b2 = tau * float(np.sum(r)) - alpha * b2
        delta = (tau * r)[:, None] * w2[None, :] * mask  # (n, hidden)
        g_w1 = delta.T @ self.x - alpha * w1
        g_b1 = delta.sum(axis=0) - alpha * b1
        wsq = float(w1.ravel() @ w1.ravel() + b1 @ b1 + w2 @ w2 + b2 * b2)
        g_la = (-0.5 * alpha * wsq + 0.5 * self.n_weights
                - self.GAMMA_RATE * alpha + 1.0)
        g_lt = (-0.5 * tau * float(r @ r) + 0.5 * self.n
                - self.GAMMA_RATE * tau + 1.0)
        return self._pack(g_la, g_lt, g_w1, g_b1, g_w2, g_b2)

    def hvp(self, z, v):
        # tangent propagation through the analytic gradient; the ReLU mask is
        # treated as locally constant (second derivative 0 a.e.)
        z = self._check(z)
        v = np.asarray(v, dtype=float)
        la, lt, w1, b1, w2, b2 = self._unpack(z)
        dla, dlt, dw1, db1, dw2, db2 = self._unpack(v)
        alpha, tau = np.exp(la), np.exp(lt)
        dalpha, dtau = alpha * dla, tau * dlt
        pre = self.x @ w1.T + b1
        mask = (pre > 0).astype(float)
        h = pre * mask
        dh = (self.x @ dw1.T + db1) * mask
        yhat = h @ w2 + b2
        dyhat = dh @ w2 + h @ dw2 + db2
        r = self.y - yhat
        dr = -dyhat
        t_w2 = (dtau * (h.T @ r) + tau * (dh.T @ r + h.T @ dr)
                - dalpha * w2 - alpha * dw2)
        t_b2 = (dtau * float(np.sum(r)) + tau * float(np.sum(dr))
                - dalpha * b2 - alpha * db2)
        delta = (tau * r)[:, None] * w2[None, :] * mask
        ddelta = ((dtau * r + tau * dr)[:, None] * w2[None, :] * mask
                  + (tau * r)[:, None] * dw2[None, :] * mask)
        t_w1 = ddelta.T @ self.x - dalpha * w1 - alpha * dw1
        t_b1 = ddelta.sum(axis=0) - dalpha * b1 - alpha * db1
        wsq = float(w1.ravel() @ w1.ravel() + b1 @ b1 + w2 @ w2 + b2 * b2)
        dwsq = 2.0 * float(w1.ravel() @ dw1.ravel() + b1 @ db1
                           + w2 @ dw2 + b2 * db2)
        t_la = (-0.5 * dalpha * wsq - 0.5 * alpha * dwsq
                - self.GAMMA_RATE * dalpha)
        t_lt = (-0.5 * dtau * float(r @ r) - tau * float(r @ dr)
                - self.GAMMA_RATE * dtau)
        return self._pack(t_la, t_lt, t_w1, t_b1, t_w2, t_b2)


def build_logistic(data: ClassificationData) -> LogisticModel:
    return LogisticModel(data)


def build_hierarchical(data: FriskData) -> HierarchicalPoissonModel:
    return HierarchicalPoissonModel(data)


def build_bnn(data: RegressionData, hidden: int = 50) -> BayesianNN:
    return BayesianNN(data, hidden)


# ---------------------------------------------------------------------------
# dataset ingestion


def load_libsvm(path, num_features: int | None = None) -> ClassificationData:
    """Lines of "label idx:val ..." with 1-based indices, labels {+1,-1}."""
    rows = []
    labels = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                raw = float(parts[0])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad label {parts[0]!r}") from exc
            if raw not in (1.0, -1.0):
                raise ParseError(f"line {lineno}: label must be +1 or -1")
            entries = []
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":")
                    idx, val = int(idx_s), float(val_s)
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: bad entry {tok!r}") from exc
                if idx < 1:
                    raise ParseError(f"line {lineno}: index {idx} < 1")
                if num_features is not None and idx > num_features:
                    raise ParseError(
                        f"line {lineno}: index {idx} exceeds {num_features}")
                max_idx = max(max_idx, idx)
                entries.append((idx, val))
            rows.append(entries)
            labels.append(1 if raw == 1.0 else 0)
    if not rows:
        raise ParseError("no rows")
    p = num_features if num_features is not None else max_idx
    features = np.zeros((len(rows), p))
    for i, entries in enumerate(rows):
        for idx, val in entries:
            features[i, idx - 1] = val
    return ClassificationData(features, np.array(labels))


def load_csv(path, target_column: str, delimiter: str = ",") -> RegressionData:
    """Header-row CSV; delimiter configurable (',' or ';')."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            raise ParseError("no rows")
        cols = [c.strip().strip('"') for c in header.split(delimiter)]
        if target_column not in cols:
            raise ParseError(f"target column {target_column!r} not in header")
        tgt = cols.index(target_column)
        feats, targets = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            vals = line.split(delimiter)
            if len(vals) != len(cols):
                raise ParseError(f"line {lineno}: expected {len(cols)} fields")
            try:
                row = [float(v) for v in vals]
            except ValueError as exc:
                raise ParseError(f"line {lineno}: non-numeric field") from exc
            targets.append(row[tgt])
            feats.append([v for i, v in enumerate(row) if i != tgt])
    if not feats:
        raise ParseError("no rows")
    return RegressionData(np.array(feats), np.array(targets))


def load_frisk(path) -> FriskData:
    """Whitespace table: ethnicity_id precinct_id stops arrests."""
    cells = {}
    eth_ids, prec_ids = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(f"line {lineno}: expected 4 columns")
            try:
                e, p, stops, arrests = (int(parts[0]), int(parts[1]),
                                        int(parts[2]), int(parts[3]))
            except ValueError as exc:
                raise ParseError(f"line {lineno}: non-integer field") from exc
            if stops < 0 or arrests < 1:
                raise ParseError(f"line {lineno}: invalid counts")
            if e not in eth_ids:
                eth_ids.append(e)
            if p not in prec_ids:
                prec_ids.append(p)
            cells[(e, p)] = (stops, arrests)
    if not cells:
        raise ParseError("no rows")
    counts = np.zeros((len(eth_ids), len(prec_ids)), dtype=int)
    offsets = np.ones((len(eth_ids), len(prec_ids)), dtype=int)
    for (e, p), (stops, arrests) in cells.items():
        counts[eth_ids.index(e), prec_ids.index(p)] = stops
        offsets[eth_ids.index(e), prec_ids.index(p)] = arrests
    return FriskData(counts, offsets)


# ---------------------------------------------------------------------------
# synthetic generators


def synth_logistic(n: int, p: int, seed: int) -> ClassificationData:
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal(p + 1)
    x = rng.standard_normal((n, p))
    eta = truth[0] + x @ truth[1:]
    # unit logit scale keeps the labels informative but not deterministic
    spread = eta.std()
    if spread > 0:
        eta = eta / spread
    prob = 1.0 / (1.0 + np.exp(eta))  # matches the model's sign convention
    y = (rng.random(n) < prob).astype(int)
    return ClassificationData(x, y)


def synth_frisk(n_e: int, n_p: int, seed: int) -> FriskData:
    if n_e < 1 or n_p < 1:
        raise ValueError("n_e and n_p must be >= 1")
    rng = np.random.default_rng(seed)
    mu = -1.0
    alpha = 0.5 * rng.standard_normal(n_e)
    beta = 0.5 * rng.standard_normal(n_p)
    offsets = rng.integers(20, 200, size=(n_e, n_p))
    lam = np.exp(mu + alpha[:, None] + beta[None, :] + np.log(offsets))
    counts = rng.poisson(lam)
    return FriskData(counts, offsets)


def synth_regression(n: int, p: int, seed: int) -> RegressionData:
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    w = rng.standard_normal(p)
    y = np.tanh(x @ w) + 0.1 * rng.standard_normal(n)
    return RegressionData(x, y)
