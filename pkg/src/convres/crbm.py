"""Conditional RBM over the label layer, driven by the encoded sentence vector.

Energy terms for labels y in {0,1}^L and hidden units h in {0,1}^J:

    E_con(y, x) = -y^T W x
    E_rbm(y, h) = -y^T G h - y^T b - c^T h

Summing h out analytically gives the unnormalized conditional mass

    M(y) = exp(y^T W x + y^T b) * prod_j (1 + exp(y^T G[:,j] + c_j)),

which supports exact marginals by enumeration for small label counts.
Inference alternatives (mean field, Gibbs) use the closed-form conditionals

    P(h_j = 1 | y, x) = sigmoid(y^T G[:,j] + c_j)
    P(y_l = 1 | h, x) = sigmoid(G[l,:] h + b_l + W[l,:] x)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import CapacityError
from .numeric import ParamTensor, SeededRng, logsumexp, sigmoid, softplus

EXACT_LABEL_LIMIT = 20


class CrbmHead:
    kind = "crbm"

    def __init__(self, n_labels: int, input_dim: int, n_hidden: int, rng: SeededRng):
        self.n_labels = n_labels
        self.input_dim = input_dim
        self.n_hidden = n_hidden
        self.W = ParamTensor("crbm_w", rng.uniform(-0.01, 0.01, (n_labels, input_dim)))
        self.G = ParamTensor("crbm_g", rng.uniform(-0.01, 0.01, (n_labels, n_hidden)))
        self.b = ParamTensor("crbm_b", np.zeros(n_labels))
        self.c = ParamTensor("crbm_c", np.zeros(n_hidden))

    def params(self) -> list[ParamTensor]:
        return [self.W, self.G, self.b, self.c]

    def param_count(self) -> int:
        return sum(p.size for p in self.params())


def all_label_configs(n_labels: int) -> np.ndarray:
    """All 2^L binary label vectors, row i being the bits of i (LSB first)."""
    codes = np.arange(2 ** n_labels, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n_labels)) & 1).astype(np.float64)


def crbm_cond_h(y: np.ndarray, x: np.ndarray, head: CrbmHead) -> np.ndarray:
    """P(h_j = 1 | y, x) for every hidden unit."""
    return sigmoid(np.asarray(y, dtype=np.float64) @ head.G.value + head.c.value)


def crbm_cond_y(h: np.ndarray, x: np.ndarray, head: CrbmHead) -> np.ndarray:
    """P(y_l = 1 | h, x) for every label."""
    return sigmoid(
        head.G.value @ np.asarray(h, dtype=np.float64) + head.b.value + head.W.value @ x
    )


def _log_mass(x: np.ndarray, head: CrbmHead, configs: np.ndarray) -> np.ndarray:
    """log M(y) for each row y of `configs`, with h summed out."""
    drive = head.W.value @ x + head.b.value
    return configs @ drive + softplus(configs @ head.G.value + head.c.value).sum(axis=1)


def crbm_exact_marginals(x: np.ndarray, head: CrbmHead) -> tuple[np.ndarray, float]:
    """Exact label marginals and log partition by enumerating label configs."""
    if head.n_labels > EXACT_LABEL_LIMIT:
        raise CapacityError(
            f"exact enumeration supports at most {EXACT_LABEL_LIMIT} labels, "
            f"got {head.n_labels}"
        )
    configs = all_label_configs(head.n_labels)
    log_mass = _log_mass(x, head, configs)
    log_z = float(logsumexp(log_mass))
    probs = np.exp(log_mass - log_z)
    return probs @ configs, log_z


def crbm_meanfield_predict(x: np.ndarray, head: CrbmHead, iters: int = 20) -> np.ndarray:
    """Fixed-point marginal estimate by alternating expectation updates."""
    drive = head.W.value @ x + head.b.value
    mu_y = sigmoid(drive)
    for _ in range(max(1, iters)):
        mu_h = sigmoid(mu_y @ head.G.value + head.c.value)
        mu_y = sigmoid(head.G.value @ mu_h + drive)
    return mu_y


def predict_marginals(x: np.ndarray, head: CrbmHead, method: str = "auto") -> np.ndarray:
    """Label marginals; exact when the label count permits, else mean field."""
    if method == "auto":
        method = "exact" if head.n_labels <= EXACT_LABEL_LIMIT else "meanfield"
    if method == "exact":
        marginals, _ = crbm_exact_marginals(x, head)
        return marginals
    if method == "meanfield":
        return crbm_meanfield_predict(x, head)
    raise ValueError(f"unknown CRBM prediction method {method!r}")


@dataclass
class CrbmGradient:
    """Ascent direction on the conditional log likelihood, per parameter."""

    dW: np.ndarray
    dG: np.ndarray
    db: np.ndarray
    dc: np.ndarray


def _positive_stats(x: np.ndarray, y: np.ndarray, head: CrbmHead) -> CrbmGradient:
    h_hat = crbm_cond_h(y, x, head)
    return CrbmGradient(
        dW=np.outer(y, x),
        dG=np.outer(y, h_hat),
        db=np.asarray(y, dtype=np.float64).copy(),
        dc=h_hat,
    )


def crbm_exact_gradient(x: np.ndarray, y: np.ndarray, head: CrbmHead) -> CrbmGradient:
    """Exact gradient of log P(y | x) via an enumerated negative phase."""
    if head.n_labels > EXACT_LABEL_LIMIT:
        raise CapacityError("exact gradient needs enumerable label configurations")
    pos = _positive_stats(x, y, head)
    configs = all_label_configs(head.n_labels)
    log_mass = _log_mass(x, head, configs)
    probs = np.exp(log_mass - logsumexp(log_mass))
    h_hat = sigmoid(configs @ head.G.value + head.c.value)  # (configs, J)
    e_y = probs @ configs
    return CrbmGradient(
        dW=pos.dW - np.outer(e_y, x),
        dG=pos.dG - (configs * probs[:, None]).T @ h_hat,
        db=pos.db - e_y,
        dc=pos.dc - probs @ h_hat,
    )


def crbm_log_likelihood(x: np.ndarray, y: np.ndarray, head: CrbmHead) -> float:
    """Exact log P(y | x) by enumeration."""
    if head.n_labels > EXACT_LABEL_LIMIT:
        raise CapacityError("exact likelihood needs enumerable label configurations")
    configs = all_label_configs(head.n_labels)
    log_mass = _log_mass(x, head, configs)
    own = float(
        np.asarray(y, dtype=np.float64) @ (head.W.value @ x + head.b.value)
        + softplus(np.asarray(y, dtype=np.float64) @ head.G.value + head.c.value).sum()
    )
    return own - float(logsumexp(log_mass))


def crbm_cd_gradient(
    x: np.ndarray,
    y: np.ndarray,
    head: CrbmHead,
    gibbs_steps: int = 1,
    rng: SeededRng | None = None,
) -> CrbmGradient:
    """Contrastive-divergence ascent direction for log P(y | x).

    The negative phase runs a Gibbs chain started at the observed labels,
    alternating the two closed-form conditionals for `gibbs_steps` rounds;
    hidden statistics are Rao-Blackwellized through P(h | y, x).
    """
    pos = _positive_stats(x, y, head)
    y_cur = np.asarray(y, dtype=np.float64)
    for _ in range(max(1, gibbs_steps)):
        ph = crbm_cond_h(y_cur, x, head)
        h = (rng.uniform(size=ph.shape) < ph).astype(np.float64)
        py = crbm_cond_y(h, x, head)
        y_cur = (rng.uniform(size=py.shape) < py).astype(np.float64)
    h_hat = crbm_cond_h(y_cur, x, head)
    return CrbmGradient(
        dW=pos.dW - np.outer(y_cur, x),
        dG=pos.dG - np.outer(y_cur, h_hat),
        db=pos.db - y_cur,
        dc=pos.dc - h_hat,
    )
