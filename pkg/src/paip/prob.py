"""Finite distributions and Dirichlet-categorical machinery.

Distributions are plain float64 numpy arrays.  ``categorical`` validates and
returns a read-only copy; everything else accepts any array-like whose
entries are non-negative and sum to one.  All logarithms are natural.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .errors import AbsoluteContinuityViolation, InvalidDistribution

NORM_TOL = 1e-12

# Bernoulli-number coefficients of the digamma asymptotic series, in powers of 1/x^2.
_DIGAMMA_SERIES = (
    1.0 / 12,
    -1.0 / 120,
    1.0 / 252,
    -1.0 / 240,
    5.0 / 660,
    -691.0 / 32760,
    1.0 / 12,
)


def categorical(probs, tol: float = NORM_TOL) -> np.ndarray:
    """Validate ``probs`` as a probability vector (any shape).

    Inputs whose total is within ``tol`` of one are renormalized, anything
    further off is rejected.
    """
    p = np.array(probs, dtype=float)
    if p.size == 0:
        raise InvalidDistribution("empty index set")
    if not np.all(np.isfinite(p)):
        raise InvalidDistribution("non-finite probability")
    if np.any(p < 0):
        raise InvalidDistribution(f"negative probability {p.min():.3g}")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise InvalidDistribution(f"probabilities sum to {total!r}")
    p /= total
    p.setflags(write=False)
    return p


def normalize(weights, axis=None) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    total = w.sum(axis=axis, keepdims=axis is not None)
    if np.any(total <= 0):
        raise InvalidDistribution("cannot normalize zero mass")
    return w / total


def normalize_log(log_weights) -> tuple[np.ndarray, float]:
    """Max-shifted normalization; returns (probabilities, log normalizer)."""
    lw = np.asarray(log_weights, dtype=float)
    m = lw.max()
    if not np.isfinite(m):
        raise InvalidDistribution("all log weights are -inf")
    w = np.exp(lw - m)
    s = w.sum()
    return w / s, float(m + np.log(s))


def xlogy(x, y) -> np.ndarray:
    """x * log(y) with 0 * log(0) := 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    mask = np.broadcast_to(x != 0, out.shape)
    with np.errstate(divide="ignore"):
        out[mask] = (np.broadcast_to(x, out.shape)[mask]
                     * np.log(np.broadcast_to(y, out.shape)[mask]))
    return out


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    return float(-xlogy(p, p).sum())


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InvalidDistribution(f"shape {p.shape} vs {q.shape}")
    bad = (p > 0) & (q <= 0)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise AbsoluteContinuityViolation(f"p{idx} > 0 but q{idx} = 0")
    support = p > 0
    val = float(np.sum(p[support] * (np.log(p[support]) - np.log(q[support]))))
    return max(val, 0.0) if val > -1e-15 else val


def mutual_information(joint) -> float:
    """I(X:Y) of a 2-D joint table with X on rows and Y on columns."""
    j = np.asarray(joint, dtype=float)
    if j.ndim != 2:
        raise InvalidDistribution("mutual_information expects a 2-D joint")
    px = j.sum(axis=1, keepdims=True)
    py = j.sum(axis=0, keepdims=True)
    support = j > 0
    ratio = j[support] / (px * py)[support]
    return max(float(np.sum(j[support] * np.log(ratio))), 0.0)


def digamma(x) -> np.ndarray:
    """Digamma for positive arguments.

    Arguments below 6 are lifted with psi(x) = psi(x + 1) - 1/x, then the
    asymptotic series is evaluated (absolute error below 1e-12).
    """
    x = np.array(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("digamma defined here for positive arguments only")
    shift = np.zeros_like(x)
    small = x < 6.0
    while np.any(small):
        shift[small] -= 1.0 / x[small]
        x[small] += 1.0
        small = x < 6.0
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    for c in reversed(_DIGAMMA_SERIES):
        series = (series + c) * inv2
    return np.log(x) - 0.5 / x - series + shift


def expected_log_prob(alpha, axis: int = -1) -> np.ndarray:
    """E[log theta_k] under Dirichlet(alpha), row-wise along ``axis``."""
    a = np.asarray(alpha, dtype=float)
    return digamma(a) - digamma(a.sum(axis=axis, keepdims=True))


def log_rising(alpha, n) -> np.ndarray:
    """log of alpha (alpha+1) ... (alpha+n-1); zero for n == 0.

    Summing logs of the sequential factors keeps full precision for the huge
    concentrations used to encode known parameters.
    """
    a, n = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(n))
    out = np.zeros(a.shape)
    top = int(n.max()) if n.size else 0
    for j in range(top):
        live = n > j
        out[live] += np.log(a[live] + j)
    return out


def log_polya(alpha, counts, axis: int = -1) -> np.ndarray:
    """Log Dirichlet-categorical likelihood of an observation sequence.

    Equal to the sum of the log sequential predictives
    (alpha_k + c_k) / (sum(alpha) + C) as the counts accrue; order
    independent.
    """
    a = np.asarray(alpha, dtype=float)
    c = np.asarray(counts)
    a_b, c_b = np.broadcast_arrays(a, c)
    num = log_rising(a_b, c_b).sum(axis=axis)
    den = log_rising(a_b.sum(axis=axis), c_b.sum(axis=axis))
    return num - den


def polya_predictive(alpha, counts) -> float:
    return float(np.exp(log_polya(alpha, counts)))


def dirichlet_log_norm(alpha, axis: int = -1) -> np.ndarray:
    """log B(alpha) = sum log Gamma(alpha_k) - log Gamma(sum alpha)."""
    a = np.asarray(alpha, dtype=float)
    return gammaln(a).sum(axis=axis) - gammaln(a.sum(axis=axis))


def dirichlet_kl(alpha, beta, axis: int = -1) -> np.ndarray:
    """KL[Dir(alpha) || Dir(beta)] row-wise along ``axis``."""
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    return (dirichlet_log_norm(b, axis) - dirichlet_log_norm(a, axis)
            + ((a - b) * expected_log_prob(a, axis)).sum(axis=axis))


def make_rng(seed) -> np.random.Generator:
    """Generator for a 64-bit seed (or a SeedSequence)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_categorical(p, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    cdf = np.cumsum(np.asarray(p, dtype=float).ravel())
    cdf /= cdf[-1]
    u = rng.random()
    return int(min(np.searchsorted(cdf, u, side="right"), cdf.size - 1))
