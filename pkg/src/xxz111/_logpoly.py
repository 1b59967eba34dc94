"""Products of linear factors ``prod_x (1 + w_x z)`` in log-magnitude form.

Coefficients span hundreds of orders of magnitude (``q**(2l)`` with ``|l|``
up to ``L/2`` per site), so they are kept as ``log|c_n|`` (``-inf`` for
zero) plus an optional phase.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

NEG_INF = -np.inf


def real_product(log_weights) -> np.ndarray:
    """``log`` of the coefficients of ``prod_i (1 + exp(log_weights[i]) z)``."""
    log_weights = np.asarray(log_weights, dtype=float)
    N = len(log_weights)
    c = np.full(N + 1, NEG_INF)
    c[0] = 0.0
    for k, lw in enumerate(log_weights):
        # c_n <- c_n + w c_{n-1}, touching only the k+2 live entries
        head = c[: k + 2]
        shifted = np.concatenate(([NEG_INF], head[:-1] + lw))
        c[: k + 2] = np.logaddexp(head, shifted)
    return c


def _cadd(lm1, ph1, lm2, ph2):
    m = np.maximum(lm1, lm2)
    finite = np.isfinite(m)
    safe = np.where(finite, m, 0.0)
    z = np.exp(lm1 - safe + 1j * ph1) + np.exp(lm2 - safe + 1j * ph2)
    with np.errstate(divide="ignore"):
        lm = np.where(finite, safe + np.log(np.abs(z)), NEG_INF)
    ph = np.where(finite, np.angle(z), 0.0)
    return lm, ph


def complex_product(log_weights, phases) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``prod_i (1 + exp(lw_i + i*phase_i) z)`` as (log|c|, arg c)."""
    log_weights = np.asarray(log_weights, dtype=float)
    phases = np.asarray(phases, dtype=float)
    N = len(log_weights)
    lm = np.full(N + 1, NEG_INF)
    ph = np.zeros(N + 1)
    lm[0] = 0.0
    for k, (lw, p) in enumerate(zip(log_weights, phases)):
        h_lm, h_ph = lm[: k + 2], ph[: k + 2]
        s_lm = np.concatenate(([NEG_INF], h_lm[:-1] + lw))
        s_ph = np.concatenate(([0.0], h_ph[:-1] + p))
        lm[: k + 2], ph[: k + 2] = _cadd(h_lm, h_ph, s_lm, s_ph)
    return lm, ph


def exact_product(weights) -> list[Fraction]:
    """Exact coefficients of ``prod_i (1 + w_i z)`` for rational weights."""
    c = [Fraction(1)]
    for w in weights:
        nxt = c + [Fraction(0)]
        for n in range(len(c), 0, -1):
            nxt[n] += w * c[n - 1]
        c = nxt
    return c


def logsumexp(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return NEG_INF
    m = np.max(x)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(x - m))))
