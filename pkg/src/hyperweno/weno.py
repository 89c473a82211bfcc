"""WENO5 candidate polynomials, smoothness indicators, and reconstruction.

All per-interface arrays carry N+1 rows: row k belongs to the interface at
``x_lo + k*dx``, so both domain-boundary interfaces are always present.  A
ghost width of 3 on each side covers every stencil (the right-biased
candidate on the outermost stencil reaches three cells past the interface).

The interface value is a convex combination of three third-order candidate
reconstructions.  How the combination weights are produced is up to the
caller: :func:`classical_weights` implements the smoothness-indicator
weighting, while the learned schemes pass softmax outputs straight through.
Candidate evaluation and the convex combination work on ndarrays and on
autodiff Tensors alike; the indicator/weight path is numpy-only since it is
never differentiated.
"""

from __future__ import annotations

import numpy as np

from .autodiff import value_of

__all__ = [
    "GHOST_WIDTH",
    "OPTIMAL_WEIGHTS_LEFT",
    "OPTIMAL_WEIGHTS_RIGHT",
    "WENO_EPSILON",
    "WENO_POWER",
    "candidates",
    "smoothness_indicators",
    "classical_weights",
    "reconstruct",
]

GHOST_WIDTH = 3

# Convex coefficients that make the combined reconstruction fifth-order on
# smooth data, ordered to match the candidate stencils below.  The mirrored
# stencil ordering has the same values.
OPTIMAL_WEIGHTS_LEFT = np.array([0.1, 0.6, 0.3])
OPTIMAL_WEIGHTS_RIGHT = np.array([0.1, 0.6, 0.3])

WENO_EPSILON = 1e-6
WENO_POWER = 2


def candidates(padded):
    """Candidate interface values from a ghost-padded cell field.

    ``padded`` has shape (N + 6, C).  Returns ``(q_minus, q_plus)``, each a
    tuple of three (N+1, C) arrays.  With p[j] the padded field, the
    left-biased candidates at interface k are

        q0m = (2 p[k]   - 7 p[k+1] + 11 p[k+2]) / 6      cells {k-3, k-2, k-1}
        q1m = ( -p[k+1] + 5 p[k+2] +  2 p[k+3]) / 6      cells {k-2, k-1, k}
        q2m = (2 p[k+2] + 5 p[k+3] -    p[k+4]) / 6      cells {k-1, k, k+1}

    and the right-biased ones use the mirrored stencils

        q0p = (11 p[k+3] - 7 p[k+4] + 2 p[k+5]) / 6      cells {k, k+1, k+2}
        q1p = ( 2 p[k+2] + 5 p[k+3] -   p[k+4]) / 6      cells {k-1, k, k+1}
        q2p = (  -p[k+1] + 5 p[k+2] + 2 p[k+3]) / 6      cells {k-2, k-1, k}
    """
    p = padded
    n_pad = value_of(p).shape[0]
    m = n_pad - 5  # rows = N + 1
    s0, s1, s2, s3, s4, s5 = (p[j : j + m] for j in range(6))
    q0m = (s0 * 2.0 - s1 * 7.0 + s2 * 11.0) * (1.0 / 6.0)
    q1m = (s1 * -1.0 + s2 * 5.0 + s3 * 2.0) * (1.0 / 6.0)
    q2m = (s2 * 2.0 + s3 * 5.0 - s4) * (1.0 / 6.0)
    q0p = (s3 * 11.0 - s4 * 7.0 + s5 * 2.0) * (1.0 / 6.0)
    # the inner right-biased stencils coincide with left-biased ones
    q1p = q2m
    q2p = q1m
    return (q0m, q1m, q2m), (q0p, q1p, q2p)


def smoothness_indicators(padded: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jiang-Shu indicators for both biased stencil sets.

    Returns ``(beta_minus, beta_plus)``, each (N+1, 3, C), stencil-ordered to
    match :func:`candidates`.  Zero on constant data, equal on linear data,
    large on the stencil that crosses a discontinuity.
    """
    p = np.asarray(padded, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    m = p.shape[0] - 5
    s = [p[j : j + m] for j in range(6)]
    c1, c2 = 13.0 / 12.0, 0.25

    def beta(a, b, c):
        return c1 * np.square(a - 2.0 * b + c) + c2 * np.square(a - 4.0 * b + 3.0 * c)

    def beta_mid(a, b, c):
        return c1 * np.square(a - 2.0 * b + c) + c2 * np.square(a - c)

    bm = np.stack(
        [beta(s[0], s[1], s[2]), beta_mid(s[1], s[2], s[3]), beta(s[4], s[3], s[2])],
        axis=1,
    )
    bp = np.stack(
        [beta(s[5], s[4], s[3]), beta_mid(s[4], s[3], s[2]), beta(s[1], s[2], s[3])],
        axis=1,
    )
    return bm, bp


def classical_weights(
    beta: np.ndarray,
    d: np.ndarray,
    eps: float = WENO_EPSILON,
    power: int = WENO_POWER,
) -> np.ndarray:
    """Normalized nonlinear weights ``d_k / (eps + beta_k)^power``.

    ``beta`` has the stencil axis second, (..., 3, ...); ``d`` is a
    probability triple.  Rows sum to one by construction.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    shape = [1] * beta.ndim
    shape[1] = 3
    raw = np.asarray(d, dtype=np.float64).reshape(shape) / (eps + beta) ** power
    return raw / raw.sum(axis=1, keepdims=True)


def reconstruct(q_minus, q_plus, w_minus, w_plus):
    """Convex combination of the candidates: interface states (N+1, C).

    Weight arrays are indexed ``w[:, k, :]`` with k the stencil; a trailing
    axis of length 1 broadcasts one weight set over all components (the
    learned path) while length C gives componentwise weights (classical).
    """
    u_minus = (
        w_minus[:, 0, :] * q_minus[0]
        + w_minus[:, 1, :] * q_minus[1]
        + w_minus[:, 2, :] * q_minus[2]
    )
    u_plus = (
        w_plus[:, 0, :] * q_plus[0]
        + w_plus[:, 1, :] * q_plus[1]
        + w_plus[:, 2, :] * q_plus[2]
    )
    return u_minus, u_plus
