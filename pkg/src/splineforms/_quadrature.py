"""Gauss-Legendre rules on intervals and breakpoint panels."""

from __future__ import annotations

import functools

import numpy as np


@functools.lru_cache(maxsize=64)
def gauss_rule(n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    pts, wts = np.polynomial.legendre.leggauss(int(n))
    return pts, wts


def panel_rule(breaks, n: int):
    """Tensor of mapped Gauss points/weights, one row per panel.

    Parameters
    ----------
    breaks : array_like
        Strictly increasing panel boundaries, length n_panels + 1.
    n : int
        Points per panel.

    Returns
    -------
    points, weights : ndarray, shape (n_panels, n)
    """
    breaks = np.asarray(breaks, dtype=float)
    pts, wts = gauss_rule(n)
    lo = breaks[:-1, None]
    hi = breaks[1:, None]
    half = 0.5 * (hi - lo)
    return lo + half * (pts[None, :] + 1.0), half * wts[None, :]


def integrate_panels(func, breaks, n: int) -> float:
    """Integrate a vectorized scalar callable over [breaks[0], breaks[-1]]."""
    pts, wts = panel_rule(breaks, n)
    return float(np.sum(func(pts.ravel()) * wts.ravel()))


def split_interval(a: float, b: float, inner_breaks) -> np.ndarray:
    """Breakpoints of [a, b] refined by any inner_breaks lying strictly inside."""
    inner = np.asarray(inner_breaks, dtype=float)
    inner = inner[(inner > a) & (inner < b)]
    return np.concatenate(([a], np.unique(inner), [b]))
