"""Composite Gauss-Legendre rules shared by the profile and moment code."""
from functools import lru_cache

import numpy as np

GL_ORDER = 16


@lru_cache(maxsize=None)
def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(breaks, order=GL_ORDER):
    """Nodes and weights of a composite rule over consecutive ``breaks``.

    Parameters
    ----------
    breaks : array_like
        Ascending panel boundaries.
    order : int
        Gauss-Legendre points per panel.

    Returns
    -------
    nodes, weights : ndarray
        Flattened arrays, ``sum(weights * f(nodes))`` approximates the integral.
    """
    breaks = np.asarray(breaks, dtype=float)
    x, w = _gl(order)
    lo = breaks[:-1, None]
    half = 0.5 * np.diff(breaks)[:, None]
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def uniform_nodes(a, b, panels, order=GL_ORDER):
    return panel_nodes(np.linspace(a, b, panels + 1), order)


def graded_breaks(a, b, centers, width, growth=1.6, max_panel=None):
    """Panel boundaries on ``[a, b]`` refined geometrically around ``centers``.

    Panels start at ``width`` next to each center and grow by ``growth``
    moving away from it, capped at ``max_panel``. Used for integrands with
    Lorentzian peaks of half-width ``width``.
    """
    pts = {float(a), float(b)}
    cap = max_panel if max_panel is not None else (b - a)
    for c in centers:
        if not a <= c <= b:
            continue
        pts.add(float(c))
        for sign in (-1.0, 1.0):
            step, x = width, c
            while True:
                x = x + sign * step
                if x <= a or x >= b:
                    break
                pts.add(float(x))
                step = min(step * growth, cap)
    out = np.array(sorted(pts))
    # enforce the cap across gaps between centers too
    filled = [out[0]]
    for x in out[1:]:
        gap = x - filled[-1]
        if gap > cap:
            k = int(np.ceil(gap / cap))
            filled.extend(np.linspace(filled[-1], x, k + 1)[1:-1])
        filled.append(x)
    return np.array(filled)


def mean_over(func, a, b, panels=256, order=GL_ORDER):
    """Mean value of ``func`` over ``[a, b]`` by composite Gauss-Legendre."""
    nodes, weights = uniform_nodes(a, b, panels, order)
    return float(np.dot(weights, func(nodes)) / (b - a))
