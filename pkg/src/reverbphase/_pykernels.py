"""Pure numpy implementations of the hot kernels.

Signatures mirror the compiled ``_ckernels`` module exactly; see
:mod:`reverbphase.kernels` for the dispatch.
"""
import numpy as np


def dtft(h, freqs, dt, decays=None):
    """``dt * sum_n h[r, n] exp(-d_k n) exp(-2j pi f_k n dt)`` for every row and ``k``.

    Parameters
    ----------
    h : ndarray, shape (rows, n)
    freqs : ndarray, shape (nf,)
    dt : float
    decays : ndarray, shape (nf,), optional
        Per-frequency damping ``d_k`` per sample; zero by default.

    Returns
    -------
    ndarray, complex, shape (rows, nf)
    """
    h = np.ascontiguousarray(h, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    n = np.arange(h.shape[1], dtype=float)
    cycles = np.mod(np.outer(n, freqs * dt), 1.0)
    table = np.exp(-2j * np.pi * cycles)
    if decays is not None:
        table *= np.exp(-np.outer(n, np.asarray(decays, dtype=float)))
    return dt * (h @ table)


def modulated_sum(bands, gains, decays):
    """``out[r, n] = sum_b gains[b] * exp(-decays[b] * n) * bands[r, b, n]``."""
    bands = np.asarray(bands, dtype=float)
    n = np.arange(bands.shape[2], dtype=float)
    env = np.asarray(gains, dtype=float)[:, None] * np.exp(-np.outer(decays, n))
    return np.einsum("rbn,bn->rn", bands, env)
