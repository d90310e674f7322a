"""Numpy implementations of the hot numeric kernels.

These are the fallback used when the compiled extension is unavailable;
both backends implement the same contracts (float64, max-subtracted
softmax) and are cross-checked by the kernel parity tests.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def softmax_scores(g: np.ndarray, Y: np.ndarray, tau: float) -> np.ndarray:
    """p = softmax(Y @ g / tau), computed stably in double precision."""
    z = Y.astype(np.float64, copy=False) @ np.asarray(g, dtype=np.float64)
    z /= tau
    z -= z.max()
    np.exp(z, out=z)
    z /= z.sum()
    return z


def pair_losses(F: np.ndarray, G: np.ndarray) -> tuple[float, float]:
    """In-batch contrastive losses (video-to-text, text-to-video).

    Z[i, j] = f_i . g_j; each direction is the mean softmax cross-entropy
    of the diagonal against its row (v2t) or column (t2v).
    """
    F = np.asarray(F, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    Z = F @ G.T
    B = Z.shape[0]
    diag = np.diag(Z)
    lse_rows = _logsumexp(Z, axis=1)
    lse_cols = _logsumexp(Z, axis=0)
    l_v2t = float(np.mean(lse_rows - diag))
    l_t2v = float(np.mean(lse_cols - diag))
    return l_v2t, l_t2v


def sym_loss_and_grads(
    F: np.ndarray, G: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Sum of both losses plus analytic gradients w.r.t. every f_i and g_i."""
    F = np.asarray(F, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    Z = F @ G.T
    B = Z.shape[0]
    P = _softmax(Z, axis=1)       # row softmax: v2t
    Q = _softmax(Z.T, axis=1)     # row softmax of Z^T: t2v
    diag = np.diag(Z)
    loss = float(
        np.mean(_logsumexp(Z, axis=1) - diag)
        + np.mean(_logsumexp(Z, axis=0) - diag)
    )
    eye = np.eye(B)
    dZ = (P - eye) / B + (Q - eye).T / B
    dF = dZ @ G
    dG = dZ.T @ F
    return loss, dF, dG


def _softmax(Z: np.ndarray, axis: int) -> np.ndarray:
    shifted = Z - Z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _logsumexp(Z: np.ndarray, axis: int) -> np.ndarray:
    m = Z.max(axis=axis)
    return m + np.log(np.exp(Z - np.expand_dims(m, axis)).sum(axis=axis))
