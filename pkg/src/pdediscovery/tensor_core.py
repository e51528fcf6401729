"""Order-3 tensor helpers.

Tensors are plain ``numpy`` arrays of shape ``(S, T, N)`` (space, time,
component). The canonical flat layout is Fortran order, i.e. space varies
fastest, then time, then component, so the mode-3 unfolding has column
index ``t * S + s``. That column order is the one produced by
``np.kron(phi_row, psi_row)``, which is what lets

    mode3_matricize(tucker_reconstruct(G, Psi, Phi, Theta))
        == Theta @ mode3_matricize(G) @ np.kron(Phi, Psi).T

hold without any transposition bookkeeping downstream.
"""

import numpy as np


def _check3(t):
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"expected an order-3 tensor, got shape {t.shape}")
    return t


def flatten(t):
    """Return the canonical flat layout (space fastest) of a tensor."""
    return np.ravel(_check3(t), order="F")


def unflatten(values, dims):
    """Inverse of :func:`flatten`."""
    values = np.asarray(values)
    S, T, N = dims
    if values.size != S * T * N:
        raise ValueError(f"{values.size} values do not fill a {S}x{T}x{N} tensor")
    return values.reshape((S, T, N), order="F")


def mode3_matricize(t):
    """Mode-3 unfolding: an ``N x (S*T)`` matrix with column ``t*S + s``."""
    t = _check3(t)
    S, T, N = t.shape
    return np.ascontiguousarray(t.reshape(S * T, N, order="F").T)


def mode3_refold(m, S, T):
    """Inverse of :func:`mode3_matricize`."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[1] != S * T:
        raise ValueError(f"matrix of shape {m.shape} cannot refold to S={S}, T={T}")
    return m.T.reshape(S, T, m.shape[0], order="F")


def n_mode_product(t, m, mode):
    """Multiply tensor ``t`` by matrix ``m`` along ``mode`` (1, 2 or 3).

    ``Z = X x_n B``  <=>  ``Z_(n) = B X_(n)``.
    """
    t = _check3(t)
    m = np.asarray(m)
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    axis = mode - 1
    if m.ndim != 2 or m.shape[1] != t.shape[axis]:
        raise ValueError(
            f"matrix with {m.shape[-1]} columns cannot multiply mode {mode} "
            f"of extent {t.shape[axis]}"
        )
    out = np.tensordot(m, t, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def kronecker(a, b):
    """Standard Kronecker product, ``(a (x) b)[i*p + k, j*q + l] = a[i, j] b[k, l]``."""
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def tucker_reconstruct(core, psi, phi, theta):
    """Evaluate ``core x_1 psi x_2 phi x_3 theta``.

    Parameters
    ----------
    core : (P, Q, R) array
    psi : (S, P) array
    phi : (T, Q) array
    theta : (N, R) array

    Returns
    -------
    (S, T, N) array
    """
    core = _check3(core)
    psi, phi, theta = (np.atleast_2d(np.asarray(x)) for x in (psi, phi, theta))
    P, Q, R = core.shape
    if psi.shape[1] != P or phi.shape[1] != Q or theta.shape[1] != R:
        raise ValueError(
            f"factor shapes {psi.shape}, {phi.shape}, {theta.shape} "
            f"do not match core {core.shape}"
        )
    return np.einsum("pqr,sp,tq,nr->stn", core, psi, phi, theta, optimize=True)
