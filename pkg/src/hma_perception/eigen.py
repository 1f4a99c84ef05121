"""Hermitian eigendecomposition by cyclic Jacobi on the real embedding.

A Hermitian ``R = A + iB`` is embedded as the real symmetric
``M = [[A, -B], [B, A]]``. Every eigenvalue of ``R`` appears twice in ``M``;
a real eigenvector ``[x; y]`` of ``M`` gives the complex eigenvector
``x + iy`` of ``R``. Jacobi rotations are applied to a whole stack of
matrices at once so that many frequency bins cost one pass of Python loops.
"""

import numpy as np

from .errors import NotHermitian

MAX_SWEEPS = 100
OFF_TOL = 1e-12


def _jacobi_symmetric(m):
    """Eigen-decompose a stack ``(B, n, n)`` of real symmetric matrices in place.

    Sweeps every ``(p, q)`` pair in row order until the off-diagonal Frobenius
    norm of every matrix drops below ``OFF_TOL`` times its full norm.
    """
    b, n, _ = m.shape
    v = np.broadcast_to(np.eye(n), (b, n, n)).copy()
    scale = np.sqrt((m * m).sum(axis=(1, 2)))
    scale[scale == 0] = 1.0
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(MAX_SWEEPS):
        off = np.sqrt((m[:, off_mask] ** 2).sum(axis=1))
        if np.all(off < OFF_TOL * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[:, p, q]
                active = np.abs(apq) > 1e-300
                if not active.any():
                    continue
                safe = np.where(active, apq, 1.0)
                theta = (m[:, q, q] - m[:, p, p]) / (2.0 * safe)
                big = np.abs(theta) > 1e150
                th = np.where(big, 1.0, theta)  # theta**2 would overflow; use t ~ 1 / (2 theta)
                t = np.sign(th) / (np.abs(th) + np.sqrt(th * th + 1.0))
                t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
                t[theta == 0] = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                c = np.where(active, c, 1.0)[:, None]
                s = np.where(active, s, 0.0)[:, None]
                # columns p, q then rows p, q: m <- J^T m J
                mp, mq = m[:, :, p].copy(), m[:, :, q].copy()
                m[:, :, p] = c * mp - s * mq
                m[:, :, q] = s * mp + c * mq
                mp, mq = m[:, p, :].copy(), m[:, q, :].copy()
                m[:, p, :] = c * mp - s * mq
                m[:, q, :] = s * mp + c * mq
                vp, vq = v[:, :, p].copy(), v[:, :, q].copy()
                v[:, :, p] = c * vp - s * vq
                v[:, :, q] = s * vp + c * vq
    return np.diagonal(m, axis1=1, axis2=2).copy(), v


def _complex_basis(r, w, v):
    """Pick ``C`` complex-orthonormal eigenvectors out of the ``2C`` real ones.

    Greedy: repeatedly take the real eigenvector whose complex image has the
    largest component outside the span already accepted (earliest on ties).
    Within a degenerate eigenspace that residual never drops below ``1/k``
    while the space is unfinished, so the choice is numerically safe.
    """
    c = r.shape[0]
    z = v[:c, :] + 1j * v[c:, :]  # (C, 2C) candidates
    basis = np.zeros((c, 0), dtype=complex)
    used = np.zeros(2 * c, dtype=bool)
    for _ in range(c):
        resid = z - basis @ (basis.conj().T @ z)
        norms = np.sqrt((np.abs(resid) ** 2).sum(axis=0))
        norms[used] = -1.0
        j = int(np.argmax(norms))
        used[j] = True
        vec = resid[:, j] / norms[j]
        # one re-orthogonalization pass
        vec = vec - basis @ (basis.conj().T @ vec)
        vec /= np.linalg.norm(vec)
        basis = np.column_stack([basis, vec])
    lam = np.real(np.einsum("ij,ik,kj->j", basis.conj(), r, basis))
    order = np.argsort(-lam, kind="stable")
    return lam[order], basis[:, order]


def check_hermitian(r, tol=1e-10):
    r = np.asarray(r)
    if r.ndim < 2 or r.shape[-1] != r.shape[-2]:
        raise NotHermitian(f"matrix must be square, got {r.shape}")
    scale = max(np.abs(r).max(), 1e-300)
    if np.abs(r - np.conj(np.swapaxes(r, -1, -2))).max() > tol * scale:
        raise NotHermitian("matrix differs from its conjugate transpose")


def hermitian_eig_batch(rs):
    """Eigenvalues (descending) and orthonormal eigenvectors for a stack ``(B, C, C)``.

    Returns ``(w, v)`` with ``w`` of shape ``(B, C)`` and ``v`` of shape
    ``(B, C, C)`` whose columns are eigenvectors.
    """
    rs = np.asarray(rs, dtype=complex)
    check_hermitian(rs)
    b, c, _ = rs.shape
    if c > 64:
        raise ValueError("matrices larger than 64x64 are not supported")
    a, bi = rs.real, rs.imag
    m = np.empty((b, 2 * c, 2 * c))
    m[:, :c, :c] = a
    m[:, :c, c:] = -bi
    m[:, c:, :c] = bi
    m[:, c:, c:] = a
    w_real, v_real = _jacobi_symmetric(m)
    ws = np.empty((b, c))
    vs = np.empty((b, c, c), dtype=complex)
    for k in range(b):
        order = np.argsort(-w_real[k], kind="stable")
        ws[k], vs[k] = _complex_basis(rs[k], w_real[k][order], v_real[k][:, order])
    return ws, vs


def hermitian_eig(r):
    """Eigen-decomposition of one Hermitian matrix; eigenvalues sorted descending."""
    r = np.asarray(r, dtype=complex)
    check_hermitian(r)
    w, v = hermitian_eig_batch(r[None])
    return w[0], v[0]
