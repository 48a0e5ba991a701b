"""Pointwise tensor algebra for 3-component fields.

Every function broadcasts over arbitrary leading axes, so the same kernels
serve single vectors in unit tests and full grid fields in the solver.
Index conventions: rank-2 arrays act on the last two axes, the rank-4 and
rank-6 material tensors are constant (no leading axes) and contract against
field quantities.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "cross_matrix",
    "sym_part",
    "skw_part",
    "matvec",
    "mat_t_vec",
    "matmat",
    "ddot",
    "outer",
    "outer3",
    "transverse_projector",
    "rank4_apply",
    "rank4_form",
    "rank6_apply",
    "rank6_form",
    "vec_dot_rank6",
    "mat_ddot_rank6",
]


def cross_matrix(a):
    """Skew matrix of a, so that cross_matrix(a) @ b == cross(a, b)."""
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape + (3,))
    a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2]
    out[..., 0, 1] = -a3
    out[..., 0, 2] = a2
    out[..., 1, 0] = a3
    out[..., 1, 2] = -a1
    out[..., 2, 0] = -a2
    out[..., 2, 1] = a1
    return out


def sym_part(m):
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def skw_part(m):
    return 0.5 * (m - np.swapaxes(m, -1, -2))


def matvec(m, b):
    return np.einsum("...ij,...j->...i", m, b)


def mat_t_vec(m, b):
    """Transpose action, (m^T b)_i = sum_j m_ji b_j."""
    return np.einsum("...ji,...j->...i", m, b)


def matmat(m, n):
    return np.einsum("...ij,...jk->...ik", m, n)


def ddot(m, n):
    """Frobenius pairing m : n."""
    return np.einsum("...ij,...ij->...", m, n)


def outer(a, b):
    return np.einsum("...i,...j->...ij", a, b)


def outer3(m, a):
    """Rank-3 outer product (m x a)_ijk = m_ij a_k."""
    return np.einsum("...ij,...k->...ijk", m, a)


def transverse_projector(d):
    """|d|^2 I - d x d, the unnormalized projector orthogonal to d."""
    n2 = np.sum(d * d, axis=-1)
    return n2[..., None, None] * np.eye(3) - outer(d, d)


def rank4_apply(t4, m):
    """(t4 : m)_ij = sum_kl t4_ijkl m_kl."""
    return np.einsum("ijkl,...kl->...ij", t4, m)


def rank4_form(m, t4, n):
    """Scalar m : t4 : n."""
    return np.einsum("...ij,ijkl,...kl->...", m, t4, n)


def rank6_apply(t6, g):
    """(t6 . g)_ijk = sum_lmn t6_ijklmn g_lmn."""
    return np.einsum("ijklmn,...lmn->...ijk", t6, g)


def rank6_form(g, t6, gp):
    """Scalar triple contraction g . t6 . gp."""
    return np.einsum("...ijk,ijklmn,...lmn->...", g, t6, gp)


def vec_dot_rank6(b, t6):
    """Contract a vector into the third slot, (b . t6)_ijlmn."""
    return np.einsum("...k,ijklmn->...ijlmn", b, t6)


def mat_ddot_rank6(m, t6):
    """Contract a matrix into the first two slots, (m : t6)_klmn."""
    return np.einsum("...ij,ijklmn->...klmn", m, t6)
