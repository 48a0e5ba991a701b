"""Free-energy densities, functionals and the variational derivative.

Three equivalent densities are provided for the elastic part: the Frank
form in K1..K3, the split form in k1..k5 (valid for non-unit directors and
nonnegative termwise) and the tensor form built from the rank-4 and rank-6
material tensors. Nodal values of all three agree to roundoff whenever
|d| = 1 nodewise, because the forms differ only by pointwise algebra in
(d, grad d).

In periodic collocation mode the tensor-form variational derivative is the
exact gradient of the discrete (nodal quadrature) free energy, which is
what makes the semi-discrete energy identity hold to integrator order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import curl, div_mat, director_project, grad, integrate, scalar_grad
from .tensors import (
    cross_matrix,
    mat_t_vec,
    matvec,
    outer,
    outer3,
    rank4_apply,
    rank4_form,
    rank6_apply,
    rank6_form,
    skw_part,
)


@dataclass(frozen=True)
class EnergyBreakdown:
    splay: float
    twist_like: float
    k3_term: float
    k4_term: float
    k5_term: float
    magnetic_par: float
    magnetic_perp: float
    total: float

    @property
    def elastic(self):
        return self.splay + self.twist_like + self.k3_term + self.k4_term + self.k5_term

    @property
    def magnetic(self):
        return self.magnetic_par + self.magnetic_perp


def _measures(grid, d):
    g = grad(grid, d)
    dv = np.trace(g, axis1=-2, axis2=-1)
    c = curl(grid, d)
    return g, dv, c


def oseen_frank_density(grid, params, d, form="k"):
    """Nodal elastic density in one of the three forms (K, k, tensor)."""
    d = np.asarray(d, dtype=float)
    g, dv, c = _measures(grid, d)
    if form == "K":
        dcurl = np.sum(d * c, axis=-1)
        dxc = np.cross(d, c)
        return 0.5 * (
            params.K1 * dv**2
            + params.K2 * dcurl**2
            + params.K3 * np.sum(dxc * dxc, axis=-1)
        )
    if form == "k":
        n2 = np.sum(d * d, axis=-1)
        dcurl = np.sum(d * c, axis=-1)
        dxc = np.cross(d, c)
        return 0.5 * (
            params.k1 * dv**2
            + params.k2 * np.sum(c * c, axis=-1)
            + params.k3 * n2 * dv**2
            + params.k4 * dcurl**2
            + params.k5 * np.sum(dxc * dxc, axis=-1)
        )
    if form == "tensor":
        gd = outer3(g, d)
        return 0.5 * (
            rank4_form(g, params.elastic_rank4, g)
            + rank6_form(gd, params.elastic_rank6, gd)
        )
    raise ValueError("form must be K, k or tensor")


def magnetic_density(params, d, H):
    """Field-coupling density, nonnegative for the chi < 0 convention."""
    dH = np.sum(d * H, axis=-1)
    dxH = np.cross(d, H)
    return -0.5 * params.chi_par * dH**2 - 0.5 * params.chi_perp * np.sum(
        dxH * dxH, axis=-1
    )


def total_free_energy(grid, params, d, H=None) -> EnergyBreakdown:
    """Quadrature of the full free energy with a per-term breakdown."""
    d = np.asarray(d, dtype=float)
    g, dv, c = _measures(grid, d)
    n2 = np.sum(d * d, axis=-1)
    dcurl = np.sum(d * c, axis=-1)
    dxc = np.cross(d, c)
    splay = 0.5 * params.k1 * integrate(grid, dv**2)
    twist_like = 0.5 * params.k2 * integrate(grid, np.sum(c * c, axis=-1))
    k3_term = 0.5 * params.k3 * integrate(grid, n2 * dv**2)
    k4_term = 0.5 * params.k4 * integrate(grid, dcurl**2)
    k5_term = 0.5 * params.k5 * integrate(grid, np.sum(dxc * dxc, axis=-1))
    if H is None:
        mag_par = 0.0
        mag_perp = 0.0
    else:
        H = np.asarray(H, dtype=float)
        dH = np.sum(d * H, axis=-1)
        dxH = np.cross(d, H)
        mag_par = -0.5 * params.chi_par * integrate(grid, dH**2)
        mag_perp = -0.5 * params.chi_perp * integrate(
            grid, np.sum(dxH * dxH, axis=-1)
        )
    total = splay + twist_like + k3_term + k4_term + k5_term + mag_par + mag_perp
    return EnergyBreakdown(
        splay=splay,
        twist_like=twist_like,
        k3_term=k3_term,
        k4_term=k4_term,
        k5_term=k5_term,
        magnetic_par=mag_par,
        magnetic_perp=mag_perp,
        total=total,
    )


def _magnetic_force(params, d, H):
    dH = np.sum(d * H, axis=-1)
    HxHxd = np.cross(H, np.cross(H, d))
    return -params.chi_par * dH[..., None] * H + params.chi_perp * HxHxd


def variational_derivative(grid, params, d, H=None, form="tensor", project=None):
    """First variation of the free energy with respect to the director.

    form "tensor" assembles the divergence of the rank-2 coupling field
    M_ij = sum_k d_k (Theta . grad d x d)_ijk with the discrete divergence,
    matching the weak pairing of the scheme, so the energy-identity
    cancellations are exact. form "explicit" uses the curl/divergence
    expansion. With project set (a DirectorSpace), the projection is applied
    and gamma_shift * d is added afterwards.
    """
    d = np.asarray(d, dtype=float)
    g = grad(grid, d)
    if form == "tensor":
        gd = outer3(g, d)
        t3 = rank6_apply(params.elastic_rank6, gd)
        coupling = np.einsum("...ijk,...k->...ij", t3, d)
        q = -div_mat(grid, rank4_apply(params.elastic_rank4, g))
        q = q - div_mat(grid, coupling)
        q = q + np.einsum("...ij,...ijk->...k", g, t3)
    elif form == "explicit":
        q = _explicit_elastic(grid, params, d, g)
    else:
        raise ValueError("form must be tensor or explicit")
    if H is not None:
        q = q + _magnetic_force(params, d, np.asarray(H, dtype=float))
    if project is not None:
        q = director_project(grid, q, project) + params.gamma_shift * d
    return q


def _explicit_elastic(grid, params, d, g):
    """Curl/divergence expansion of the elastic variational derivative."""
    dv = np.trace(g, axis1=-2, axis2=-1)
    c = curl(grid, d)
    n2 = np.sum(d * d, axis=-1)
    dcurl = np.sum(d * c, axis=-1)
    gskw = skw_part(g)
    w = matvec(gskw, d)

    q = -params.k1 * scalar_grad(grid, dv)
    q = q + params.k2 * curl(grid, c)
    q = q - params.k3 * scalar_grad(grid, n2 * dv)
    q = q - params.k4 * div_mat(grid, cross_matrix(d) * dcurl[..., None, None])
    q = q - 4.0 * params.k5 * div_mat(grid, skw_part(outer(w, d)))
    q = q + params.k3 * (dv**2)[..., None] * d
    q = q + params.k4 * dcurl[..., None] * c
    q = q + 4.0 * params.k5 * mat_t_vec(gskw, w)
    return q
