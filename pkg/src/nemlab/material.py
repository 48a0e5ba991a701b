"""Material parameters: Leslie viscosities, Oseen-Frank constants, couplings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MaterialError(ValueError):
    """Raised when a parameter set violates an admissibility condition."""


@dataclass(frozen=True, eq=False)
class MaterialParams:
    """Validated parameter set with derived elastic tensors.

    lam is the Parodi combination mu2 + mu3. k1..k5 are the split elastic
    constants derived from the Frank constants K1..K3; elastic_rank4 and
    elastic_rank6 are the constant tensors entering the quadratic form of
    the director gradient and the quartic gradient-director coupling.
    """

    mu1: float
    mu2: float
    mu3: float
    mu4: float
    mu5: float
    mu6: float
    lam: float
    K1: float
    K2: float
    K3: float
    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    chi_par: float
    chi_perp: float
    gamma_shift: float
    elastic_rank4: np.ndarray
    elastic_rank6: np.ndarray
    k_coercive: float


def rank4_elastic(k1: float, k2: float) -> np.ndarray:
    """Constant rank-4 tensor of the quadratic gradient form."""
    eye = np.eye(3)
    t = k1 * np.einsum("ij,kl->ijkl", eye, eye)
    t = t + k2 * (
        np.einsum("ik,jl->ijkl", eye, eye) - np.einsum("il,jk->ijkl", eye, eye)
    )
    return t


def rank6_elastic(k3: float, k4: float, k5: float) -> np.ndarray:
    """Constant rank-6 tensor of the quartic gradient-director coupling."""
    e = np.eye(3)
    t = k3 * np.einsum("ij,lm,kn->ijklmn", e, e, e)
    t = t + k5 * (
        np.einsum("il,mn,jk->ijklmn", e, e, e)
        - np.einsum("mi,ln,jk->ijklmn", e, e, e)
        - np.einsum("lj,mn,ik->ijklmn", e, e, e)
        + np.einsum("jm,ln,ik->ijklmn", e, e, e)
    )
    t = t + k4 * (
        np.einsum("kn,jm,il->ijklmn", e, e, e)
        + np.einsum("km,jl,in->ijklmn", e, e, e)
        + np.einsum("kl,jn,im->ijklmn", e, e, e)
        - np.einsum("kn,jl,im->ijklmn", e, e, e)
        - np.einsum("km,jn,il->ijklmn", e, e, e)
        - np.einsum("kl,jm,in->ijklmn", e, e, e)
    )
    return t


def split_constants(K1: float, K2: float, K3: float):
    """Map Frank constants to the split constants k1..k5.

    k1 and k2 stay strictly positive, k3..k5 are nonnegative, which is what
    the coercivity bound needs.
    """
    k1 = 0.5 * K1
    k2 = 0.5 * min(K2, K3)
    k3 = 0.5 * K1
    k4 = K2 - k2
    k5 = K3 - k2
    return k1, k2, k3, k4, k5


def build_params(
    mu1: float,
    mu2: float,
    mu3: float,
    mu4: float,
    mu5: float,
    mu6: float,
    K1: float,
    K2: float,
    K3: float,
    chi_par: float,
    chi_perp: float,
    gamma_shift: float = 0.0,
) -> MaterialParams:
    """Validate a raw parameter set and derive all dependent quantities.

    The Parodi relation is enforced by construction, lam = mu2 + mu3.
    """
    lam = mu2 + mu3
    if not (K1 > 0 and K2 > 0 and K3 > 0):
        raise MaterialError("elasticity violated: K1, K2, K3 must be positive")
    if not mu4 > 0:
        raise MaterialError("dissipativity violated: mu4 must be positive")
    if not mu5 + mu6 - lam**2 > 0:
        raise MaterialError(
            "dissipativity violated: mu5 + mu6 - lam^2 must be positive"
        )
    if not mu1 + lam**2 > 0:
        raise MaterialError("dissipativity violated: mu1 + lam^2 must be positive")
    if not (chi_par < 0 and chi_perp < 0):
        raise MaterialError(
            "magnetic anisotropy violated: chi_par and chi_perp must be negative"
        )
    if not chi_par > chi_perp:
        raise MaterialError(
            "magnetic anisotropy violated: chi_par must exceed chi_perp"
        )

    k1, k2, k3, k4, k5 = split_constants(K1, K2, K3)
    return MaterialParams(
        mu1=mu1,
        mu2=mu2,
        mu3=mu3,
        mu4=mu4,
        mu5=mu5,
        mu6=mu6,
        lam=lam,
        K1=K1,
        K2=K2,
        K3=K3,
        k1=k1,
        k2=k2,
        k3=k3,
        k4=k4,
        k5=k5,
        chi_par=chi_par,
        chi_perp=chi_perp,
        gamma_shift=gamma_shift,
        elastic_rank4=rank4_elastic(k1, k2),
        elastic_rank6=rank6_elastic(k3, k4, k5),
        k_coercive=0.5 * min(k1, k2),
    )


def default_params(gamma_shift: float = 0.0) -> MaterialParams:
    """A desk-scale admissible parameter set used across examples and tests."""
    return build_params(
        mu1=0.1,
        mu2=-0.3,
        mu3=0.2,
        mu4=1.0,
        mu5=0.4,
        mu6=0.3,
        K1=1.0,
        K2=1.2,
        K3=0.8,
        chi_par=-0.5,
        chi_perp=-1.0,
        gamma_shift=gamma_shift,
    )
