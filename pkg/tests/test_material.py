"""Parameter validation and the constant elastic tensors.

The rank-4 and rank-6 tensors are rebuilt here entry by entry from their
delta-product definitions with plain Python conditionals, then compared
against the einsum construction in the package. A second, structurally
different check factors the rank-6 tensor into a sum of positive
semidefinite rank-one and Gram pieces, which also certifies nonnegativity
of the associated quadratic form.
"""

import numpy as np
import pytest

from nemlab.material import (
    MaterialError,
    build_params,
    default_params,
    rank4_elastic,
    rank6_elastic,
    split_constants,
)
from nemlab.tensors import rank4_form, rank6_form, outer

RNG = np.random.default_rng(42)


def _delta(a, b):
    return 1.0 if a == b else 0.0


def oracle_rank4_entry(k1, k2, i, j, k, l):
    return k1 * _delta(i, j) * _delta(k, l) + k2 * (
        _delta(i, k) * _delta(j, l) - _delta(i, l) * _delta(j, k)
    )


def oracle_rank6_entry(k3, k4, k5, i, j, k, l, m, n):
    val = k3 * _delta(i, j) * _delta(l, m) * _delta(k, n)
    val += k5 * (
        _delta(i, l) * _delta(m, n) * _delta(j, k)
        - _delta(m, i) * _delta(l, n) * _delta(j, k)
        - _delta(l, j) * _delta(m, n) * _delta(i, k)
        + _delta(j, m) * _delta(l, n) * _delta(i, k)
    )
    val += k4 * (
        _delta(k, n) * _delta(j, m) * _delta(i, l)
        + _delta(k, m) * _delta(j, l) * _delta(i, n)
        + _delta(k, l) * _delta(j, n) * _delta(i, m)
        - _delta(k, n) * _delta(j, l) * _delta(i, m)
        - _delta(k, m) * _delta(j, n) * _delta(i, l)
        - _delta(k, l) * _delta(j, m) * _delta(i, n)
    )
    return val


def oracle_rank4(k1, k2):
    t = np.zeros((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    t[i, j, k, l] = oracle_rank4_entry(k1, k2, i, j, k, l)
    return t


def oracle_rank6(k3, k4, k5):
    t = np.zeros((3, 3, 3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    for m in range(3):
                        for n in range(3):
                            t[i, j, k, l, m, n] = oracle_rank6_entry(
                                k3, k4, k5, i, j, k, l, m, n
                            )
    return t


@pytest.mark.parametrize("k1,k2", [(1.0, 1.0), (0.5, 0.4), (2.3, 0.05)])
def test_rank4_matches_entry_oracle(k1, k2):
    np.testing.assert_array_equal(rank4_elastic(k1, k2), oracle_rank4(k1, k2))


@pytest.mark.parametrize("k3,k4,k5", [(1.0, 1.0, 1.0), (0.5, 0.8, 0.4), (0.0, 2.0, 0.3)])
def test_rank6_matches_entry_oracle(k3, k4, k5):
    np.testing.assert_array_equal(
        rank6_elastic(k3, k4, k5), oracle_rank6(k3, k4, k5)
    )


def test_rank6_pair_exchange_symmetry():
    """Swapping the index triples (ijk) and (lmn) leaves the tensor fixed."""
    t6 = rank6_elastic(0.5, 0.8, 0.4)
    np.testing.assert_array_equal(t6, np.transpose(t6, (3, 4, 5, 0, 1, 2)))


def test_rank4_block_symmetry():
    t4 = rank4_elastic(0.5, 0.4)
    np.testing.assert_array_equal(t4, np.transpose(t4, (2, 3, 0, 1)))


def test_rank6_gram_factorization():
    """The rank-6 tensor is a weighted sum of three Gram pieces.

    Flattened to a 27 x 27 matrix it equals
        k3 * M1^T M1 + k4 * e e^T + k5 * M2^T M2
    with M1 the trace-over-leading-pair map G -> sum_i G_iik, e the fully
    antisymmetric symbol, and M2 the map G -> sum_j (G_pjj - G_jpj). This
    exhibits the quadratic form as a sum of squares.
    """
    k3, k4, k5 = 0.37, 1.21, 0.66
    flat = rank6_elastic(k3, k4, k5).reshape(27, 27)

    m1 = np.zeros((3, 27))
    m2 = np.zeros((3, 27))
    eps = np.zeros(27)
    for l in range(3):
        for m in range(3):
            for n in range(3):
                col = (l * 3 + m) * 3 + n
                for p in range(3):
                    m1[p, col] = _delta(l, m) * _delta(p, n)
                    m2[p, col] = _delta(p, l) * _delta(m, n) - _delta(p, m) * _delta(l, n)
                perm = (l, m, n)
                if perm in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
                    eps[col] = 1.0
                elif perm in ((0, 2, 1), (2, 1, 0), (1, 0, 2)):
                    eps[col] = -1.0

    built = k3 * m1.T @ m1 + k4 * np.outer(eps, eps) + k5 * m2.T @ m2
    np.testing.assert_allclose(flat, built, atol=1e-14)

    eigs = np.linalg.eigvalsh(0.5 * (flat + flat.T))
    assert eigs.min() >= -1e-12


def test_rank6_quadratic_form_nonnegative():
    t6 = rank6_elastic(0.5, 0.8, 0.4)
    for _ in range(200):
        g = RNG.standard_normal((3, 3, 3))
        assert rank6_form(g, t6, g) >= -1e-12


def test_rank6_product_form_identities():
    """On a product g x d the quadratic form collapses to three invariants."""
    t6 = rank6_elastic(0.5, 0.8, 0.4)
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    for _ in range(50):
        g = RNG.standard_normal((3, 3))
        d = RNG.standard_normal(3)
        gd = np.einsum("ij,k->ijk", g, d)
        form = rank6_form(gd, t6, gd)
        axial = np.einsum("ijk,ij,k->", eps, g, d)
        expected = (
            0.5 * np.dot(d, d) * np.trace(g) ** 2
            + 0.8 * axial**2
            + 0.4 * np.sum(((g - g.T) @ d) ** 2)
        )
        np.testing.assert_allclose(form, expected, rtol=1e-12, atol=1e-12)


def test_rank4_ellipticity_closed_form():
    k1, k2 = 0.5, 0.4
    t4 = rank4_elastic(k1, k2)
    for _ in range(100):
        a = RNG.standard_normal(3)
        b = RNG.standard_normal(3)
        form = rank4_form(outer(a, b), t4, outer(a, b))
        ab = np.dot(a, b)
        expected = k1 * ab**2 + k2 * (np.dot(a, a) * np.dot(b, b) - ab**2)
        np.testing.assert_allclose(form, expected, rtol=1e-11, atol=1e-12)
        assert form >= min(k1, k2) * np.dot(a, a) * np.dot(b, b) - 1e-10


def test_split_constants_map():
    for K1, K2, K3 in [(1.0, 1.2, 0.8), (2.0, 0.5, 3.0), (0.3, 0.3, 0.3)]:
        k1, k2, k3, k4, k5 = split_constants(K1, K2, K3)
        assert k1 == 0.5 * K1
        assert k3 == k1
        assert k2 == 0.5 * min(K2, K3)
        # the pairs recombine to the original constants
        assert k2 + k4 == pytest.approx(K2)
        assert k2 + k5 == pytest.approx(K3)
        assert k4 >= 0.0 and k5 >= 0.0
        assert k1 > 0.0 and k2 > 0.0


def test_default_params_frozen_values():
    p = default_params()
    assert p.lam == pytest.approx(-0.1)
    assert (p.k1, p.k2, p.k3, p.k4, p.k5) == pytest.approx((0.5, 0.4, 0.5, 0.8, 0.4))
    assert p.k_coercive == pytest.approx(0.2)
    assert p.gamma_shift == 0.0
    # entrywise against the loop oracle, fed with the exact derived floats
    np.testing.assert_array_equal(p.elastic_rank4, oracle_rank4(p.k1, p.k2))
    np.testing.assert_array_equal(p.elastic_rank6, oracle_rank6(p.k3, p.k4, p.k5))


def test_parodi_combination():
    p = build_params(
        mu1=0.2, mu2=-0.4, mu3=0.3, mu4=1.0, mu5=0.5, mu6=0.2,
        K1=1.0, K2=1.0, K3=1.0, chi_par=-0.2, chi_perp=-0.4,
    )
    assert p.lam == pytest.approx(-0.1)


VALID = dict(
    mu1=0.1, mu2=-0.3, mu3=0.2, mu4=1.0, mu5=0.4, mu6=0.3,
    K1=1.0, K2=1.2, K3=0.8, chi_par=-0.5, chi_perp=-1.0,
)


def _invalid(**overrides):
    kw = dict(VALID)
    kw.update(overrides)
    return kw


@pytest.mark.parametrize(
    "overrides,match",
    [
        (dict(K1=0.0), "elasticity violated"),
        (dict(K2=-1.0), "elasticity violated"),
        (dict(K3=0.0), "elasticity violated"),
        (dict(mu4=0.0), "mu4 must be positive"),
        (dict(mu4=-0.5), "mu4 must be positive"),
        (dict(mu5=-0.4, mu6=0.2), r"mu5 \+ mu6 - lam\^2 must be positive"),
        (dict(mu1=-0.1, mu2=-0.1, mu3=0.1), r"mu1 \+ lam\^2 must be positive"),
        (dict(chi_par=0.5), "chi_par and chi_perp must be negative"),
        (dict(chi_perp=0.0), "chi_par and chi_perp must be negative"),
        (dict(chi_par=-1.0, chi_perp=-0.5), "chi_par must exceed chi_perp"),
        (dict(chi_par=-0.5, chi_perp=-0.5), "chi_par must exceed chi_perp"),
    ],
)
def test_admissibility_rejections(overrides, match):
    with pytest.raises(MaterialError, match=match):
        build_params(**_invalid(**overrides))


def test_admissibility_boundary_cases():
    # mu5 + mu6 = lam^2 exactly is rejected, strictly positive is required
    lam = VALID["mu2"] + VALID["mu3"]
    with pytest.raises(MaterialError):
        build_params(**_invalid(mu5=lam**2, mu6=0.0))
    # and the least strict admissible nudge passes
    build_params(**_invalid(mu5=lam**2 + 1e-6, mu6=0.0))
