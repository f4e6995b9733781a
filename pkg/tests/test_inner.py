import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linquad.germs import h_germ
from linquad.inner import (
    ClosedFormMismatch,
    dirac_from_germ,
    dirac_inner_product,
    dirac_project,
    equivalence_residual,
    gaussian_equivalent,
    gaussian_inner_product,
    gaussian_norm_closed_form,
    null_reduce,
    residual_norm,
)
from linquad.random_instances import random_A, random_gaussian, random_plane, random_quasi
from linquad.states import QuasiGaussianState, make_gaussian, omega_op_apply
from linquad.symplectic import ConstraintPlane

from conftest import e, plane

seeds = st.integers(0, 2**32 - 1)
P_CONSTRAINT = plane(e(1, "Q"))  # Omega(e_Q) = -p
Q_CONSTRAINT = plane(e(1, "P"))  # Omega(e_P) = q


def test_one_dimensional_examples():
    psi = make_gaussian([[1j]])
    assert gaussian_inner_product(psi, psi, P_CONSTRAINT) == pytest.approx(2 * np.pi)
    assert gaussian_inner_product(psi, psi, Q_CONSTRAINT) == pytest.approx(2 * np.pi)
    # shifted Gaussian distinguishes the two: |int psi|^2 versus 2 pi |psi(0)|^2
    phi = make_gaussian([[1j]], [0.5j])
    integral = np.sqrt(2 * np.pi) * np.exp(0.125)
    assert gaussian_inner_product(phi, phi, P_CONSTRAINT) == pytest.approx(integral ** 2)
    assert gaussian_inner_product(phi, phi, Q_CONSTRAINT) == pytest.approx(2 * np.pi)
    assert gaussian_inner_product(psi, psi, ConstraintPlane.empty(1)) == pytest.approx(np.sqrt(np.pi))


def test_norm_closed_form_examples():
    psi = make_gaussian([[1j]])
    assert gaussian_norm_closed_form(psi, P_CONSTRAINT) == pytest.approx(2 * np.pi)
    assert gaussian_norm_closed_form(make_gaussian(1j * np.eye(2)), ConstraintPlane.empty(2)) \
        == pytest.approx(np.pi)
    assert gaussian_norm_closed_form(make_gaussian([[1j]], c=2.0), P_CONSTRAINT) \
        == pytest.approx(8 * np.pi)


@given(seeds, st.integers(1, 4))
@settings(max_examples=50, deadline=None)
def test_norm_formula_matches_integral(seed, n):
    r = np.random.default_rng(seed)
    L = random_plane(r, n, int(r.integers(0, n + 1)))
    psi = make_gaussian(random_A(r, n), None, r.normal() + 1j * r.normal())
    gaussian_norm_closed_form(psi, L, rtol=1e-9)


@given(seeds, st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_hermitian_and_positive(seed, n):
    r = np.random.default_rng(seed)
    L = random_plane(r, n, int(r.integers(0, n + 1)))
    f, g = random_quasi(r, n), random_quasi(r, n)
    fg, gf = gaussian_inner_product(f, g, L), gaussian_inner_product(g, f, L)
    ff, gg = gaussian_inner_product(f, f, L), gaussian_inner_product(g, g, L)
    assert abs(fg - np.conj(gf)) <= 1e-10 * np.sqrt(ff.real * gg.real)
    assert ff.real > 0 and abs(ff.imag) <= 1e-10 * ff.real


@given(seeds, st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_constraint_images_are_null(seed, n):
    r = np.random.default_rng(seed)
    k = int(r.integers(1, n + 1))
    L = random_plane(r, n, k)
    h, f = random_quasi(r, n), random_quasi(r, n)
    null = omega_op_apply(h, L.basis[:, 0])
    scale = np.sqrt(abs(gaussian_inner_product(h, h, L)) * abs(gaussian_inner_product(f, f, L)))
    assert abs(gaussian_inner_product(null, null, L)) <= 1e-9 * gaussian_inner_product(h, h, L).real * 10
    assert residual_norm(null, L) <= 1e-9 * np.sqrt(gaussian_inner_product(h, h, L).real)
    # null_reduce keeps inner products with anything
    red = null_reduce(f, L)
    g = random_quasi(r, n)
    assert abs(gaussian_inner_product(g, red, L) - gaussian_inner_product(g, f, L)) \
        <= 1e-9 * max(scale, 1.0)


@given(seeds, st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_equivalence_both_directions(seed, n):
    r = np.random.default_rng(seed)
    k = int(r.integers(1, n + 1))
    L = random_plane(r, n, k)
    f = random_gaussian(r, n, shift=0.0)
    g = make_gaussian(random_A(r, n))
    same = h_germ(f.A, L).same_span(h_germ(g.A, L))
    c = gaussian_equivalent(f, g, L)
    assert (c is not None) == same
    if same:
        assert abs(equivalence_residual(f, g, c, L)) <= 1e-9 * gaussian_inner_product(f, f, L).real


def test_equivalence_examples():
    psi = make_gaussian(np.diag([1j, 2j]))
    assert gaussian_equivalent(psi, psi, plane(e(2, "P", 1))) == pytest.approx(1.0)
    other = make_gaussian(np.diag([1j, 3j]))
    assert gaussian_equivalent(psi, other, ConstraintPlane.empty(2)) is None
    # on a 1-d plane every centered Gaussian is equivalent to every other
    assert gaussian_equivalent(make_gaussian([[1j]]), make_gaussian([[0.4 + 3j]]),
                               P_CONSTRAINT) is not None


def test_dirac_one_dimensional_examples():
    psi = make_gaussian([[1j]])
    d = dirac_project(psi, P_CONSTRAINT)
    assert d.regular and d.A == pytest.approx(np.zeros((1, 1)))
    assert d(np.array([[0.7]]))[0] == pytest.approx(np.sqrt(2 * np.pi))
    dq = dirac_project(psi, Q_CONSTRAINT)
    assert not dq.regular and np.allclose(np.abs(dq.delta_directions), [[1.0]])
    # psi_D = sqrt(2 pi) psibar delta(xi) with psibar = sqrt(2 pi) psi(0)
    assert dq.c == pytest.approx(2 * np.pi * psi(np.zeros((1, 1)))[0])
    assert dirac_inner_product(d, d, P_CONSTRAINT) == pytest.approx(2 * np.pi)
    assert dirac_inner_product(dq, dq, Q_CONSTRAINT) == pytest.approx(2 * np.pi)


@given(seeds, st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_dirac_norm_equals_constrained_norm(seed, n):
    r = np.random.default_rng(seed)
    L = random_plane(r, n, int(r.integers(0, n + 1)))
    psi = random_gaussian(r, n)
    d = dirac_project(psi, L)
    assert d.annihilation_residual() < 1e-9
    dn = dirac_inner_product(d, d, L)
    cn = gaussian_inner_product(psi, psi, L)
    assert dn == pytest.approx(cn, rel=1e-9)


@given(seeds, st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_dirac_germ_route_matches_direct(seed, n):
    r = np.random.default_rng(seed)
    L = random_plane(r, n, int(r.integers(0, n + 1)))
    psi = make_gaussian(random_A(r, n), None, r.normal() + 1j * r.normal())
    d = dirac_project(psi, L)
    A_check, c_check = dirac_from_germ(psi, L)
    assert np.allclose(A_check, d.A, atol=1e-9 * max(1, np.abs(d.A).max()))
    assert c_check == pytest.approx(d.c, rel=1e-9)


def test_dirac_weight_must_be_normalized():
    psi = make_gaussian([[1j]])
    d = dirac_project(psi, P_CONSTRAINT)
    with pytest.raises(ValueError):
        dirac_inner_product(d, d, P_CONSTRAINT, rho=(1.0, np.eye(1)))


def test_norm_mismatch_is_diagnosed(monkeypatch):
    import linquad.inner as inner
    monkeypatch.setattr(inner, "gaussian_inner_product", lambda f, g, L: 1.0)
    with pytest.raises(ClosedFormMismatch):
        inner.gaussian_norm_closed_form(make_gaussian([[1j]]), P_CONSTRAINT)
