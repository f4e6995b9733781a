import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from linquad.dynamics import (
    BranchTrackingError,
    IncompatibleHamiltonian,
    QuadraticHamiltonian,
    ReducedSpace,
    _full_generator,
    _tracked_sqrt_det,
    check_compatibility,
    circ_product,
    classical_flow,
    compatibility_report,
    evolve_gaussian,
    evolve_quasi_gaussian,
    ladder_decomposition,
    oscillator,
    raising_vectors,
    reduce_hamiltonian,
)
from linquad.germs import h_germ
from linquad.inner import gaussian_equivalent, gaussian_inner_product, residual_norm
from linquad.oracle import TruncationSpec, fidelity, numeric_evolve, project_to_basis
from linquad.polynomial import Polynomial
from linquad.random_instances import (
    random_compatible_hamiltonian,
    random_gaussian,
    random_plane,
    random_quasi,
)
from linquad.states import QuasiGaussianState, make_gaussian, omega_product_apply, quadratic_op_apply
from linquad.symplectic import ConstraintPlane, spans_equal

from conftest import e, plane

seeds = st.integers(0, 2**32 - 1)
EMPTY1 = ConstraintPlane.empty(1)


def test_compatibility_examples():
    L = plane(e(1, "Q"))  # p-constraint
    p_sq = QuadraticHamiltonian(np.outer(e(1, "Q"), e(1, "Q")))
    q_sq = QuadraticHamiltonian(np.outer(e(1, "P"), e(1, "P")))
    assert check_compatibility(p_sq, L)
    rep = compatibility_report(q_sq, L)
    assert not rep.compatible and rep.gg_residual > 0.5
    assert check_compatibility(QuadraticHamiltonian(np.zeros((4, 4))), plane(e(2, "P", 1)))
    with pytest.raises(IncompatibleHamiltonian):
        reduce_hamiltonian(q_sq, L)
    with pytest.raises(IncompatibleHamiltonian):
        evolve_gaussian(make_gaussian([[1j]]), q_sq, L, 0.5)


def test_reduction_leaves_skew_complement_terms():
    L = plane(e(2, "P", 1))
    H = oscillator(2, [0.0, 1.0], 0.3)  # only mode 2
    red = reduce_hamiltonian(H, L)
    assert np.allclose(red.gamma_full, H.gamma) and red.epsilon == pytest.approx(0.3)


def test_reduction_drops_plane_coupling():
    L = plane(e(2, "P", 1))
    g = np.zeros((4, 4))
    g[1, 1] = g[3, 3] = 1.0
    g[0, 2] = g[2, 0] = 1.0  # symmetric q1 p1 coupling
    red = reduce_hamiltonian(QuadraticHamiltonian(g), L)
    assert np.allclose(red.gamma_full, oscillator(2, [0.0, 1.0]).gamma, atol=1e-12)
    assert red.epsilon == pytest.approx(0.5j)


@given(seeds, st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_reduction_is_exact_on_states(seed, n):
    r = np.random.default_rng(seed)
    k = int(r.integers(0, n))
    L = random_plane(r, n, k)
    H = random_compatible_hamiltonian(r, L)
    red = reduce_hamiltonian(H, L)
    f = random_quasi(r, n, 2)
    diff = quadratic_op_apply(f, H.gamma, H.epsilon) - quadratic_op_apply(f, red.gamma_full, red.epsilon)
    assert residual_norm(diff, L) <= 1e-9 * np.sqrt(gaussian_inner_product(f, f, L).real)


def test_classical_flow_examples():
    R = ReducedSpace.of(EMPTY1)
    gbar = np.eye(2)
    assert np.allclose(classical_flow(gbar, 0.0, R).matrix, np.eye(2))
    assert np.allclose(classical_flow(gbar, 2 * np.pi, R).matrix, np.eye(2), atol=1e-12)
    assert np.allclose(circ_product(np.zeros(2), np.zeros((2, 2)), R), 0)
    # P evolves into +Q for the oscillator in this orientation
    assert np.allclose(circ_product(np.array([1.0, 0.0]), gbar, R), [0.0, 1.0])


@given(seeds, st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_flow_is_symplectic(seed, n):
    r = np.random.default_rng(seed)
    L = random_plane(r, n, int(r.integers(0, n)))
    red = reduce_hamiltonian(random_compatible_hamiltonian(r, L), L)
    u = classical_flow(red.gamma_bar, r.uniform(0, 5), red.space)
    assert u.symplectic_residual(red.space.omega) < 1e-9


def test_oscillator_ground_state_phase():
    psi = make_gaussian([[1j]], None, 0.8)
    assert evolve_gaussian(psi, oscillator(1), EMPTY1, 0.0) == psi
    for t in (0.3, 2.0, 7.5):
        out = evolve_gaussian(psi, oscillator(1), EMPTY1, t)
        assert np.allclose(out.A, [[1j]]) and out.c == pytest.approx(0.8 * np.exp(-0.5j * t))


def test_first_excited_state_phase():
    psi = QuasiGaussianState(make_gaussian([[1j]]), Polynomial(1, {(1,): 1.0}))
    out = evolve_quasi_gaussian(psi, oscillator(1), EMPTY1, 1.1)
    x = np.linspace(-2, 2, 7)[:, None]
    assert np.allclose(out(x), np.exp(-1.5j * 1.1) * psi(x))


def test_period_two_pi_on_constrained_system():
    L = plane(e(2, "P", 1))
    psi = make_gaussian(np.array([[1j, 0.2], [0.2, 1.5j]]))
    out = evolve_gaussian(psi, oscillator(2, [0.0, 1.0]), L, 2 * np.pi)
    c = gaussian_equivalent(out, psi, L)
    assert c is not None and abs(c) == pytest.approx(1.0)


@given(seeds, st.integers(1, 3))
@settings(max_examples=25, deadline=None)
def test_norm_conservation_and_germ_transport(seed, n):
    r = np.random.default_rng(seed)
    L = random_plane(r, n, int(r.integers(0, n)))
    H = random_compatible_hamiltonian(r, L)
    psi = random_gaussian(r, n, shift=0.3)
    t = r.uniform(0, 5)
    out = evolve_gaussian(psi, H, L, t)
    n0 = gaussian_inner_product(psi, psi, L).real
    assert gaussian_inner_product(out, out, L).real == pytest.approx(n0, rel=1e-8)
    U = expm(t * _full_generator(reduce_hamiltonian(H, L).gamma_full))
    assert spans_equal(h_germ(out.A, L).basis, U @ h_germ(psi.A, L).basis, rtol=1e-8)


@given(seeds, st.integers(1, 2))
@settings(max_examples=20, deadline=None)
def test_quasi_gaussian_norm_conservation(seed, n):
    r = np.random.default_rng(seed)
    L = random_plane(r, n, int(r.integers(0, n)))
    H = random_compatible_hamiltonian(r, L)
    psi = random_quasi(r, n, 3)
    out = evolve_quasi_gaussian(psi, H, L, r.uniform(0, 5))
    n0 = gaussian_inner_product(psi, psi, L).real
    assert gaussian_inner_product(out, out, L).real == pytest.approx(n0, rel=1e-8)


@given(seeds, st.integers(1, 3))
@settings(max_examples=25, deadline=None)
def test_ladder_decomposition_rebuilds_state(seed, n):
    # raising vectors commute, so the order inside each product is irrelevant
    r = np.random.default_rng(seed)
    psi = random_quasi(r, n, 3)
    Rv = raising_vectors(psi.gaussian.A)
    x = r.normal(size=(5, n)) * 0.5
    total = 0
    for coef, alpha in ladder_decomposition(psi):
        vecs = [Rv[:, j] for j in range(n) for _ in range(alpha[j])]
        total = total + coef * omega_product_apply(psi.gaussian, vecs)(x)
    assert np.allclose(total, psi(x), atol=1e-10 * np.abs(psi(x)).max())


def _oracle_fidelity(psi, H, L, t, evolved):
    red = reduce_hamiltonian(H, L)
    o = numeric_evolve(psi, QuadraticHamiltonian(red.gamma_full, red.epsilon), L, t,
                       TruncationSpec(n_max=40 if psi.n == 2 else 80))
    ce = project_to_basis(evolved, o.n_max, o.freqs)
    a, b = o.coeffs.ravel(), ce.ravel()
    ov = np.vdot(a, b)
    return 1 - fidelity(ov, np.vdot(a, a).real, np.vdot(b, b).real), ov / np.vdot(a, a)


@pytest.mark.parametrize("n,k,t", [(1, 0, 3.0), (2, 1, 5.0), (2, 0, 1.7)])
def test_matches_truncated_basis_evolution(n, k, t):
    r = np.random.default_rng(100 * n + k)
    L = random_plane(r, n, k)
    H = random_compatible_hamiltonian(r, L)
    psi = random_gaussian(r, n, shift=0.2)
    err, ratio = _oracle_fidelity(psi, H, L, t, evolve_gaussian(psi, H, L, t))
    assert err < 1e-6 and ratio == pytest.approx(1.0, abs=1e-6)
    phi = random_quasi(r, n, 2)
    err, ratio = _oracle_fidelity(phi, H, L, t, evolve_quasi_gaussian(phi, H, L, t))
    assert err < 1e-6 and ratio == pytest.approx(1.0, abs=1e-6)


def test_branch_tracking_refuses_jumps():
    with pytest.raises(BranchTrackingError):
        _tracked_sqrt_det(lambda s: np.array([[1.0 if s < 0.5 else -1.0]]), 1.0, 4)
    # a smooth winding path keeps its branch: det = e^{2 i s}, sqrt = e^{i s}
    val = _tracked_sqrt_det(lambda s: np.array([[np.exp(2j * s)]]), 4.0, 8)
    assert val == pytest.approx(np.exp(4j))
