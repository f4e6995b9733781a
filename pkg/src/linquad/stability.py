"""Stability of the reduced flow, normal modes, and the Gaussian eigenfunction ladder."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.linalg import null_space

from .dynamics import QuadraticHamiltonian, ReducedSpace, circ_generator, reduce_hamiltonian
from .germs import ComplexGerm, GermError, check_germ, h_germ_to_matrix, positivity_matrix
from .inner import residual_norm
from .polynomial import DEGREE_CAP, DegreeCapError
from .states import GaussianState, QuasiGaussianState, omega_product_apply, quadratic_op_apply
from .symplectic import ConstraintPlane, numerical_rank, omega_matrix

EIG_TOL = 1e-8


class UnstableSystemError(ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnsupportedModesError(ValueError):
    pass


@dataclass
class StabilityReport:
    stable: bool
    spectrum: np.ndarray
    diagonalizable: bool
    offending: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    reason: str = ""


@dataclass(frozen=True)
class ModeSet:
    """beta_I and quotient coordinates y_I; ``vectors`` are the lifts in L^{perp omega}."""

    beta: np.ndarray
    coords: np.ndarray
    vectors: np.ndarray
    space: ReducedSpace

    def gram(self) -> np.ndarray:
        return positivity_matrix(self.vectors)

    def normalization_residual(self) -> float:
        m = len(self.beta)
        if m == 0:
            return 0.0
        herm = np.abs(self.gram() - np.eye(m)).max()
        iso = np.abs(omega_matrix(self.vectors, self.vectors)).max()
        return float(max(herm, iso))


def _generator(gamma_bar, R: ReducedSpace):
    return circ_generator(gamma_bar, R.omega)


def _clusters(values, tol):
    """Group nearly equal complex numbers; returns lists of indices."""
    groups = []
    for i, v in enumerate(values):
        for grp in groups:
            if abs(values[grp[0]] - v) <= tol:
                grp.append(i)
                break
        else:
            groups.append([i])
    return groups


def analyze_stability(gamma_bar, R: ReducedSpace, tol: float = EIG_TOL) -> StabilityReport:
    """Stable iff the generator has purely imaginary spectrum and no Jordan blocks.

    Defects are detected by comparing the multiplicity of each eigenvalue cluster
    with the nullity of (G - lambda I).
    """
    G = _generator(np.asarray(gamma_bar, dtype=float), R)
    m = G.shape[0]
    if m == 0:
        return StabilityReport(True, np.zeros(0, complex), True)
    lam = np.linalg.eigvals(G)
    scale = max(1.0, float(np.abs(G).max()))
    ctol = max(tol, 1e-6) * scale
    diag = True
    for grp in _clusters(lam, ctol):
        mu = np.mean(lam[grp])
        nullity = m - numerical_rank(G - mu * np.eye(m), rtol=1e-7)
        if nullity < len(grp):
            diag = False
    off = lam[np.abs(lam.real) > tol * scale]
    stable = diag and off.size == 0
    reason = ""
    if off.size:
        reason = "eigenvalues off the imaginary axis"
    elif not diag:
        reason = "generator is not diagonalizable (Jordan block)"
        off = lam
    return StabilityReport(stable, lam, diag, off, reason)


def _hermitian_orthonormalize(vecs_full, coords):
    """Orthonormalize for (1/i) omega(Y, Y*) inside a positive eigenspace."""
    Hm = positivity_matrix(vecs_full)
    Hm = 0.5 * (Hm + Hm.conj().T)
    w, U = np.linalg.eigh(Hm)
    if w.min() <= 0:
        raise UnsupportedModesError("eigenspace is not definite for the positivity form")
    T = U / np.sqrt(w)
    vecs_full, coords = vecs_full @ T, coords @ T
    if vecs_full.shape[1] == 1:
        # canonical phase: the first largest-magnitude component is real positive
        v = vecs_full[:, 0]
        mags = np.abs(v)
        j = int(np.argmax(mags >= mags.max() * (1 - 1e-9)))
        ph = np.conj(v[j]) / abs(v[j])
        vecs_full, coords = vecs_full * ph, coords * ph
    return vecs_full, coords


def extract_modes(gamma_bar, R: ReducedSpace, tol: float = EIG_TOL) -> ModeSet:
    """One eigenvector per conjugate pair, the one with (1/i) omega(Y, Y*) > 0.

    With Y(t) = e^{i beta t} Y the frequency is beta = Im(lambda).  Degenerate
    frequencies are orthonormalized within their eigenspace; zero frequencies and
    mixed-sign eigenspaces are unsupported.
    """
    gamma_bar = np.asarray(gamma_bar, dtype=float)
    report = analyze_stability(gamma_bar, R, tol)
    if not report.stable:
        raise UnstableSystemError(f"reduced system is unstable: {report.reason}", report)
    G = _generator(gamma_bar, R)
    m = G.shape[0]
    if m == 0:
        return ModeSet(np.zeros(0), np.zeros((0, 0), complex), np.zeros((R.plane.n * 2, 0), complex), R)
    lam = report.spectrum
    scale = max(1.0, float(np.abs(G).max()))
    if np.abs(lam).min() <= 1e-6 * scale:
        raise UnsupportedModesError("zero frequency in the reduced spectrum")
    betas, coords, vecs = [], [], []
    for grp in _clusters(lam, max(tol, 1e-6) * scale):
        mu = 1j * float(np.mean(lam[grp]).imag)
        Y = null_space(G - mu * np.eye(m), rcond=1e-7)
        full = R.basis @ Y
        Hm = positivity_matrix(full)
        Hm = 0.5 * (Hm + Hm.conj().T)
        w = np.linalg.eigvalsh(Hm)
        if w.min() > 0:
            full_n, Y_n = _hermitian_orthonormalize(full, Y)
            betas += [mu.imag] * Y.shape[1]
            coords.append(Y_n)
            vecs.append(full_n)
        elif w.max() >= 0:
            raise UnsupportedModesError("eigenspace of mixed sign for the positivity form")
    beta = np.array(betas)
    coords = np.hstack(coords)
    vecs = np.hstack(vecs)
    order = np.argsort(-beta, kind="stable")
    modes = ModeSet(beta[order], coords[:, order], vecs[:, order], R)
    if len(modes.beta) != m // 2:
        raise UnsupportedModesError("positive modes do not span half the reduced space")
    return modes


def germ_from_modes(modes: ModeSet, L: ConstraintPlane) -> ComplexGerm:
    """H-germ span{Y_I} + L^C."""
    basis = np.hstack([modes.vectors, L.basis.astype(complex)])
    return ComplexGerm(basis, "H", L)


@dataclass
class GroundState:
    state: GaussianState
    energy: complex
    modes: ModeSet
    epsilon: complex
    report: StabilityReport
    residual: float


def _energy(eps, beta, N):
    val = complex(eps) + float(np.sum(np.asarray(beta) * (np.asarray(N) + 0.5)))
    return val.real if abs(val.imag) <= 1e-14 * max(1.0, abs(val)) else val


def ground_state(H: QuadraticHamiltonian, L: ConstraintPlane, tol: float = 1e-8) -> GroundState:
    """Gaussian eigenfunction of the constrained system and E = eps' + 1/2 sum beta."""
    red = reduce_hamiltonian(H, L)
    report = analyze_stability(red.gamma_bar, red.space)
    if not report.stable:
        raise UnstableSystemError(f"no Gaussian eigenfunction: {report.reason}", report)
    modes = extract_modes(red.gamma_bar, red.space)
    rc = germ_from_modes(modes, L)
    check = check_germ(rc)
    if not check.passed:
        raise GermError("mode germ fails the H-germ checks: " + "; ".join(check.messages))
    A = h_germ_to_matrix(rc, L, red.space.gauge)
    psi = GaussianState(A, None, 1.0)
    E = _energy(red.epsilon, modes.beta, np.zeros(len(modes.beta)))
    res = verify_eigen(H, L, psi, E)
    if res > tol:
        raise ArithmeticError(f"ground state eigen-residual {res:.3g} exceeds {tol:.1g}")
    return GroundState(psi, E, modes, red.epsilon, report, res)


def excited_state(ground: GroundState, N) -> tuple:
    """Omega(Y_1*)^{N_1} ... Omega(Y_m*)^{N_m} psi_A and its energy."""
    N = tuple(int(x) for x in N)
    modes = ground.modes
    if len(N) != len(modes.beta):
        raise ValueError(f"multi-index must have {len(modes.beta)} entries")
    if min(N, default=0) < 0:
        raise ValueError("occupation numbers must be nonnegative")
    if sum(N) > DEGREE_CAP:
        raise DegreeCapError(f"|N| = {sum(N)} exceeds the degree cap {DEGREE_CAP}")
    vecs = [modes.vectors[:, I].conj() for I, cnt in enumerate(N) for _ in range(cnt)]
    psi = omega_product_apply(QuasiGaussianState(ground.state), vecs)
    return psi, _energy(ground.epsilon, modes.beta, N)


def verify_eigen(H: QuadraticHamiltonian, L: ConstraintPlane, psi, E) -> float:
    """<r, r>^{1/2} for r = H psi - E psi, null components removed exactly."""
    psi = QuasiGaussianState.of(psi)
    r = quadratic_op_apply(psi, H.gamma, complex(H.epsilon) - complex(E))
    return residual_norm(r, L)


def candidate_germs(gamma_bar, R: ReducedSpace, tol: float = 1e-7) -> list:
    """All H-germs spanned by generator eigenvectors (one per eigenvalue) and L^C.

    For unstable systems none of them passes the germ checks.
    """
    G = _generator(np.asarray(gamma_bar, dtype=float), R)
    m = G.shape[0]
    L = R.plane
    if m == 0:
        return [ComplexGerm(L.basis.astype(complex), "H", L)]
    lam = np.linalg.eigvals(G)
    scale = max(1.0, float(np.abs(G).max()))
    eigvecs = []
    for grp in _clusters(lam, 1e-6 * scale):
        mu = np.mean(lam[grp])
        Y = null_space(G - mu * np.eye(m), rcond=tol)
        eigvecs += [Y[:, j] for j in range(Y.shape[1])]
    out = []
    for combo in combinations(range(len(eigvecs)), m // 2):
        Yc = np.stack([eigvecs[j] for j in combo], 1)
        full = R.basis @ Yc
        if numerical_rank(full) < m // 2:
            continue
        out.append(ComplexGerm(np.hstack([full, L.basis.astype(complex)]), "H", L))
    return out
