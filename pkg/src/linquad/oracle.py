"""Brute-force reference values: tensor-product quadrature and truncated oscillator bases.

Nothing here calls the closed-form paths; the only shared piece is the pointwise
Weyl action  e^{i Omega(P,Q)} g(xi) = e^{i P.xi - i/2 P.Q} g(xi - Q).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.sparse import csr_matrix, identity, kron
from scipy.sparse.linalg import expm_multiply

from .states import GaussianState, QuasiGaussianState

MAX_REFINEMENTS = 4
REFINE_FACTOR = 1.5


class OracleError(RuntimeError):
    pass


@dataclass
class GridSpec:
    """Trapezoid grids: per-axis half-extent and node counts.

    ``None`` extents are chosen from the state widths so that the Gaussian envelope at
    the boundary is below ``edge_tol``.
    """

    xi_extent: float | None = None
    xi_points: int = 16
    s_extent: float | None = None
    s_points: int = 16
    edge_tol: float = 1e-13

    def __post_init__(self):
        if self.xi_points < 16 or self.s_points < 16:
            raise ValueError("at least 16 nodes per axis")


@dataclass
class TruncationSpec:
    n_max: int = 40
    frequency: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_max < 8:
            raise ValueError("oscillator cutoff must be at least 8")


@dataclass
class OracleResult:
    value: complex
    error: float
    nodes: int
    history: list


def _envelope(psi: QuasiGaussianState):
    """Center, position width and momentum width of |psi|."""
    g = psi.gaussian
    im = g.A.imag
    center = -np.linalg.solve(im, g.b.imag)
    sig_q = 1.0 / math.sqrt(np.linalg.eigvalsh(im).min())
    prec_p = (-np.linalg.inv(g.A)).imag
    sig_p = 1.0 / math.sqrt(np.linalg.eigvalsh(0.5 * (prec_p + prec_p.T)).min())
    mom = (g.A @ center + g.b).real
    return center, sig_q, sig_p, mom


def _tail_radius(edge_tol, degree):
    # exp(-r^2/2) r^degree < edge_tol
    r = math.sqrt(2 * math.log(1 / edge_tol))
    for _ in range(20):
        r = math.sqrt(2 * (math.log(1 / edge_tol) + degree * math.log(max(r, 1.0))))
    return r + 0.5


def _nodes(center, half, m):
    x = np.linspace(-half, half, m)
    return x, (x[1] - x[0])


def _pairwise_sum(values):
    # numpy reductions use pairwise summation
    return complex(np.sum(values))


def _core_log(f, g, Xp, Xq, z):
    """log of conj f(xi) e^{i P.xi - i/2 P.Q} g(xi - Q) without polynomials or amplitudes."""
    n = Xp.shape[0]
    xi, s = z[..., :n], z[..., n:]
    P = s @ Xp.T
    Q = s @ Xq.T
    return (np.conj(f.gaussian.exponent(xi)) + 1j * np.sum(P * xi, -1)
            - 0.5j * np.sum(P * Q, -1) + g.gaussian.exponent(xi - Q))


def _quadratic_probe(func, dim):
    """(M, v) with func(z) = const - 1/2 z^T M z + v.z, from exact second differences."""
    e = np.eye(dim)
    f0 = func(np.zeros(dim))
    fp = np.array([func(e[i]) for i in range(dim)])
    fm = np.array([func(-e[i]) for i in range(dim)])
    M = np.empty((dim, dim), dtype=complex)
    for i in range(dim):
        M[i, i] = -(fp[i] + fm[i] - 2 * f0)
        for j in range(i + 1, dim):
            fij = func(e[i] + e[j])
            M[i, j] = M[j, i] = -(fij - fp[i] - fp[j] + f0)
    v = 0.5 * (fp - fm)
    return M, v


def _design_axes(M, v, n, deg, edge_tol, alias_tol):
    """Sheared grid for the joint integrand: z = center + T u, u on a tensor grid.

    The xi-axes follow the s-dependent center of the xi-profile.  Spacing comes
    from the Fourier decay exp(-1/2 k^T M_u^{-1} k) at the alias frequency 2 pi / h,
    extents from the magnitude decay of the xi-integrated s-profile and of the
    xi-integrand.  Returns (center, T, half-widths, spacings).
    """
    dim = M.shape[0]
    k = dim - n
    tail = 2 * (math.log(1 / edge_tol) + deg * 2.0)
    center = np.zeros(dim)
    halves = np.empty(dim)
    T = np.eye(dim)
    Mxx = M[:n, :n]
    ReX = 0.5 * (Mxx.real + Mxx.real.T)
    if k:
        S = M[n:, n:] - M[n:, :n] @ np.linalg.solve(Mxx, M[:n, n:])
        w = v[n:] - M[n:, :n] @ np.linalg.solve(Mxx, v[:n])
        ReS = 0.5 * (S.real + S.real.T)
        lam = np.linalg.eigvalsh(ReS).min()
        if lam <= 0:
            raise OracleError("constrained integral does not decay along L")
        center[n:] = np.linalg.solve(ReS, w.real)
        # bounding box of the ellipsoid s^T ReS s <= tail
        halves[n:] = np.sqrt(tail * np.linalg.inv(ReS).diagonal())
        T[:n, n:] = -np.linalg.solve(ReX, M[:n, n:].real)
    center[:n] = np.linalg.solve(ReX, v[:n].real - M[:n, n:].real @ center[n:])
    if np.linalg.eigvalsh(ReX).min() <= 0:
        raise OracleError("integrand does not decay in xi")
    halves[:n] = np.sqrt(tail * np.linalg.inv(ReX).diagonal())
    Mu = T.T @ M @ T
    Mu_inv = np.linalg.inv(Mu)
    # alias term at K = 2 pi / h: about 2 dim (K^2 w)^{deg/2} exp(-K^2 w / 2) relative
    x = math.log(2 * dim / alias_tol)
    for _ in range(30):
        x = math.log(2 * dim / alias_tol) + 0.5 * deg * math.log(2 * x)
    joint = _lattice_spacing(Mu_inv.real, np.zeros(dim), x)
    # per-s-slice design: each slice's xi-profile has a Fourier peak at the slice
    # frequency, whose spread over the s-box widens the alias condition
    lin = (T.T @ (v - M @ center))[:n].imag
    freq = np.abs(lin) + np.abs(Mu[:n, n:].imag) @ halves[n:]
    xi_part = _lattice_spacing(np.linalg.inv(Mu[:n, :n]).real, freq, x)
    s_part = _lattice_spacing(Mu_inv[n:, n:].real, np.zeros(k), x) if k else np.zeros(0)
    sliced = None if xi_part is None or s_part is None else np.concatenate([xi_part, s_part])
    options = [sp for sp in (joint, sliced) if sp is not None]
    if not options:
        raise OracleError("integrand has no Fourier decay along an axis")
    spacing = min(options, key=lambda sp: float(np.sum(np.log(2 * halves / sp))))
    return center, T, halves, spacing


def _lattice_spacing(W, shift, x, reach=2):
    """Tensor-grid spacings whose alias terms all sit below exp(-x).

    The Fourier magnitude at k is bounded by exp(-1/2 (k - f)^T W (k - f)) for any
    |f_j| <= shift_j, so every nonzero reciprocal lattice vector kappa must satisfy
    1/2 kappa^T W kappa - shift.|W kappa| >= x.  Off-diagonal W makes mixed lattice
    vectors the binding ones.  Returns None when W is not positive definite.
    """
    d = W.shape[0]
    W = 0.5 * (W + W.T)
    if d == 0:
        return np.zeros(0)
    if np.linalg.eigvalsh(W).min() <= 0:
        return None
    diag = W.diagonal()
    h = 2 * math.pi / (np.sqrt(2 * x / diag) + shift)
    grid = np.array(list(product(range(-reach, reach + 1), repeat=d)), dtype=float)
    grid = grid[np.any(grid != 0, axis=1)]
    for _ in range(1000):
        kap = grid * (2 * math.pi / h)
        q = 0.5 * np.einsum("mi,ij,mj->m", kap, W, kap) - np.abs(kap @ W) @ shift
        worst = int(np.argmin(q))
        if q[worst] >= x:
            return h
        # refine only the axes the binding lattice vector lives on
        h = np.where(grid[worst] != 0, h * 0.97, h)
    raise OracleError("could not meet the alias bound")


def _sheared_trapezoid(f, g, Xp, Xq, center, shear, halves, counts, chunk):
    n, k = Xp.shape[0], Xp.shape[1]
    axes = [np.linspace(-h, h, m) for h, m in zip(halves, counts)]
    steps = np.array([a[1] - a[0] for a in axes])
    u = np.stack(np.meshgrid(*axes[:n], indexing="ij"), -1).reshape(-1, n) + center[:n]
    if k:
        su = np.stack(np.meshgrid(*axes[n:], indexing="ij"), -1).reshape(-1, k)
    else:
        su = np.zeros((1, 0))
    per = max(1, chunk // u.shape[0])
    partial = []
    for start in range(0, su.shape[0], per):
        du = su[start:start + per]
        sv = du + center[n:]
        xi = u[None, :, :] + (du @ shear.T)[:, None, :]
        P = sv @ Xp.T
        Q = sv @ Xq.T
        phase = np.exp(1j * np.einsum("sxi,si->sx", xi, P)
                       - 0.5j * np.sum(P * Q, axis=1)[:, None])
        vals = np.conj(f(xi)) * phase * g(xi - Q[:, None, :])
        partial.append(_pairwise_sum(vals.ravel()))
    return complex(sum(partial)) * float(np.prod(steps)), u.shape[0] * su.shape[0]


def numeric_inner_product(f, g, L, grid: GridSpec | None = None,
                          rtol: float = 1e-10, chunk: int = 2_000_000,
                          max_nodes: float = 4e8) -> OracleResult:
    """Trapezoid quadrature of int ds J int dxi conj f(xi) [e^{i Omega(X_s)} g](xi).

    Grids come from a numerical probe of the integrand's quadratic exponent.  A
    coarse and a fine design are compared; both grow until they agree to rtol.
    """
    f = QuasiGaussianState.of(f)
    g = QuasiGaussianState.of(g)
    n, k = f.n, L.dim
    if n > 3 or k > 2:
        raise OracleError("cost guard: oracle supports n <= 3 and k <= 2")
    grid = grid or GridSpec()
    Xp, Xq = L.basis[:n], L.basis[n:]
    M, v = _quadratic_probe(lambda z: _core_log(f, g, Xp, Xq, z), n + k)
    deg = f.poly.degree + g.poly.degree
    # the reference grid is designed for aliasing near rtol, the main grid far below;
    # trapezoid errors fall exponentially, so their difference bounds the main error
    main = _design_axes(M, v, n, deg, grid.edge_tol, rtol * 1e-3)
    ref = _design_axes(M, v, n, deg, grid.edge_tol, rtol * 1e-1)
    floor = np.array([grid.xi_points] * n + [grid.s_points] * k)
    shear = main[1][:n, n:]
    center = main[0]
    history = []
    for level in range(MAX_REFINEMENTS + 1):
        grow = 1.25 ** level
        values = []
        for _, _, halves, spacing in (ref, main):
            halves = halves * grow ** 0.5
            if grid.xi_extent:
                halves[:n] = grid.xi_extent
            if grid.s_extent:
                halves[n:] = grid.s_extent
            counts = np.maximum(np.ceil(2 * halves / spacing * grow).astype(int) + 1, floor)
            if np.prod(counts.astype(float)) > max_nodes:
                raise OracleError(
                    f"grid of {np.prod(counts.astype(float)):.3g} nodes exceeds budget")
            value, nodes = _sheared_trapezoid(f, g, Xp, Xq, center, shear, halves, counts,
                                              chunk)
            value *= L.measure_scale
            history.append((tuple(int(c) for c in counts), value))
            values.append(value)
        err = abs(values[1] - values[0])
        if err <= rtol * abs(values[1]):
            return OracleResult(values[1], err, nodes, history)
    raise OracleError(f"quadrature did not converge: last relative change {err / abs(values[1]):.3g}")


def numeric_pairing_constant(L, G, rho_cov=None, points: int = 48, extent: float = 9.0):
    """Delta from int dmu(X) int dsigma(Y) rho(Y) e^{i omega(X,Y)} with Gaussian rho, by quadrature.

    The t-integral (over G) is done first for every s-node; it is the Fourier
    transform of rho at W^T s and decays, so the outer s-box is finite.  The t-spacing
    resolves the largest frequency on that box.  Returns (Delta, change) with change
    the difference to a coarser grid.
    """
    k = L.dim
    if k == 0:
        return 1.0, 0.0
    if k > 2:
        raise OracleError("cost guard: k <= 2")
    cov = np.eye(k) if rho_cov is None else np.asarray(rho_cov, dtype=float)
    S = np.linalg.inv(cov)
    W = L.basis.T @ _J(L.n) @ G.basis  # omega(X_a, Y_b)
    sv = np.linalg.svd(W, compute_uv=False)
    sd = np.sqrt(np.linalg.eigvalsh(cov))
    # rho's transform at frequency K decays like exp(-K^2 sd_min^2 / 2)
    s_half = extent / (sd.min() * sv.min())
    t_half = extent * sd.max()
    kmax = s_half * sv.max() * math.sqrt(k)

    def run(m):
        ht = 2 * math.pi / (kmax + extent / sd.min()) * points / m
        mt = int(np.ceil(2 * t_half / ht)) + 1
        t, ht = _nodes(0, t_half, mt)
        s, hs = _nodes(0, s_half, max(m, 16))
        tp = np.stack(np.meshgrid(*([t] * k), indexing="ij"), -1).reshape(-1, k)
        sp = np.stack(np.meshgrid(*([s] * k), indexing="ij"), -1).reshape(-1, k)
        rho = np.exp(-0.5 * np.einsum("ti,ij,tj->t", tp, S, tp))
        freq = sp @ W
        total = 0.0
        step = max(1, 2_000_000 // tp.shape[0])
        for a in range(0, sp.shape[0], step):
            total += float(np.sum((np.exp(1j * freq[a:a + step] @ tp.T) @ rho).real))
        return total * ht ** k * hs ** k * L.measure_scale * G.measure_scale
    coarse = run(points)
    fine = run(int(points * REFINE_FACTOR))
    return fine, abs(fine - coarse)


def _J(n):
    eye = np.eye(n)
    z = np.zeros((n, n))
    return np.block([[z, eye], [-eye, z]])


def numeric_dirac_project(psi, L, xi_points, s_points: int = 64, s_extent: float | None = None,
                          rtol: float = 1e-10):
    """Pointwise trapezoid quadrature of int dmu(X) e^{i Omega(X)} psi at given xi.

    Nodes grow by REFINE_FACTOR until successive values agree to ``rtol`` of the
    largest sample.
    Returns the values and the last change.
    """
    psi = QuasiGaussianState.of(psi)
    n, k = psi.n, L.dim
    Xp, Xq = L.basis[:n], L.basis[n:]
    if k and np.linalg.svd(Xq, compute_uv=False).min() < 1e-8:
        raise OracleError("degenerate plane: Dirac state is delta-supported")
    xi_points = np.atleast_2d(np.asarray(xi_points, dtype=float))
    if k == 0:
        return psi(xi_points), 0.0
    c, sq, _, _ = _envelope(psi)
    smin = np.linalg.svd(Xq, compute_uv=False).min()
    r = _tail_radius(1e-14, psi.poly.degree)
    reach = np.abs(xi_points - c).max() + r * sq
    half = s_extent or reach / smin

    def run(m):
        ss, hs = _nodes(0, half, m)
        sv = np.stack(np.meshgrid(*([ss] * k), indexing="ij"), -1).reshape(-1, k)
        P = sv @ Xp.T
        Q = sv @ Xq.T
        pts = xi_points[:, None, :] - Q[None, :, :]
        phase = np.exp(1j * xi_points @ P.T - 0.5j * np.sum(P * Q, axis=1)[None, :])
        vals = phase * psi(pts)
        return vals.sum(axis=1) * hs ** k * L.measure_scale
    m = s_points
    coarse = run(m)
    for _ in range(MAX_REFINEMENTS):
        m = int(m * REFINE_FACTOR)
        fine = run(m)
        change = np.abs(fine - coarse).max()
        if change <= rtol * np.abs(fine).max():
            return fine, change
        coarse = fine
    raise OracleError(f"Dirac quadrature did not converge: last change {change:.3g}")


def fit_gaussian_exponent(xi_points, values):
    """Least-squares fit of log(values) = log c + i/2 xi^T A xi + i b.xi.

    Phases are unwrapped against the first sample, so samples must stay within a
    region where the phase differs from it by less than pi.
    """
    xi = np.atleast_2d(xi_points)
    n = xi.shape[1]
    logv = np.log(values)
    # unwrap imaginary parts relative to the first sample
    logv = logv.real + 1j * (logv.imag - 2 * np.pi * np.round((logv.imag - logv.imag[0]) / (2 * np.pi)))
    cols = [np.ones(len(xi))]
    pairs = []
    for i in range(n):
        for j in range(i, n):
            cols.append(xi[:, i] * xi[:, j] * (0.5 if i == j else 1.0))
            pairs.append((i, j))
    cols += [xi[:, i] for i in range(n)]
    design = np.stack(cols, 1)
    coef, *_ = np.linalg.lstsq(design, logv, rcond=None)
    A = np.zeros((n, n), dtype=complex)
    for (i, j), a in zip(pairs, coef[1:1 + len(pairs)]):
        A[i, j] = A[j, i] = a / 1j
    b = coef[1 + len(pairs):] / 1j
    return A, b, np.exp(coef[0])


# --- truncated oscillator basis -----------------------------------------------------

def hermite_functions(nmax: int, x, freq: float = 1.0):
    """phi_0..phi_{nmax-1} of the oscillator with frequency ``freq`` at points x."""
    x = np.asarray(x, dtype=float) * math.sqrt(freq)
    out = np.empty((nmax,) + x.shape)
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * x ** 2) * freq ** 0.25
    if nmax > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for j in range(2, nmax):
        out[j] = math.sqrt(2.0 / j) * x * out[j - 1] - math.sqrt((j - 1) / j) * out[j - 2]
    return out


def _ladder(nmax):
    a = np.diag(np.sqrt(np.arange(1, nmax)), 1)
    return csr_matrix(a)


@dataclass
class TruncatedState:
    coeffs: np.ndarray
    n_max: int
    freqs: tuple

    @property
    def n(self) -> int:
        return self.coeffs.ndim

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        tables = [hermite_functions(self.n_max, xi[..., j], self.freqs[j]) for j in range(self.n)]
        if self.n == 1:
            return np.einsum("a,a...->...", self.coeffs, tables[0])
        if self.n == 2:
            return np.einsum("ab,a...,b...->...", self.coeffs, tables[0], tables[1])
        raise OracleError("evaluation implemented for n <= 2")


def project_to_basis(psi, n_max: int, freqs, points: int | None = None) -> np.ndarray:
    """<phi_N | psi> by trapezoid quadrature on a wide grid."""
    psi = QuasiGaussianState.of(psi)
    n = psi.n
    c, sq, sp, mom = _envelope(psi)
    fmin, fmax = min(freqs), max(freqs)
    half = max(_tail_radius(1e-15, psi.poly.degree) * sq + np.abs(c).max(),
               math.sqrt(2 * n_max + 1) / math.sqrt(fmin) + 8)
    # resolve both the state's and the basis functions' momenta
    kmax = max(np.abs(mom).max() + _tail_radius(1e-15, psi.poly.degree) * sp,
               math.sqrt((2 * n_max + 1) * fmax) + 8)
    if points is None:
        points = max(200, int(math.ceil(2 * half * kmax / math.pi)) + 1)
    x, h = _nodes(0, half, points)
    tables = [hermite_functions(n_max, x, fr) for fr in freqs]
    grids = np.meshgrid(*([x] * n), indexing="ij")
    vals = psi(np.stack(grids, -1))
    if n == 1:
        return tables[0] @ vals * h
    if n == 2:
        return np.einsum("ax,by,xy->ab", tables[0], tables[1], vals, optimize=True) * h * h
    raise OracleError("projection implemented for n <= 2")


def _position_momentum_ops(n, n_max, freqs):
    ops = []
    a = _ladder(n_max)
    eye = identity(n_max, format="csr")
    for j in range(n):
        fr = freqs[j]
        q = (a + a.T) / math.sqrt(2 * fr)
        p = 1j * (a.T - a) * math.sqrt(fr / 2)
        factors_q = [eye] * n
        factors_p = [eye] * n
        factors_q[j] = q
        factors_p[j] = p
        Qop, Pop = factors_q[0], factors_p[0]
        for m in range(1, n):
            Qop = kron(Qop, factors_q[m], format="csr")
            Pop = kron(Pop, factors_p[m], format="csr")
        ops.append((Qop, Pop))
    return ops


def hamiltonian_matrix(gamma, epsilon, n, n_max, freqs):
    """Omega_2(Gamma) + epsilon in a product oscillator basis.

    Omega(e_Pj) = xi_j and Omega(e_Qj) = -p_j.  Products are formed with two extra
    levels per mode and then cut, so matrix elements inside the cutoff are exact.
    """
    big = n_max + 2
    ops = _position_momentum_ops(n, big, freqs)
    Z = [op[0] for op in ops] + [-op[1] for op in ops]
    dim = big ** n
    H = csr_matrix((dim, dim), dtype=complex)
    for i in range(2 * n):
        for j in range(2 * n):
            if gamma[i, j] != 0:
                H = H + 0.5 * gamma[i, j] * (Z[i] @ Z[j])
    H = H + epsilon * identity(dim, format="csr")
    keep = np.ravel_multi_index(
        np.stack(np.meshgrid(*([np.arange(n_max)] * n), indexing="ij"), 0).reshape(n, -1),
        (big,) * n)
    return H[keep][:, keep]


def numeric_evolve(psi, H, L, t: float, trunc: TruncationSpec | None = None,
                   check_convergence: bool = True, rtol: float = 1e-5,
                   max_dim: int = 40000) -> TruncatedState:
    """exp(-i t (Omega_2(Gamma) + epsilon)) psi in a truncated oscillator product basis.

    Uses the Hamiltonian as given.  The cutoff doubles until the coefficient vector
    changes by less than ``rtol`` (relative), which keeps fidelity errors near rtol^2.
    """
    psi = QuasiGaussianState.of(psi)
    n = psi.n
    if n > 2:
        raise OracleError("cost guard: n <= 2")
    trunc = trunc or TruncationSpec()
    freqs = tuple(trunc.frequency) or (1.0,) * n

    def run(nmax):
        c0 = project_to_basis(psi, nmax, freqs)
        Hm = hamiltonian_matrix(np.asarray(H.gamma), H.epsilon, n, nmax, freqs)
        ct = expm_multiply(-1j * t * Hm, c0.ravel()) if t else c0.ravel()
        return TruncatedState(ct.reshape((nmax,) * n), nmax, freqs)

    nmax = trunc.n_max
    state = run(nmax)
    if not check_convergence:
        return state
    for _ in range(MAX_REFINEMENTS):
        if (2 * nmax) ** n > max_dim:
            break
        finer = run(2 * nmax)
        sub = finer.coeffs[tuple(slice(0, nmax) for _ in range(n))]
        tail = max(np.sum(np.abs(finer.coeffs) ** 2) - np.sum(np.abs(sub) ** 2), 0.0)
        diff = math.sqrt(tail + np.sum(np.abs(sub - state.coeffs) ** 2))
        norm = math.sqrt(np.sum(np.abs(finer.coeffs) ** 2))
        state, nmax = finer, 2 * nmax
        if diff <= rtol * norm:
            return state
    raise OracleError(f"truncation not converged at n_max={nmax}: relative change {diff / norm:.3g}")


def _embed(coeffs, n_max, big):
    out = np.zeros((big,) * coeffs.ndim, dtype=complex)
    out[tuple(slice(0, n_max) for _ in range(coeffs.ndim))] = coeffs
    return out.ravel()


def numeric_truncated_inner_product(a: TruncatedState, b: TruncatedState, L,
                                    rtol: float = 1e-8, step: float = 0.25,
                                    pad: int = 2) -> OracleResult:
    """Constrained product of truncated-basis states: int ds J <a| e^{i Omega(X_s)} |b>.

    The Weyl operators are matrix exponentials of Omega(X) = P.q - Q.p in a basis
    padded by ``pad``; for each outer node the inner direction is swept with
    expm_multiply on a uniform grid.  The s-box widens until the edge values are
    negligible and the trapezoid step halves until successive sums agree.
    """
    n, k = a.n, L.dim
    if a.n_max != b.n_max or a.freqs != b.freqs:
        raise OracleError("states must share the truncated basis")
    if k > 2:
        raise OracleError("cost guard: k <= 2")
    big = pad * a.n_max
    va, vb = _embed(a.coeffs, a.n_max, big), _embed(b.coeffs, b.n_max, big)
    if k == 0:
        val = complex(np.vdot(va, vb))
        return OracleResult(val, 0.0, big ** n, [])
    ops = _position_momentum_ops(n, big, a.freqs)
    gens = []
    for col in L.basis.T:
        P, Q = col[:n], col[n:]
        gen = csr_matrix((big ** n, big ** n), dtype=complex)
        for j in range(n):
            gen = gen + 1j * (P[j] * ops[j][0] - Q[j] * ops[j][1])
        gens.append(gen)
    scale = 1.0 + np.abs(va).sum() * np.abs(vb).sum()

    def profile(half, h):
        m = int(round(2 * half / h)) + 1
        if k == 1:
            sweep = expm_multiply(gens[0], vb, start=-half, stop=half, num=m, endpoint=True)
            vals = sweep @ va.conj()
            return vals, vals.reshape(-1)
        outer = expm_multiply(gens[1], vb, start=-half, stop=half, num=m, endpoint=True)
        rows = [expm_multiply(gens[0], v, start=-half, stop=half, num=m, endpoint=True) @ va.conj()
                for v in outer]
        grid = np.array(rows).T
        edge = np.concatenate([grid[0], grid[-1], grid[:, 0], grid[:, -1]])
        return edge, grid

    half = 6.0
    for _ in range(8):
        edge_vals, _ = profile(half, 4 * step)
        ends = np.abs(edge_vals[[0, -1]]) if k == 1 else np.abs(edge_vals)
        if ends.max() < 1e-13 * scale:
            break
        half *= 1.5
    else:
        raise OracleError("s-profile does not decay")
    prev, h, history = None, step, []
    for _ in range(MAX_REFINEMENTS + 1):
        _, grid = profile(half, h)
        val = complex(np.sum(grid)) * h ** k * L.measure_scale
        history.append((h, val))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return OracleResult(val, abs(val - prev), grid.size, history)
        prev, h = val, h / 2
    raise OracleError("s-trapezoid did not converge")


def fidelity(overlap, norm_a, norm_b) -> float:
    return float(abs(overlap) ** 2 / (norm_a * norm_b))
