"""Two modes, the constraint q1 = 0, and a Hamiltonian coupling q1 p1 to an oscillator on mode 2.

The constraint removes mode 1.  The reduced system is a unit oscillator, but the
ordering of q1 p1 leaves a complex constant shift of i/2 in the energies.
"""
import json
from pathlib import Path

import numpy as np

from linquad.dynamics import QuadraticHamiltonian, evolve_gaussian, reduce_hamiltonian
from linquad.inner import gaussian_inner_product
from linquad.oracle import TruncationSpec, fidelity, numeric_evolve, project_to_basis
from linquad.stability import excited_state, ground_state, verify_eigen
from linquad.states import make_gaussian
from linquad.symplectic import ConstraintPlane

raw = json.loads((Path(__file__).parent / "systems" / "constrained_two_mode.json").read_text())
H = QuadraticHamiltonian(np.array(raw["gamma"]), raw["epsilon"])
L = ConstraintPlane(np.array(raw["constraints"], dtype=float).T)

red = reduce_hamiltonian(H, L)
print("reduced energy shift:", red.epsilon)
gs = ground_state(H, L)
print("ground state A:\n", np.round(gs.state.A, 12), "\nenergy", gs.energy)
for N in range(4):
    psi, E = excited_state(gs, (N,))
    norm = gaussian_inner_product(psi, psi, L).real
    print(f"N={N}: E = {E}, eigen-residual / norm = {verify_eigen(H, L, psi, E) / np.sqrt(norm):.1e}")

# evolve a squeezed, displaced packet and compare with the truncated-basis oracle
psi0 = make_gaussian(np.diag([1j, 2j + 0.3]), [0.0, 0.2 + 0.1j])
t = 3.0
out = evolve_gaussian(psi0, H, L, t)
oracle = numeric_evolve(psi0, QuadraticHamiltonian(red.gamma_full, red.epsilon), L, t,
                        TruncationSpec(n_max=40))
a = oracle.coeffs.ravel()
b = project_to_basis(out, oracle.n_max, oracle.freqs).ravel()
err = 1 - fidelity(np.vdot(a, b), np.vdot(a, a).real, np.vdot(b, b).real)
n0 = gaussian_inner_product(psi0, psi0, L).real
n1 = gaussian_inner_product(out, out, L).real
print(f"t={t}: fidelity error vs oracle {err:.1e}")
# a complex eps' is not a phase: the constrained norm grows by exp(2 Im(eps') t)
growth = np.exp(2 * complex(red.epsilon).imag * t)
print(f"norm ratio {n1 / n0:.10f}, exp(2 Im(eps') t) = {growth:.10f}")
