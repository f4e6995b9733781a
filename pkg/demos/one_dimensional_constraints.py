"""One degree of freedom with a single linear constraint, p = 0 or q = 0.

For p = 0 the physical inner product of a Gaussian is |int psi|^2, since the
constraint averages psi over all translations.  For q = 0 it is 2 pi |psi(0)|^2.
Both are computed in closed form and checked against brute-force quadrature.
"""
import numpy as np

from linquad.inner import dirac_inner_product, dirac_project, gaussian_inner_product
from linquad.oracle import numeric_inner_product
from linquad.states import make_gaussian
from linquad.symplectic import ConstraintPlane

# Omega(e_Q) = -p and Omega(e_P) = q, so these planes impose p = 0 and q = 0
p_zero = ConstraintPlane(np.array([[0.0], [1.0]]))
q_zero = ConstraintPlane(np.array([[1.0], [0.0]]))

psi = make_gaussian([[1.0j]], [0.5j])  # exp(-xi^2/2 - xi/2)
integral = np.sqrt(2 * np.pi) * np.exp(0.125)

for name, L, expected in [("p = 0", p_zero, integral ** 2),
                          ("q = 0", q_zero, 2 * np.pi * abs(psi(np.zeros((1, 1)))[0]) ** 2)]:
    closed = gaussian_inner_product(psi, psi, L).real
    brute = numeric_inner_product(psi, psi, L)
    d = dirac_project(psi, L)
    print(f"{name}: closed form {closed:.12f}, expected {expected:.12f}, "
          f"quadrature {brute.value.real:.12f} ({brute.nodes} nodes)")
    kind = "regular" if d.regular else f"delta along {d.delta_directions.ravel()}"
    print(f"        Dirac projection is {kind}; its norm is "
          f"{dirac_inner_product(d, d, L).real:.12f}")
