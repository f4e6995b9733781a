"""Physical states are classes: Gaussians that differ by constraint directions coincide.

Two Gaussians are equivalent exactly when their constrained germs agree.  Tilting
the gauge surface produces a visibly different matrix A with the same germ.
"""
import numpy as np

from linquad.germs import h_germ, h_germ_to_matrix
from linquad.inner import equivalence_residual, gaussian_equivalent, gaussian_inner_product
from linquad.random_instances import random_A, random_plane
from linquad.states import make_gaussian
from linquad.symplectic import GaugeSurface, find_gauge_surface

rng = np.random.default_rng(1)
L = random_plane(rng, 2, 1)
A = random_A(rng, 2)
G0 = find_gauge_surface(L)
tilted = GaugeSurface(L, G0.basis + 0.8 * L.basis, 1.0)
B = h_germ_to_matrix(h_germ(A, L), L, tilted)
print("A =\n", np.round(A, 4), "\nB =\n", np.round(B, 4))

f, g = make_gaussian(A), make_gaussian(B)
c = gaussian_equivalent(f, g, L)
ff = gaussian_inner_product(f, f, L).real
print("same germ:", h_germ(A, L).same_span(h_germ(B, L)), " c =", c)
print("residual <f - c g, f - c g> / <f, f> =", equivalence_residual(f, g, c, L) / ff)

other = make_gaussian(random_A(rng, 2))
print("unrelated Gaussian equivalent?", gaussian_equivalent(f, other, L))
