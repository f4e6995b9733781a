"""Sparse multivariate polynomials with complex coefficients."""
from __future__ import annotations

from functools import reduce
from math import comb

import numpy as np

DEGREE_CAP = 32


class DegreeCapError(ValueError):
    pass


class Polynomial:
    """Map multi-index -> complex coefficient in ``nvars`` variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = int(nvars)
        self.terms: dict[tuple[int, ...], complex] = {}
        if terms:
            for alpha, c in terms.items():
                alpha = tuple(int(a) for a in alpha)
                if len(alpha) != self.nvars:
                    raise ValueError(f"multi-index {alpha} has wrong length")
                if sum(alpha) > DEGREE_CAP:
                    raise DegreeCapError(f"degree {sum(alpha)} exceeds cap {DEGREE_CAP}")
                if c != 0:
                    self.terms[alpha] = self.terms.get(alpha, 0) + complex(c)

    @classmethod
    def constant(cls, nvars: int, value=1.0) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        alpha = [0] * nvars
        alpha[i] = 1
        return cls(nvars, {tuple(alpha): 1.0})

    @classmethod
    def linear(cls, coeffs, const=0.0) -> "Polynomial":
        """sum_i coeffs[i] x_i + const."""
        coeffs = np.asarray(coeffs)
        m = coeffs.shape[0]
        terms = {(0,) * m: const}
        for i, c in enumerate(coeffs):
            alpha = [0] * m
            alpha[i] = 1
            terms[tuple(alpha)] = c
        return cls(m, terms)

    def copy(self) -> "Polynomial":
        p = Polynomial(self.nvars)
        p.terms = dict(self.terms)
        return p

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def chop(self, tol: float) -> "Polynomial":
        return Polynomial(self.nvars, {a: c for a, c in self.terms.items() if abs(c) > tol})

    def _check(self, other):
        if self.nvars != other.nvars:
            raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.nvars, other)
        self._check(other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            other = complex(other)
            return Polynomial(self.nvars, {a: c * other for a, c in self.terms.items()})
        self._check(other)
        out: dict[tuple[int, ...], complex] = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                ab = tuple(x + y for x, y in zip(a, b))
                if sum(ab) > DEGREE_CAP:
                    raise DegreeCapError(f"degree {sum(ab)} exceeds cap {DEGREE_CAP}")
                out[ab] = out.get(ab, 0) + ca * cb
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return reduce(lambda x, y: x * y, [self] * k, Polynomial.constant(self.nvars))

    def conj(self) -> "Polynomial":
        """Coefficient-wise conjugate (the conjugate function on real arguments)."""
        return Polynomial(self.nvars, {a: np.conj(c) for a, c in self.terms.items()})

    def derivative(self, i: int) -> "Polynomial":
        out = {}
        for a, c in self.terms.items():
            if a[i]:
                b = list(a)
                b[i] -= 1
                out[tuple(b)] = c * a[i]
        return Polynomial(self.nvars, out)

    def compose_affine(self, T, t=None) -> "Polynomial":
        """p(T z + t) as a polynomial in z, with T of shape (nvars, m)."""
        T = np.asarray(T)
        if T.ndim != 2 or T.shape[0] != self.nvars:
            raise ValueError(f"affine map shape {T.shape} incompatible with {self.nvars} vars")
        m = T.shape[1]
        t = np.zeros(self.nvars) if t is None else np.asarray(t)
        forms = [Polynomial.linear(T[i], t[i]) for i in range(self.nvars)]
        powers: dict[tuple[int, int], Polynomial] = {}

        def power(i, e):
            if (i, e) not in powers:
                powers[(i, e)] = (Polynomial.constant(m) if e == 0
                                  else power(i, e - 1) * forms[i])
            return powers[(i, e)]

        out = Polynomial(m)
        for a, c in self.terms.items():
            term = Polynomial.constant(m, c)
            for i, e in enumerate(a):
                if e:
                    term = term * power(i, e)
            out = out + term
        return out

    def shift(self, q) -> "Polynomial":
        """p(x - q)."""
        q = np.asarray(q)
        out: dict[tuple[int, ...], complex] = {}
        # binomial expansion per variable; cheaper than generic composition
        for a, c in self.terms.items():
            partial = {(): c}
            for i, e in enumerate(a):
                nxt = {}
                for pre, val in partial.items():
                    for j in range(e + 1):
                        coef = comb(e, j) * (-q[i]) ** (e - j)
                        if coef != 0:
                            key = pre + (j,)
                            nxt[key] = nxt.get(key, 0) + val * coef
                partial = nxt
            for b, v in partial.items():
                out[b] = out.get(b, 0) + v
        return Polynomial(self.nvars, out)

    def __call__(self, x):
        """Evaluate at points of shape (..., nvars)."""
        x = np.asarray(x)
        result = np.zeros(x.shape[:-1], dtype=complex)
        for a, c in self.terms.items():
            term = np.full(x.shape[:-1], c, dtype=complex)
            for i, e in enumerate(a):
                if e:
                    term = term * x[..., i] ** e
            result = result + term
        return result

    def __repr__(self):
        body = " + ".join(f"({c:.4g})*x^{a}" for a, c in sorted(self.terms.items()))
        return f"Polynomial({self.nvars}: {body or '0'})"
