"""Multi-indices, polynomials in shifted monomials, and analytic test functions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp

__all__ = [
    "multi_indices",
    "multi_factorial",
    "multi_binomial",
    "Polynomial",
    "AnalyticFunction",
]


@lru_cache(maxsize=None)
def multi_indices(n: int, max_order: int, exact: bool = False) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of length ``n`` and order ``<= max_order`` (``== max_order`` if ``exact``),
    sorted by order and then lexicographically."""
    out = []
    for k in range(0 if not exact else max_order, max_order + 1):
        block = [a for a in itertools.product(range(k + 1), repeat=n) if sum(a) == k]
        out.extend(sorted(block, reverse=True))
    return tuple(out)


def multi_factorial(alpha) -> int:
    return math.prod(math.factorial(a) for a in alpha)


def multi_binomial(alpha, beta) -> int:
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


def _leq(beta, alpha) -> bool:
    return all(b <= a for a, b in zip(alpha, beta))


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


@dataclass(frozen=True)
class Polynomial:
    """``sum_alpha coeffs[alpha] * (x - base)**alpha`` with ``|alpha| <= degree``."""

    dim: int
    degree: int
    coeffs: dict = field(default_factory=dict)
    base: tuple = None

    def __post_init__(self):
        base = (0.0,) * self.dim if self.base is None else tuple(float(b) for b in np.atleast_1d(self.base))
        if len(base) != self.dim:
            raise ValueError("base point has the wrong dimension")
        object.__setattr__(self, "base", base)
        clean = {}
        for a, c in self.coeffs.items():
            a = tuple(int(v) for v in (a if isinstance(a, tuple) else (a,)))
            if len(a) != self.dim or any(v < 0 for v in a):
                raise ValueError(f"bad multi-index {a}")
            if sum(a) > self.degree:
                if c != 0:
                    raise ValueError(f"multi-index {a} exceeds degree {self.degree}")
                continue
            clean[a] = clean.get(a, 0.0) + float(c)
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def zero(cls, dim: int, degree: int, base=None) -> "Polynomial":
        return cls(dim, degree, {}, base)

    def __call__(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=float)
        scalar = X.ndim == 0 or (X.ndim == 1 and X.shape[0] == self.dim)
        P = np.atleast_2d(X.reshape(-1, self.dim))
        d = P - np.asarray(self.base)
        out = np.zeros(P.shape[0])
        for a, c in self.coeffs.items():
            if c != 0:
                out += c * np.prod(d ** np.asarray(a), axis=1)
        return float(out[0]) if scalar else out

    def derivative(self, beta) -> "Polynomial":
        beta = tuple(beta)
        new = {}
        for a, c in self.coeffs.items():
            if _leq(beta, a):
                k = math.prod(math.perm(ai, bi) for ai, bi in zip(a, beta))
                new[_sub(a, beta)] = c * k
        return Polynomial(self.dim, max(self.degree - sum(beta), 0), new, self.base)

    def rebase(self, new_base) -> "Polynomial":
        """Same polynomial written in powers of ``x - new_base`` (Taylor expansion)."""
        new_base = tuple(float(b) for b in np.atleast_1d(new_base))
        coeffs = {}
        for g in multi_indices(self.dim, self.degree):
            val = self.derivative(g)(np.asarray(new_base))
            if val != 0:
                coeffs[g] = val / multi_factorial(g)
        return Polynomial(self.dim, self.degree, coeffs, new_base)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if other.base != self.base:
            other = other.rebase(self.base)
        deg = max(self.degree, other.degree)
        new = dict(self.coeffs)
        for a, c in other.coeffs.items():
            new[a] = new.get(a, 0.0) + c
        return Polynomial(self.dim, deg, new, self.base)

    def __mul__(self, c: float) -> "Polynomial":
        return Polynomial(self.dim, self.degree, {a: v * c for a, v in self.coeffs.items()}, self.base)

    __rmul__ = __mul__

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-1.0) * other

    def coeff_json(self) -> dict:
        return {str(a): c for a, c in self.coeffs.items()}

    @classmethod
    def from_coeff_json(cls, dim: int, degree: int, data: dict, base) -> "Polynomial":
        coeffs = {}
        for key, c in data.items():
            a = tuple(int(v) for v in key.strip("() ").split(",") if v.strip() != "")
            coeffs[a] = c
        return cls(dim, degree, coeffs, base)


class AnalyticFunction:
    """A closed-form function of ``n`` variables with exact derivatives of every order.

    Built from a sympy expression in the symbols ``x0, x1, ...``; derivatives are
    differentiated symbolically and compiled with ``lambdify`` on demand.
    """

    def __init__(self, expr, dim: int, name: str = ""):
        self.dim = dim
        self.symbols = sp.symbols(f"x0:{dim}")
        self.expr = sp.sympify(expr, locals={f"x{i}": s for i, s in enumerate(self.symbols)})
        self.name = name or str(self.expr)
        self._cache: dict = {}

    def __repr__(self) -> str:
        return f"AnalyticFunction({self.name!r}, dim={self.dim})"

    def _compiled(self, alpha):
        alpha = tuple(alpha)
        if alpha not in self._cache:
            e = self.expr
            for s, k in zip(self.symbols, alpha):
                if k:
                    e = sp.diff(e, s, k)
            self._cache[alpha] = sp.lambdify(self.symbols, e, "numpy")
        return self._cache[alpha]

    def derivative(self, alpha, X) -> np.ndarray:
        """``D^alpha f`` at the rows of ``X`` (shape ``(k, n)``)."""
        X = np.atleast_2d(np.asarray(X, dtype=float).reshape(-1, self.dim))
        val = self._compiled(alpha)(*[X[:, i] for i in range(self.dim)])
        return np.broadcast_to(np.asarray(val, dtype=float), (X.shape[0],)).copy()

    def __call__(self, X) -> np.ndarray:
        return self.derivative((0,) * self.dim, X)

    def gradient_norm(self, X) -> np.ndarray:
        """Euclidean norm of the gradient."""
        parts = [self.derivative(a, X) for a in multi_indices(self.dim, 1, exact=True)]
        return np.sqrt(np.sum(np.square(parts), axis=0))

    def taylor(self, y, m: int) -> Polynomial:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        coeffs = {a: float(self.derivative(a, y[None, :])[0]) / multi_factorial(a)
                  for a in multi_indices(self.dim, m)}
        return Polynomial(self.dim, m, coeffs, tuple(y))
