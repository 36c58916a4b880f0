"""Bulk and surface potentials with a convex/concave split.

Each potential ``f = f1 + f2`` carries a convex part ``f1`` (treated
implicitly by the time stepper) and a part ``f2`` with Lipschitz derivative
(treated explicitly).  Built-ins are polynomial; custom potentials are given
as ascending polynomial coefficient lists.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "PotentialSpec",
    "PotentialPair",
    "PotentialError",
    "double_well",
    "quadratic_well",
    "polynomial_potential",
    "potential_from_config",
    "eval_nodal",
]


class PotentialError(ArithmeticError):
    """Non-finite potential values (blow-up of the iterate)."""


@dataclass(frozen=True)
class PotentialSpec:
    name: str
    f1: Callable
    f1_prime: Callable
    f1_second: Callable
    f2: Callable
    f2_prime: Callable
    f2_second: Callable
    growth_p: float
    lipschitz_d: float

    def f(self, s):
        return self.f1(s) + self.f2(s)

    def f_prime(self, s):
        return self.f1_prime(s) + self.f2_prime(s)

    def f_second(self, s):
        return self.f1_second(s) + self.f2_second(s)

    def check(self, grid=None, n_pairs=2000, seed=0):
        """Sampled check of convexity, non-negativity and the Lipschitz bound.

        Returns a list of violated properties (empty when all hold).
        """
        s = np.linspace(-5.0, 5.0, 10001) if grid is None else np.asarray(grid, dtype=float)
        problems = []
        if np.any(self.f1_second(s) < 0):
            problems.append("f1 not convex")
        if np.any(self.f1(s) < 0):
            problems.append("f1 negative")
        if np.any(self.f(s) < -1e-14):
            problems.append("f negative")
        rng = np.random.default_rng(seed)
        a, b = rng.choice(s, n_pairs), rng.choice(s, n_pairs)
        gap = np.abs(self.f2_prime(a) - self.f2_prime(b))
        if np.any(gap > self.lipschitz_d * np.abs(a - b) * (1 + 1e-12) + 1e-14):
            problems.append("f2' exceeds its Lipschitz constant")
        return problems


@dataclass(frozen=True)
class PotentialPair:
    F: PotentialSpec
    G: PotentialSpec

    @classmethod
    def same(cls, spec: PotentialSpec) -> "PotentialPair":
        return cls(spec, spec)


def _poly(coeffs):
    c = np.asarray(coeffs, dtype=float)
    d1 = P.polyder(c) if len(c) > 1 else np.zeros(1)
    d2 = P.polyder(d1) if len(d1) > 1 else np.zeros(1)
    return (lambda s: P.polyval(s, c)), (lambda s: P.polyval(s, d1)), (lambda s: P.polyval(s, d2))


def polynomial_potential(f1, f2, name="polynomial") -> PotentialSpec:
    """Potential from ascending coefficient lists of its two parts.

    ``f2`` must have degree at most two so that its derivative is Lipschitz;
    the Lipschitz constant is then ``|2 * f2[2]|``.  The degree of ``f1+f2``
    is recorded as growth metadata.
    """
    f2 = list(f2) or [0.0]
    f1 = list(f1) or [0.0]
    if len(np.trim_zeros(np.asarray(f2, dtype=float), "b")) > 3:
        raise ValueError("f2 must be at most quadratic (Lipschitz derivative)")
    a, ap, app = _poly(f1)
    b, bp, bpp = _poly(f2)
    lip = abs(2.0 * f2[2]) if len(f2) > 2 else 0.0
    total = P.polyadd(f1, f2)
    growth = float(len(np.trim_zeros(np.asarray(total, dtype=float), "b")) - 1)
    return PotentialSpec(name, a, ap, app, b, bp, bpp, growth, lip)


def double_well() -> PotentialSpec:
    """``f(s) = (s**2 - 1)**2 / 4`` split as ``(s**4 + 1)/4`` and ``-s**2/2``."""
    return polynomial_potential([0.25, 0.0, 0.0, 0.0, 0.25], [0.0, 0.0, -0.5], name="double_well")


def quadratic_well(a: float = 0.0) -> PotentialSpec:
    """Convex ``(s - a)**2 / 2`` with no concave part (linear regime tests)."""
    return polynomial_potential([0.5 * a * a, -a, 0.5], [0.0], name="quadratic_well(%r)" % a)


def potential_from_config(value) -> PotentialSpec:
    """Build a potential from its config value.

    ``"double_well"``, ``"quadratic_well"``, or a table ``{f1 = [...], f2 = [...]}``.
    """
    if isinstance(value, str):
        if value == "double_well":
            return double_well()
        if value == "quadratic_well":
            return quadratic_well()
        raise ValueError("unknown potential %r" % value)
    if isinstance(value, dict):
        extra = set(value) - {"f1", "f2", "a"}
        if extra:
            raise ValueError("unknown potential keys: %s" % ", ".join(sorted(extra)))
        if "a" in value:
            return quadratic_well(float(value["a"]))
        spec = polynomial_potential(value.get("f1", [0.0]), value.get("f2", [0.0]))
        problems = spec.check()
        if problems:
            raise ValueError("potential violates assumptions: " + "; ".join(problems))
        return spec
    raise ValueError("potential must be a name or a coefficient table")


_WHICH = {
    "f": PotentialSpec.f,
    "f'": PotentialSpec.f_prime,
    "f1'": lambda spec, s: spec.f1_prime(s),
    "f2'": lambda spec, s: spec.f2_prime(s),
    "f1''": lambda spec, s: spec.f1_second(s),
}


def eval_nodal(spec: PotentialSpec, which: str, values) -> np.ndarray:
    """Apply ``f``, ``f'``, ``f1'``, ``f2'`` or ``f1''`` componentwise.

    Raises :class:`PotentialError` if the output is not finite.
    """
    try:
        fn = _WHICH[which]
    except KeyError:
        raise ValueError("which must be one of %s" % sorted(_WHICH)) from None
    s = np.asarray(values, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.asarray(fn(spec, s), dtype=float)
    if not np.all(np.isfinite(out)):
        raise PotentialError("non-finite %s in potential %s" % (which, spec.name))
    return out
