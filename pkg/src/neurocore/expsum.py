"""Sums of decaying exponentials and their level crossings.

Between events every current in the simulator is a function of the form

    f(x) = c + sum_k b_k * exp(-r_k * x),   x >= 0,  r_k > 0

where ``x`` is the time elapsed since the start of the segment.  Crossing
times are found exactly (up to floating point) by isolating the monotone
pieces of ``f``: the extrema of ``f`` are the roots of ``f'``, and
``f' * exp(r_min x)`` is again a constant plus decaying exponentials with
one term fewer, so the recursion terminates after ``len(terms)`` levels.
Each monotone piece then holds at most one crossing, which a bracketed
Newton iteration pins down to the last representable point.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional

__all__ = ["ExpSum", "UP", "DOWN", "bracketed_root"]

UP = 1
DOWN = -1

_HORIZON_TAUS = 60.0
_EXP = math.exp


class ExpSum:
    """``const + sum(coeffs[k] * exp(-rates[k] * x))``.

    The constructor trusts its arguments: rates must be positive, distinct
    and ascending.  Use :meth:`from_terms` for arbitrary input.
    """

    __slots__ = ("const", "coeffs", "rates")

    def __init__(self, const: float = 0.0, coeffs: tuple = (), rates: tuple = ()):
        self.const = const
        self.coeffs = coeffs
        self.rates = rates

    @classmethod
    def from_terms(cls, const: float = 0.0, terms: Iterable[tuple[float, float]] = ()) -> "ExpSum":
        merged: dict[float, float] = {}
        for coeff, rate in terms:
            if coeff == 0.0:
                continue
            if not rate > 0:
                raise ValueError(f"rates must be positive, got {rate!r}")
            merged[rate] = merged.get(rate, 0.0) + coeff
        items = sorted((r, c) for r, c in merged.items() if c != 0.0)
        return cls(float(const), tuple(c for _, c in items), tuple(r for r, _ in items))

    @classmethod
    def single(cls, const: float, coeff: float, rate: float) -> "ExpSum":
        if coeff == 0.0:
            return cls(const)
        return cls(const, (coeff,), (rate,))

    @property
    def terms(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.coeffs, self.rates))

    def __repr__(self):
        return f"ExpSum({self.const!r}, {self.coeffs!r}, {self.rates!r})"

    def __call__(self, x: float) -> float:
        total = self.const
        for c, r in zip(self.coeffs, self.rates):
            total += c * _EXP(-r * x)
        return total

    def derivative(self, x: float) -> float:
        total = 0.0
        for c, r in zip(self.coeffs, self.rates):
            total -= r * c * _EXP(-r * x)
        return total

    def __add__(self, other: "ExpSum") -> "ExpSum":
        if not other.coeffs:
            return ExpSum(self.const + other.const, self.coeffs, self.rates)
        if not self.coeffs:
            return ExpSum(self.const + other.const, other.coeffs, other.rates)
        return ExpSum.from_terms(self.const + other.const, self.terms + other.terms)

    def __sub__(self, other: "ExpSum") -> "ExpSum":
        return self + other.scaled(-1.0)

    def scaled(self, k: float) -> "ExpSum":
        if k == 0.0:
            return ExpSum(0.0)
        return ExpSum(self.const * k, tuple(c * k for c in self.coeffs), self.rates)

    def shifted(self, dx: float) -> "ExpSum":
        """The same function re-expressed with its origin moved to ``dx``."""
        return ExpSum(self.const, tuple(c * _EXP(-r * dx) for c, r in self.terms), self.rates)

    def upper_bound(self, horizon: float = math.inf) -> float:
        """An upper bound of ``f`` over ``0 <= x <= horizon``."""
        total = self.const
        for c, r in zip(self.coeffs, self.rates):
            if c > 0:
                total += c
            elif horizon < math.inf:
                total += c * _EXP(-r * horizon)
        return total

    def lower_bound(self, horizon: float = math.inf) -> float:
        """A lower bound of ``f`` over ``0 <= x <= horizon``."""
        total = self.const
        for c, r in zip(self.coeffs, self.rates):
            if c < 0:
                total += c
            elif horizon < math.inf:
                total += c * _EXP(-r * horizon)
        return total

    def default_horizon(self) -> float:
        if not self.rates:
            return 0.0
        return _HORIZON_TAUS / self.rates[0]

    def first_crossing(
        self, level: float, direction: int = UP, horizon: Optional[float] = None
    ) -> Optional[float]:
        """Earliest ``x`` in ``(0, horizon]`` where ``f`` crosses ``level``.

        An upward crossing is a passage from ``f < level`` to ``f >= level``;
        a downward crossing goes from ``f >= level`` to ``f < level``.  The
        returned point lies on the far side of the crossing when evaluated
        as ``(const - level) + sum(...)``; other summation orders can differ
        by a few ulps.
        Returns ``None`` when no crossing happens within the horizon (the
        tail beyond 60 slowest time constants is numerically flat).
        """
        default = self.default_horizon()
        if horizon is None or horizon > default:
            horizon = default
        if horizon <= 0 or not self.rates:
            return None
        c0 = self.const - level
        coeffs, rates = self.coeffs, self.rates
        points = [0.0, *_extrema(coeffs, rates, 0.0, horizon), horizon]
        gp = _value(c0, coeffs, rates, 0.0)
        for p, q in zip(points, points[1:]):
            gq = _value(c0, coeffs, rates, q)
            if direction == UP:
                hit = gp < 0.0 <= gq
            else:
                hit = gp >= 0.0 > gq
            if hit:
                return bracketed_root(c0, coeffs, rates, p, q, gp, gq, direction)
            gp = gq
        return None


def _value(c0, coeffs, rates, x):
    total = c0
    for c, r in zip(coeffs, rates):
        total += c * _EXP(-r * x)
    return total


def _extrema(coeffs, rates, lo, hi) -> list[float]:
    """Interior points of ``[lo, hi]`` where the derivative changes sign."""
    n = len(coeffs)
    if n <= 1:
        return []
    # rates ascend, so rates[0] is the slowest mode
    r0, c0 = rates[0], coeffs[0]
    h_const = -r0 * c0
    h_coeffs = tuple(-r * c for c, r in zip(coeffs[1:], rates[1:]))
    h_rates = tuple(r - r0 for r in rates[1:])
    if n == 2:
        # h(x) = h_const + b exp(-d x) has its single root in closed form
        ratio = -h_const / h_coeffs[0]
        if ratio <= 0.0:
            return []
        x = -math.log(ratio) / h_rates[0]
        return [x] if lo < x < hi else []
    return _sign_changes(h_const, h_coeffs, h_rates, lo, hi)


def _sign_changes(const, coeffs, rates, lo, hi) -> list[float]:
    points = [lo, *_extrema(coeffs, rates, lo, hi), hi]
    roots = []
    hp = _value(const, coeffs, rates, lo)
    for p, q in zip(points, points[1:]):
        hq = _value(const, coeffs, rates, q)
        if hp < 0.0 < hq:
            roots.append(bracketed_root(const, coeffs, rates, p, q, hp, hq, UP))
        elif hq < 0.0 < hp:
            roots.append(bracketed_root(const, coeffs, rates, p, q, hp, hq, DOWN))
        elif hq == 0.0 and hp != 0.0 and q < hi:
            roots.append(q)
        hp = hq
    return roots


def bracketed_root(c0, coeffs, rates, p, q, gp, gq, direction) -> float:
    """Root of a monotone exponential sum on ``[p, q]``.

    ``g(p)`` must be on the pre-crossing side and ``g(q)`` on the
    post-crossing side.  Newton steps are taken from the post side and
    replaced by bisection whenever they leave the bracket.  The result is
    the smallest point found whose value is on the post-crossing side.
    """
    if gq == 0.0:
        return q

    def post(v):
        return v >= 0.0 if direction == UP else v < 0.0

    lo, hi = p, q  # lo: pre side, hi: post side
    x = q
    for _ in range(200):
        v = c0
        d = 0.0
        for c, r in zip(coeffs, rates):
            e = c * _EXP(-r * x)
            v += e
            d -= r * e
        if post(v):
            hi = x
        else:
            lo = x
        if hi - lo <= 4e-16 * hi:
            break
        step = v / d if d != 0.0 else 0.0
        nx = x - step
        if not (lo < nx < hi):
            nx = 0.5 * (lo + hi)
        elif abs(step) <= 4e-16 * x:
            break
        x = nx
    if x == hi:
        return hi
    # converged just short of the root: step onto the post side
    for _ in range(16):
        x = math.nextafter(x, hi)
        if x >= hi or post(_value(c0, coeffs, rates, x)):
            return x
    return hi
