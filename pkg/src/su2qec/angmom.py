"""Angular-momentum arithmetic for the stretched (J = j1 + j2) case.

Quantum numbers are :class:`HalfInt` values stored as twice-value integers.
Two evaluation routes exist for Clebsch-Gordan coefficients: exact rational
arithmetic on Python integers (used when ``2J <= 400``) and a log-binomial
route that stays finite for J of order 1e5 and beyond.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache, total_ordering
from numbers import Rational

from .errors import DomainError

EXACT_TWICE_J_LIMIT = 400


@total_ordering
class HalfInt:
    """Exact half-integer, stored as ``twice`` = 2 * value."""

    __slots__ = ("twice",)

    def __init__(self, twice: int):
        if isinstance(twice, bool) or not isinstance(twice, int):
            raise TypeError("HalfInt takes the integer twice-value; use HalfInt.of()")
        object.__setattr__(self, "twice", twice)

    def __setattr__(self, name, value):
        raise AttributeError("HalfInt is immutable")

    def __reduce__(self):
        return (HalfInt, (self.twice,))

    @classmethod
    def of(cls, value) -> "HalfInt":
        """Build from int, Fraction, float, HalfInt or strings like ``"3/2"``."""
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, str):
            text = value.strip()
            try:
                value = Fraction(text)
            except ValueError as exc:
                raise DomainError(f"cannot parse half-integer from {value!r}") from exc
        if isinstance(value, bool):
            raise DomainError("booleans are not quantum numbers")
        if isinstance(value, int):
            return cls(2 * value)
        if isinstance(value, Rational):
            doubled = Fraction(value) * 2
            if doubled.denominator != 1:
                raise DomainError(f"{value} is not a multiple of 1/2")
            return cls(int(doubled))
        doubled = float(value) * 2
        if not math.isfinite(doubled) or doubled != round(doubled):
            raise DomainError(f"{value!r} is not a multiple of 1/2")
        return cls(int(round(doubled)))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __float__(self) -> float:
        return self.twice / 2

    def __int__(self) -> int:
        if self.twice % 2:
            raise DomainError(f"{self} is not an integer")
        return self.twice // 2

    def __hash__(self):
        return hash(("HalfInt", self.twice))

    def __eq__(self, other):
        try:
            other = HalfInt.of(other)
        except (DomainError, TypeError, ValueError):
            return NotImplemented
        return self.twice == other.twice

    def __lt__(self, other):
        other = HalfInt.of(other)
        return self.twice < other.twice

    def __add__(self, other):
        return HalfInt(self.twice + HalfInt.of(other).twice)

    __radd__ = __add__

    def __sub__(self, other):
        return HalfInt(self.twice - HalfInt.of(other).twice)

    def __rsub__(self, other):
        return HalfInt(HalfInt.of(other).twice - self.twice)

    def __neg__(self):
        return HalfInt(-self.twice)

    def __abs__(self):
        return HalfInt(abs(self.twice))

    def __mul__(self, k):
        if isinstance(k, bool) or not isinstance(k, int):
            return NotImplemented
        return HalfInt(self.twice * k)

    __rmul__ = __mul__

    def __repr__(self):
        return f"HalfInt({self})"

    def __str__(self):
        return str(self.twice // 2) if self.twice % 2 == 0 else f"{self.twice}/2"


def _twice(x) -> int:
    return HalfInt.of(x).twice


def _check_projection(tJ: int, tM: int, what: str = "M") -> None:
    if tJ < 0:
        raise DomainError("J must be nonnegative")
    if abs(tM) > tJ:
        raise DomainError(f"|{what}| > J")
    if (tJ - tM) % 2:
        raise DomainError(f"J - {what} must be an integer")


def ladder_coeff(J, M, sign: str) -> float:
    """sqrt((J -+ M)(J +- M + 1)) for ``sign`` in {"plus", "minus"}."""
    tJ, tM = _twice(J), _twice(M)
    _check_projection(tJ, tM)
    if sign in ("plus", "+"):
        num = (tJ - tM) * (tJ + tM + 2)
    elif sign in ("minus", "-"):
        num = (tJ + tM) * (tJ - tM + 2)
    else:
        raise DomainError(f"sign must be 'plus' or 'minus', got {sign!r}")
    # num is 4x the product
    return math.sqrt(num) / 2 if num else 0.0


# ---------------------------------------------------------------------------
# log-binomials

_SMALL_K = 64


def _stirling_remainder(x: int) -> float:
    """ln(x!) minus its Stirling main part, for x >= _SMALL_K."""
    inv = 1.0 / x
    inv2 = inv * inv
    return inv * (1 / 12 - inv2 * (1 / 360 - inv2 * (1 / 1260 - inv2 / 1680)))


@lru_cache(maxsize=1 << 16)
def _log_binomial(n: int, k: int) -> float:
    k = min(k, n - k)
    if k == 0:
        return 0.0
    if k < _SMALL_K:
        return math.log(math.comb(n, k))
    nk = n - k
    # n ln n - k ln k - (n-k) ln(n-k), rearranged so both pieces are positive
    main = k * math.log(n / k) - nk * math.log1p(-k / n)
    half_log = 0.5 * math.log(n / (2 * math.pi * k * nk))
    return main + half_log + (
        _stirling_remainder(n) - _stirling_remainder(k) - _stirling_remainder(nk)
    )


def log_binomial(n: int, k: int) -> float:
    """ln C(n, k), accurate to a few ulp of the result for any n."""
    if isinstance(n, bool) or isinstance(k, bool):
        raise DomainError("integer arguments required")
    n, k = int(n), int(k)
    if k < 0 or k > n:
        raise DomainError(f"log_binomial needs 0 <= k <= n, got n={n}, k={k}")
    return _log_binomial(n, k)


def _log_binomial_or_none(n: int, k: int):
    if k < 0 or k > n:
        return None
    return _log_binomial(n, k)


# ---------------------------------------------------------------------------
# Clebsch-Gordan coefficients, stretched case only


def _cg_indices(tJ, tM, tj1, tm1):
    """Binomial arguments for the stretched coefficient, or None if it vanishes."""
    tj2 = tJ - tj1
    if tj2 < 0:
        raise DomainError("need j2 = J - j1 >= 0")
    if tj1 < 0:
        raise DomainError("j1 must be nonnegative")
    _check_projection(tJ, tM)
    _check_projection(tj1, tm1, "m1")
    tm2 = tM - tm1
    if abs(tm2) > tj2:
        return None
    return (
        (tj1, (tj1 + tm1) // 2),
        (tj2, (tj2 + tm2) // 2),
        (tJ, (tJ + tM) // 2),
    )


def _cg_squared_exact(idx) -> Fraction:
    (n1, k1), (n2, k2), (n3, k3) = idx
    return Fraction(math.comb(n1, k1) * math.comb(n2, k2), math.comb(n3, k3))


def stretched_cg(J, M, j1, m1, method: str = "auto") -> float:
    """<j1 m1; j2 M-m1 | J M> with j2 = J - j1.

    The coefficient is nonnegative in this case. ``method`` is ``"exact"``
    (big-rational), ``"log"`` (log-binomials) or ``"auto"`` (exact when
    ``2J <= 400``). A coefficient whose second projection falls outside
    [-j2, j2] is returned as 0.
    """
    tJ, tM, tj1, tm1 = _twice(J), _twice(M), _twice(j1), _twice(m1)
    idx = _cg_indices(tJ, tM, tj1, tm1)
    if idx is None:
        return 0.0
    if method == "auto":
        method = "exact" if tJ <= EXACT_TWICE_J_LIMIT else "log"
    if method == "exact":
        sq = _cg_squared_exact(idx)
        return math.sqrt(sq.numerator / sq.denominator)
    if method == "log":
        (n1, k1), (n2, k2), (n3, k3) = idx
        return math.exp(0.5 * (_log_binomial(n1, k1) + _log_binomial(n2, k2)
                               - _log_binomial(n3, k3)))
    raise DomainError(f"unknown method {method!r}")


def stretched_cg_squared_exact(J, M, j1, m1) -> Fraction:
    """Exact square of :func:`stretched_cg` as a Fraction."""
    idx = _cg_indices(_twice(J), _twice(M), _twice(j1), _twice(m1))
    return Fraction(0) if idx is None else _cg_squared_exact(idx)


def log_cg_squared(tJ: int, tM: int, tj1: int, tm1: int) -> float:
    """ln of the squared stretched coefficient from twice-values; -inf if it vanishes."""
    tj2 = tJ - tj1
    tm2 = tM - tm1
    if abs(tm2) > tj2 or abs(tm1) > tj1:
        return -math.inf
    return (_log_binomial(tj1, (tj1 + tm1) // 2) + _log_binomial(tj2, (tj2 + tm2) // 2)
            - _log_binomial(tJ, (tJ + tM) // 2))


def projections(j) -> list[HalfInt]:
    """[-j, -j+1, ..., j]."""
    tj = _twice(j)
    if tj < 0:
        raise DomainError("j must be nonnegative")
    return [HalfInt(t) for t in range(-tj, tj + 1, 2)]


# ---------------------------------------------------------------------------
# ladder-inverse sum and binomial moments


def ladder_inverse_sum(J, n, m) -> float:
    """Sum of 1/c+_M for M = n, n+1, ..., m-1 (arguments may come in either order)."""
    tJ, tn, tm = _twice(J), _twice(n), _twice(m)
    if tn > tm:
        tn, tm = tm, tn
    _check_projection(tJ, tn, "n")
    _check_projection(tJ, tm, "m")
    if tn == tm:
        return 0.0
    if tm - 2 >= tJ:
        raise DomainError("summand with c+_M = 0 (m - 1 >= J)")
    terms = []
    for tk in range(tn, tm, 2):
        prod4 = (tJ - tk) * (tJ + tk + 2)
        terms.append(2.0 / math.sqrt(prod4))
    return math.fsum(terms)


def binomial_moment(j1, p: int) -> int:
    """Sum over r = 0..2j1 of C(2j1, r) r**p, exactly."""
    tj1 = _twice(j1)
    if tj1 < 0:
        raise DomainError("j1 must be nonnegative")
    if isinstance(p, bool) or not isinstance(p, int) or not 0 <= p <= 4:
        raise DomainError("p must be an integer in 0..4")
    return sum(math.comb(tj1, r) * r**p for r in range(tj1 + 1))


def closed_form_moment(j1, p: int, corrected: bool = False) -> Fraction:
    """Closed forms of :func:`binomial_moment` in terms of j1.

    By default the p = 4 case uses the reference polynomial
    j1(1 - 3j1 + 16j1^2 + 4j1^3)/4, which only agrees with the direct sum for
    j1 <= 1. ``corrected=True`` gives the fourth moment of Binomial(2j1, 1/2),
    j1(4j1^3 + 12j1^2 + 3j1 - 1)/4. Cases p <= 3 are identical either way.
    """
    tj1 = _twice(j1)
    if tj1 < 0:
        raise DomainError("j1 must be nonnegative")
    j = Fraction(tj1, 2)
    scale = 2**tj1
    if p == 0:
        poly = Fraction(1)
    elif p == 1:
        poly = j
    elif p == 2:
        poly = j / 2 + j**2
    elif p == 3:
        poly = j**2 * (2 * j + 3) / 2
    elif p == 4:
        if not corrected:
            poly = j * (1 - 3 * j + 16 * j**2 + 4 * j**3) / 4
        else:
            poly = j * (4 * j**3 + 12 * j**2 + 3 * j - 1) / 4
    else:
        raise DomainError("p must be an integer in 0..4")
    return poly * scale
