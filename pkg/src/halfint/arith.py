"""Exact integer and character arithmetic behind the multiplier system.

Everything that feeds the weight-(k+1/2) automorphy factor lives here: the
extended quadratic-residue symbol, the normalizing fourth root of unity
``eps_d``, Dirichlet characters of modulus divisible by 4, modular inverses,
and the twisted Kloosterman-type residue sums that expand Poincare series
into Fourier coefficients.

Conventions (pinned empirically by the theta-automorphy test in the forms
layer):

* ``kronecker(c, d)`` for d odd follows the classical extension to negative
  d: ``(c/d) = (c/|d|)`` for c > 0, ``-(c/|d|)`` for c < 0, and
  ``(0/+-1) = 1``.  With this choice ``eps_d(d)**2 == kronecker(-1, d)``
  holds for every odd d, positive or negative.
* The unit weight appearing in the Kloosterman-type sums is

      nu_bar(c, d) = conj(psi(d)) * (c/d) * (-1/d)**k * eps_d(d)

  i.e. the complex conjugate of the full weight-(k+1/2) multiplier.  The
  ``+1`` power of eps_d (not ``-1``) is forced by Hermitian symmetry of the
  Poincare pairing; see the sign-convention tests.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "kronecker",
    "eps_d",
    "mod_inverse",
    "DirichletCharacter",
    "enumerate_even_characters",
    "trivial_character",
    "MultiplierData",
    "kloosterman_theta",
    "kloosterman_theta_naive",
    "kloosterman_theta_row",
    "kloosterman_theta_col",
    "unit_table",
]


def _jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd n >= 1, by the binary algorithm."""
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def kronecker(c: int, d: int) -> int:
    """Extended quadratic-residue symbol (c/d) for odd d (d may be negative).

    Completely multiplicative in c for fixed d, periodic in c mod |d| up to
    the negative-d sign rule.
    """
    if d == 0 or d % 2 == 0:
        raise InvalidArgumentError(f"kronecker: d must be odd and nonzero, got {d}")
    if d < 0:
        if c == 0:
            return 1 if d == -1 else 0
        return _jacobi(c, -d) if c > 0 else -_jacobi(c, -d)
    return _jacobi(c, d)


def eps_d(d: int) -> complex:
    """The fourth root of unity attached to odd d: 1 for d=1 (4), i for d=3 (4).

    Satisfies eps_d(d)**2 == kronecker(-1, d) for every odd d.
    """
    if d % 2 == 0:
        raise InvalidArgumentError(f"eps_d: d must be odd, got {d}")
    return 1.0 + 0.0j if d % 4 == 1 else 1.0j


def mod_inverse(a: int, c: int) -> int:
    """Inverse of a modulo c, normalized to [0, c)."""
    if c <= 0:
        raise InvalidArgumentError(f"mod_inverse: modulus must be positive, got {c}")
    try:
        return pow(a, -1, c)
    except ValueError as exc:
        raise InvalidArgumentError(f"mod_inverse: gcd({a}, {c}) != 1") from exc


def _factorize(n: int) -> list[tuple[int, int]]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1
    if n > 1:
        out.append((n, 1))
    return out


def _primitive_root(q: int, p: int) -> int:
    """Smallest primitive root modulo the odd prime power q = p**e."""
    phi = q - q // p
    fac = [f for f, _ in _factorize(phi)]
    for g in range(2, q):
        if math.gcd(g, q) != 1:
            continue
        if all(pow(g, phi // f, q) != 1 for f in fac):
            return g
    raise RuntimeError(f"no primitive root mod {q}")  # unreachable for odd p**e


def _unit_group_generators(m: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Generators and their orders for (Z/m)^*, CRT-componentwise.

    For the 2-part: modulus 4 uses (-1); modulus 2**e with e >= 3 uses
    (-1, 5).  Each generator is lifted to a residue mod m that is 1 on the
    other CRT components.
    """
    gens: list[int] = []
    orders: list[int] = []
    for p, e in _factorize(m):
        q = p**e
        rest = m // q
        local: list[tuple[int, int]] = []
        if p == 2:
            if e == 2:
                local = [(3, 2)]
            elif e >= 3:
                local = [(q - 1, 2), (5, 2 ** (e - 2))]
            # e == 1: trivial unit group, no generator
        else:
            local = [(_primitive_root(q, p), q - q // p)]
        for g, order in local:
            if rest == 1:
                lift = g % m
            else:
                # CRT lift: g mod q, 1 mod rest
                inv_rest = pow(rest % q, -1, q) if q > 1 else 0
                lift = (1 + rest * ((g - 1) * inv_rest % q)) % m
            gens.append(lift)
            orders.append(order)
    return tuple(gens), tuple(orders)


def _discrete_log_table(m: int, gens: tuple[int, ...], orders: tuple[int, ...]) -> dict[int, tuple[int, ...]]:
    """Map each unit residue mod m to its exponent vector on the generators."""
    table = {1 % m: tuple(0 for _ in gens)}
    if not gens:
        return table
    # iterate the direct product of cyclic groups
    from itertools import product

    for exps in product(*(range(o) for o in orders)):
        r = 1
        for g, e in zip(gens, exps):
            r = r * pow(g, e, m) % m
        table[r] = exps
    return table


@lru_cache(maxsize=None)
def _modulus_data(m: int):
    gens, orders = _unit_group_generators(m)
    dlog = _discrete_log_table(m, gens, orders)
    return gens, orders, dlog


@dataclass(frozen=True)
class DirichletCharacter:
    """A Dirichlet character mod ``modulus``, given by generator images.

    ``exponents[i]`` is t_i with chi(g_i) = exp(2 pi i t_i / orders[i]) for
    the fixed generator tuple of (Z/modulus)^*.  Values are exact roots of
    unity (rational angles); evaluation is O(1) via a precomputed table.
    """

    modulus: int
    exponents: tuple[int, ...]
    _values: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        gens, orders, dlog = _modulus_data(self.modulus)
        if len(self.exponents) != len(orders):
            raise InvalidArgumentError("exponent tuple does not match unit-group structure")
        vals = np.zeros(self.modulus, dtype=np.complex128)
        for r, exps in dlog.items():
            ang = Fraction(0)
            for t, e, o in zip(self.exponents, exps, orders):
                ang += Fraction(t * e, o)
            vals[r] = cmath.exp(2j * cmath.pi * float(ang % 1))
        object.__setattr__(self, "_values", vals)

    def __call__(self, a: int) -> complex:
        a %= self.modulus
        if math.gcd(a, self.modulus) != 1:
            return 0.0 + 0.0j
        return complex(self._values[a])

    def angle(self, a: int) -> Fraction | None:
        """Exact angle q with chi(a) = e^(2 pi i q), or None if chi(a) = 0."""
        a %= self.modulus
        if math.gcd(a, self.modulus) != 1:
            return None
        gens, orders, dlog = _modulus_data(self.modulus)
        exps = dlog[a]
        ang = Fraction(0)
        for t, e, o in zip(self.exponents, exps, orders):
            ang += Fraction(t * e, o)
        return ang % 1

    @property
    def is_even(self) -> bool:
        return self.angle(-1) == 0

    @property
    def is_real(self) -> bool:
        gens, orders, _ = _modulus_data(self.modulus)
        return all((2 * t) % o == 0 for t, o in zip(self.exponents, orders))

    @property
    def is_trivial(self) -> bool:
        return all(t == 0 for t in self.exponents)

    @property
    def conductor(self) -> int:
        m = self.modulus
        for f in sorted(d for d in range(1, m + 1) if m % d == 0):
            if all(self(a) == 1.0 + 0.0j for a in range(1, m + 1)
                   if math.gcd(a, m) == 1 and a % f == 1 % f):
                return f
        return m  # unreachable

    def values_on(self, residues: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on an integer array (any sign)."""
        return self._values[np.mod(residues, self.modulus)]


def enumerate_even_characters(modulus: int) -> list[DirichletCharacter]:
    """All even Dirichlet characters mod ``modulus`` (modulus divisible by 4).

    Deterministic order: lexicographic in the generator-exponent tuples.
    The count is phi(modulus)/2.
    """
    if modulus % 4 != 0:
        raise InvalidArgumentError(f"modulus must be divisible by 4, got {modulus}")
    from itertools import product

    gens, orders, _ = _modulus_data(modulus)
    out = []
    for exps in product(*(range(o) for o in orders)):
        chi = DirichletCharacter(modulus, tuple(exps))
        if chi.is_even:
            out.append(chi)
    return out


def trivial_character(modulus: int) -> DirichletCharacter:
    gens, orders, _ = _modulus_data(modulus)
    return DirichletCharacter(modulus, tuple(0 for _ in orders))


@dataclass(frozen=True)
class MultiplierData:
    """Bottom-row data (c, d) of a level-4N matrix plus the integer weight k.

    ``value(psi)`` is the conjugated unit multiplier
    conj(psi(d)) (c/d) (-1/d)^k eps_d(d); its modulus is 1 whenever
    gcd(d, modulus) = 1.
    """

    c: int
    d: int
    k: int

    def __post_init__(self):
        if self.d % 2 == 0:
            raise InvalidArgumentError("MultiplierData: d must be odd")
        if math.gcd(self.c, self.d) != 1:
            raise InvalidArgumentError("MultiplierData: gcd(c, d) must be 1")

    def value(self, psi: DirichletCharacter) -> complex:
        return (
            psi(self.d).conjugate()
            * kronecker(self.c, self.d)
            * kronecker(-1, self.d) ** self.k
            * eps_d(self.d)
        )


# ---------------------------------------------------------------------------
# Kloosterman-type sums
# ---------------------------------------------------------------------------

@lru_cache(maxsize=512)
def unit_table(c: int, psi: DirichletCharacter, k: int):
    """Precomputed (d, dbar, nu_bar) arrays over the units d mod c.

    This is the shared inner-loop table: nu_bar(d) = conj(psi(d)) (c/d)
    (-1/d)^k eps_d(d).  Immutable after construction.
    """
    ds = [d for d in range(1, c) if math.gcd(d, c) == 1]
    d_arr = np.array(ds, dtype=np.int64)
    dbar_arr = np.array([pow(int(d), -1, c) for d in ds], dtype=np.int64)
    nu = np.empty(len(ds), dtype=np.complex128)
    for i, d in enumerate(ds):
        nu[i] = (
            psi(d).conjugate()
            * kronecker(c, d)
            * kronecker(-1, d) ** k
            * eps_d(d)
        )
    d_arr.setflags(write=False)
    dbar_arr.setflags(write=False)
    nu.setflags(write=False)
    return d_arr, dbar_arr, nu


def _check_level(c: int, psi: DirichletCharacter) -> None:
    if c <= 0 or c % psi.modulus != 0 or c % 4 != 0:
        raise InvalidArgumentError(
            f"c = {c} must be a positive multiple of the character modulus {psi.modulus} (and of 4)"
        )


def kloosterman_theta_naive(m: int, n: int, c: int, psi: DirichletCharacter, k: int) -> complex:
    """Direct two-nested-loop reference: sum over units d mod c of
    nu_bar(d) e((m dbar + n d)/c).  Kept as the oracle for the batched paths."""
    _check_level(c, psi)
    total = 0.0 + 0.0j
    for d in range(1, c):
        if math.gcd(d, c) != 1:
            continue
        dbar = pow(d, -1, c)
        nu = psi(d).conjugate() * kronecker(c, d) * kronecker(-1, d) ** k * eps_d(d)
        total += nu * cmath.exp(2j * cmath.pi * (m * dbar + n * d) / c)
    return total


def kloosterman_theta(m: int, n: int, c: int, psi: DirichletCharacter, k: int) -> complex:
    """Twisted Kloosterman-type sum with the theta multiplier weight.

    Equals ``kloosterman_theta_naive`` up to floating-point reordering;
    uses the cached unit table.
    """
    _check_level(c, psi)
    d, dbar, nu = unit_table(c, psi, k)
    phase = np.exp((2j * np.pi / c) * (m * dbar + n * d))
    return complex(np.dot(nu, phase))


def kloosterman_theta_row(m: int, c: int, psi: DirichletCharacter, k: int) -> np.ndarray:
    """K(m, n; c) for all residues n = 0..c-1 at once, via a length-c FFT.

    The sum is c-periodic in n; index the result with ``n % c``.
    """
    _check_level(c, psi)
    d, dbar, nu = unit_table(c, psi, k)
    v = np.zeros(c, dtype=np.complex128)
    np.add.at(v, d, nu * np.exp((2j * np.pi * m / c) * dbar))
    return c * np.fft.ifft(v)


def kloosterman_theta_col(n: int, c: int, psi: DirichletCharacter, k: int) -> np.ndarray:
    """K(m, n; c) for all residues m = 0..c-1 at once (FFT over the dbar slot)."""
    _check_level(c, psi)
    d, dbar, nu = unit_table(c, psi, k)
    v = np.zeros(c, dtype=np.complex128)
    np.add.at(v, dbar, nu * np.exp((2j * np.pi * n / c) * d))
    return c * np.fft.ifft(v)
