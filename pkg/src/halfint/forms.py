"""Concrete spaces of weight-(k+1/2) cusp forms on Gamma_0(4N).

The space is realized through its Poincare series: the n-th Poincare series
has Fourier coefficients

    a_{P_n}(m) = delta_{nm}
               + 2 pi e^{-i pi kappa / 2} (m/n)^{(kappa-1)/2}
                 sum_{c > 0, 4N | c} K(n, m; c) / c  J_{kappa-1}(4 pi sqrt(nm) / c),

with kappa = k + 1/2, K the theta-multiplier Kloosterman-type sum from
``arith`` and J the half-odd-order Bessel function.  The c-sum is truncated
at ``c_max`` with an attached tail bound (|J_nu(x)| <= (x/2)^nu / nu!).

From the resulting coefficient matrix everything else is linear algebra:

* numerical rank (row-rescaled SVD, stability across a tolerance decade)
  gives the dimension and a working basis;
* the reproducing property <f, P_n> = Gamma(kappa-1) / (i_{4N} (4 pi n)^{kappa-1}) a_f(n)
  turns Poincare coordinates into exact Petersson inner products;
* T(p^2) matrices are fitted on a coefficient window and diagonalized in
  Petersson-orthonormal coordinates; degenerate Hecke blocks (these occur
  systematically at level 4, where the two old copies of a plus-space
  eigenform share every T(p^2) eigenvalue) are split by the evaluation-based
  Fricke involution, which commutes with the Hecke action;
* eigenvectors are phase-rotated to real coefficient vectors, so the
  conjugation operator acts trivially and the Fricke sign is directly
  measurable.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .arith import (
    DirichletCharacter,
    enumerate_even_characters,
    eps_d,
    kloosterman_theta_row,
    kronecker,
    trivial_character,
)
from .errors import (
    ConsistencyError,
    DegeneracyError,
    IllConditionedSpaceError,
    IndeterminateError,
    InvalidArgumentError,
    TruncationError,
)
from .special import bessel_j_half_array, gamma_complex, upper_incomplete_gamma

__all__ = [
    "SpaceParams",
    "space_params",
    "index_gamma0",
    "QExpansion",
    "EigenformRecord",
    "PoincareMatrix",
    "poincare_matrix",
    "poincare_expansion",
    "theta_series",
    "weight2_form_F",
    "theta_multiplier_j",
    "SpaceBasis",
    "space_basis",
    "Space",
    "build_space",
    "hecke_tp2",
    "eigenbasis",
    "fricke_k_eigenvalue",
    "petersson_norm",
    "u4",
    "plus_space_projector",
    "w4_map",
    "space_to_dict",
    "space_from_dict",
]


def index_gamma0(level: int) -> int:
    """Index of Gamma_0(level) in SL_2(Z): level * prod_{p | level} (1 + 1/p)."""
    if level < 1:
        raise InvalidArgumentError(f"level must be positive, got {level}")
    idx = level
    n, p = level, 2
    while p * p <= n:
        if n % p == 0:
            idx = idx // p * (p + 1)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        idx = idx // n * (n + 1)
    return idx


@dataclass(frozen=True)
class SpaceParams:
    """The triple (k, N, psi) plus derived constants of S_{k+1/2}(4N, psi)."""

    k: int
    N: int
    psi: DirichletCharacter
    index_i4N: int
    strip: tuple[float, float]

    @property
    def kappa(self) -> float:
        return self.k + 0.5

    @property
    def level(self) -> int:
        return 4 * self.N

    @property
    def beta(self) -> float:
        """Coefficient growth exponent for cusp forms of this weight."""
        return self.k / 2.0 - 1.0 / 28.0

    @property
    def center(self) -> float:
        return self.k / 2.0 + 0.25


def space_params(k: int, N: int, psi: DirichletCharacter | None = None,
                 char_index: int = 0) -> SpaceParams:
    """Validated constructor; psi defaults to the char_index-th even character."""
    if k < 3:
        raise InvalidArgumentError(f"need k >= 3, got k = {k}")
    if N < 1:
        raise InvalidArgumentError(f"need N >= 1, got N = {N}")
    if psi is None:
        chars = enumerate_even_characters(4 * N)
        if not 0 <= char_index < len(chars):
            raise InvalidArgumentError(
                f"char_index {char_index} out of range (have {len(chars)} even characters mod {4 * N})")
        psi = chars[char_index]
    if psi.modulus != 4 * N:
        raise InvalidArgumentError(f"character modulus {psi.modulus} != 4N = {4 * N}")
    if not psi.is_even:
        raise InvalidArgumentError("psi must be even")
    return SpaceParams(k=k, N=N, psi=psi, index_i4N=index_gamma0(4 * N),
                       strip=(k / 2.0 - 0.25, k / 2.0 + 0.75))


# ---------------------------------------------------------------------------
# q-expansions
# ---------------------------------------------------------------------------

@dataclass
class QExpansion:
    """Truncated Fourier expansion a(1..M) (plus an optional constant term).

    ``coeff_growth_constant`` C and ``tail_bound_exponent`` beta give the
    working bound |a(n)| <= C n^beta used for evaluation tail estimates;
    ``coeff_errors`` bounds the truncation error of each stored coefficient.
    """

    coeffs: np.ndarray
    space: SpaceParams | None = None
    a0: complex = 0.0
    tail_bound_exponent: float = 0.0
    coeff_growth_constant: float = 1.0
    coeff_errors: np.ndarray | None = None

    @property
    def M(self) -> int:
        return len(self.coeffs)

    def tail_bound(self, y: float) -> float:
        """Bound on |sum_{n > M} a(n) e(nz)| at Im z = y, from C n^beta growth."""
        b = self.tail_bound_exponent
        x = 2.0 * math.pi * y * self.M
        g = upper_incomplete_gamma(b + 1.0, x).value.real
        return self.coeff_growth_constant * g / (2.0 * math.pi * y) ** (b + 1.0)

    def __call__(self, z: complex) -> complex:
        n = np.arange(1, self.M + 1)
        return complex(self.a0 + np.dot(self.coeffs, np.exp(2j * np.pi * z * n)))

    def eval_with_error(self, z: complex) -> tuple[complex, float]:
        y = z.imag
        n = np.arange(1, self.M + 1)
        decay = np.exp(-2.0 * np.pi * y * n)
        val = complex(self.a0 + np.dot(self.coeffs, np.exp(2j * np.pi * z * n)))
        err = self.tail_bound(y)
        if self.coeff_errors is not None:
            err += float(np.dot(self.coeff_errors, decay))
        return val, err

    def scaled(self, c: complex) -> "QExpansion":
        return QExpansion(self.coeffs * c, self.space, self.a0 * c,
                          self.tail_bound_exponent,
                          self.coeff_growth_constant * abs(c),
                          None if self.coeff_errors is None else self.coeff_errors * abs(c))

    def estimate_growth_constant(self) -> float:
        n = np.arange(1, self.M + 1, dtype=float)
        with np.errstate(divide="ignore"):
            c = float(np.max(np.abs(self.coeffs) / n ** self.tail_bound_exponent))
        return 1.5 * max(c, 1e-30)


def theta_series(M: int) -> QExpansion:
    """theta(z) = sum_{n in Z} q^(n^2): constant term 1, a(m) = 2 at squares."""
    if M < 1:
        raise InvalidArgumentError("M >= 1 required")
    coeffs = np.zeros(M, dtype=np.complex128)
    r = 1
    while r * r <= M:
        coeffs[r * r - 1] = 2.0
        r += 1
    return QExpansion(coeffs, None, a0=1.0, tail_bound_exponent=0.0,
                      coeff_growth_constant=2.1)


def _sigma(n: int) -> int:
    s = 0
    d = 1
    while d * d <= n:
        if n % d == 0:
            s += d
            if d != n // d:
                s += n // d
        d += 1
    return s


def weight2_form_F(M: int) -> QExpansion:
    """F(z) = sum_{n odd} sigma(n) q^n, the weight-2 partner of theta at level 4."""
    if M < 1:
        raise InvalidArgumentError("M >= 1 required")
    coeffs = np.zeros(M, dtype=np.complex128)
    for n in range(1, M + 1, 2):
        coeffs[n - 1] = _sigma(n)
    return QExpansion(coeffs, None, a0=0.0, tail_bound_exponent=1.5,
                      coeff_growth_constant=2.0)


def theta_multiplier_j(c: int, d: int, z: complex) -> complex:
    """The theta automorphy factor j(gamma, z) = (c/d) eps_d^{-1} (cz+d)^{1/2}."""
    return kronecker(c, d) / eps_d(d) * cmath.sqrt(c * z + d)


# ---------------------------------------------------------------------------
# Poincare series coefficients
# ---------------------------------------------------------------------------

@dataclass
class PoincareMatrix:
    """Coefficients a_{P_j}(n) for n = 1..M (rows), j = 1..j_max (columns),
    with per-entry c-sum tail bounds."""

    params: SpaceParams
    A: np.ndarray
    tails: np.ndarray
    c_max: int

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def j_max(self) -> int:
        return self.A.shape[1]

    def column(self, j: int) -> QExpansion:
        p = self.params
        q = QExpansion(self.A[:, j - 1].copy(), p,
                       tail_bound_exponent=p.beta + 0.01,
                       coeff_errors=self.tails[:, j - 1].copy())
        q.coeff_growth_constant = q.estimate_growth_constant()
        return q


def default_c_max(params: SpaceParams, j_max: int, M: int, c_mult: float = 2.5) -> int:
    """Tail-driven truncation of the c-sum: a fixed multiple of the largest
    Bessel transition point 4 pi sqrt(j M), rounded to a multiple of 4N."""
    lvl = params.level
    c = max(400 * params.N, int(c_mult * 4.0 * math.pi * math.sqrt(j_max * M)))
    return c - c % lvl + lvl


def _poincare_tail_bounds(params: SpaceParams, js: np.ndarray, M: int, c_max: int) -> np.ndarray:
    """Bound on the dropped c > c_max part, rows n = 1..M, columns js."""
    kappa = params.kappa
    nu = kappa - 1.0
    lvl = params.level
    n = np.arange(1, M + 1, dtype=float)[:, None]
    j = js[None, :].astype(float)
    t0 = c_max // lvl
    csum = lvl ** (-nu) * (t0 ** (-(nu - 1.0)) / (nu - 1.0) + float(t0) ** (-nu))
    pref = 2.0 * math.pi * (n / j) ** (nu / 2.0)
    return pref * (2.0 * math.pi * np.sqrt(n * j)) ** nu / math.gamma(nu + 1.0) * csum


def poincare_matrix(params: SpaceParams, j_max: int, M: int,
                    c_max: int | None = None, c_mult: float = 2.5) -> PoincareMatrix:
    """Coefficient matrix of P_1..P_{j_max} up to q^M by the truncated c-sum."""
    if c_max is None:
        c_max = default_c_max(params, j_max, M, c_mult)
    lvl = params.level
    if c_max < lvl:
        raise InvalidArgumentError(f"c_max = {c_max} smaller than the level {lvl}")
    k, psi, kappa = params.k, params.psi, params.kappa
    nu2 = 2 * k - 1  # Bessel order kappa - 1 = k - 1/2, doubled
    n_arr = np.arange(1, M + 1)
    sqrt_n = np.sqrt(n_arr.astype(float))
    S = np.zeros((M, j_max), dtype=np.complex128)
    for c in range(lvl, c_max + 1, lvl):
        gather = n_arr % c
        for j in range(1, j_max + 1):
            row = kloosterman_theta_row(j, c, psi, k)
            x = (4.0 * math.pi * math.sqrt(j) / c) * sqrt_n
            S[:, j - 1] += row[gather] * (bessel_j_half_array(nu2, x) / c)
    js = np.arange(1, j_max + 1)
    ratio = (n_arr[:, None].astype(float) / js[None, :].astype(float)) ** ((kappa - 1.0) / 2.0)
    A = 2.0 * math.pi * cmath.exp(-0.5j * math.pi * kappa) * ratio * S
    A[js - 1, np.arange(j_max)] += 1.0
    tails = _poincare_tail_bounds(params, js, M, c_max)
    return PoincareMatrix(params=params, A=A, tails=tails, c_max=c_max)


def poincare_expansion(n: int, params: SpaceParams, M: int, c_max: int) -> QExpansion:
    """The n-th Poincare series as a QExpansion (single-column build)."""
    if n < 1:
        raise InvalidArgumentError("n >= 1 required")
    if c_max < params.level:
        raise InvalidArgumentError(f"c_max must be at least the level {params.level}")
    pm = poincare_matrix(params, j_max=n, M=M, c_max=c_max)
    return pm.column(n)


# ---------------------------------------------------------------------------
# Basis extraction
# ---------------------------------------------------------------------------

_RANK_TOL = 1e-8


@dataclass
class SpaceBasis:
    """Numerically full-rank spanning set extracted from the Poincare columns.

    B holds coefficient vectors (columns), W the Poincare coordinates of each
    basis vector, so that B = A @ W with A the Poincare coefficient matrix.
    """

    params: SpaceParams
    pmatrix: PoincareMatrix
    d: int
    B: np.ndarray
    W: np.ndarray
    singular_values: np.ndarray
    gram: np.ndarray

    @property
    def M(self) -> int:
        return self.B.shape[0]

    def expansions(self) -> list[QExpansion]:
        out = []
        for i in range(self.d):
            errs = self.pmatrix.tails @ np.abs(self.W[:, i])
            q = QExpansion(self.B[:, i].copy(), self.params,
                           tail_bound_exponent=self.params.beta + 0.01,
                           coeff_errors=errs)
            q.coeff_growth_constant = q.estimate_growth_constant()
            out.append(q)
        return out


def reproducing_weights(params: SpaceParams, m: np.ndarray) -> np.ndarray:
    """Gamma(kappa-1) / (i_{4N} (4 pi m)^{kappa-1}): the Petersson pairing
    weight of f against P_m."""
    nu = params.kappa - 1.0
    g = gamma_complex(nu).value.real
    return g / (params.index_i4N * (4.0 * math.pi * np.asarray(m, dtype=float)) ** nu)


def _row_scale(params: SpaceParams, M: int) -> np.ndarray:
    n = np.arange(1, M + 1, dtype=float)
    return n ** (-(params.kappa - 1.0) / 2.0)


def _extract_basis(params: SpaceParams, pm: PoincareMatrix) -> SpaceBasis:
    D = _row_scale(params, pm.M)
    At = D[:, None] * pm.A
    U, sv, Vh = np.linalg.svd(At, full_matrices=False)
    # the c-sum truncation bounds set a noise floor below which singular
    # directions are indistinguishable from zero
    noise = float(np.linalg.norm(D[:, None] * pm.tails))
    tol = max(_RANK_TOL * (sv[0] if len(sv) else 0.0), 10.0 * noise)
    r = int(np.sum(sv > tol))
    r10 = int(np.sum(sv > tol / 10.0))
    if r != r10:
        raise IllConditionedSpaceError(
            f"numerical rank unstable across a tolerance decade ({r} vs {r10}); "
            "increase M and/or c_max")
    W = Vh[:r].conj().T / sv[:r]
    B = U[:, :r] / D[:, None]
    # Petersson Gram via the reproducing property, oriented so that
    # y^H G y = <f, f> for f = sum_i y_i q_i (conjugate-linear second slot)
    cw = reproducing_weights(params, np.arange(1, pm.j_max + 1))
    G = W.conj().T @ (cw[:, None] * B[: pm.j_max, :])
    herm_resid = float(np.max(np.abs(G - G.conj().T))) if r else 0.0
    if r and herm_resid > 1e-6 * float(np.max(np.abs(G))):
        raise ConsistencyError(f"Gram matrix not Hermitian (residual {herm_resid:.2e})")
    G = 0.5 * (G + G.conj().T)
    if r:
        evals = np.linalg.eigvalsh(G)
        if evals.min() <= 0:
            raise ConsistencyError("Gram matrix not positive definite")
    return SpaceBasis(params=params, pmatrix=pm, d=r, B=B, W=W,
                      singular_values=sv, gram=G)


def space_basis(params: SpaceParams, M: int, j_max: int | None = None,
                c_max: int | None = None) -> tuple[list[QExpansion], int]:
    """Spanning set of S_{k+1/2}(4N, psi) from Poincare series, plus dim."""
    if j_max is None:
        j_max = 9
    pm = poincare_matrix(params, j_max=j_max, M=M, c_max=c_max)
    sb = _extract_basis(params, pm)
    return sb.expansions(), sb.d


# ---------------------------------------------------------------------------
# Hecke operators
# ---------------------------------------------------------------------------

def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


def hecke_tp2(f: QExpansion, p: int) -> QExpansion:
    """T(p^2) on a q-expansion, p an odd prime not dividing 2N:

    b(n) = a(p^2 n) + psi(p) ((-1)^k n | p) p^(k-1) a(n)
                    + psi(p)^2 p^(2k-1) a(n / p^2).
    """
    if f.space is None:
        raise InvalidArgumentError("hecke_tp2 needs a QExpansion attached to a space")
    params = f.space
    if not _is_prime(p) or (2 * params.N) % p == 0:
        raise InvalidArgumentError(f"p = {p} must be a prime not dividing 2N = {2 * params.N}")
    M_out = f.M // (p * p)
    if M_out < 1:
        raise TruncationError(f"need M >= {p * p} coefficients, have {f.M}")
    k = params.k
    psi_p = params.psi(p)
    sign = (-1) ** k
    n = np.arange(1, M_out + 1)
    b = f.coeffs[p * p * n - 1].astype(np.complex128).copy()
    chi = np.array([kronecker(sign * int(m), p) for m in n], dtype=float)
    b += psi_p * chi * float(p) ** (k - 1) * f.coeffs[n - 1]
    lift = np.zeros(M_out, dtype=np.complex128)
    idx = n[n % (p * p) == 0]
    lift[idx - 1] = f.coeffs[idx // (p * p) - 1]
    b += psi_p ** 2 * float(p) ** (2 * k - 1) * lift
    out = QExpansion(b, params, tail_bound_exponent=f.tail_bound_exponent)
    out.coeff_growth_constant = out.estimate_growth_constant()
    return out


def _hecke_matrix(basis: SpaceBasis, p: int, n_rows: int | None = None) -> tuple[np.ndarray, float]:
    """Matrix of T(p^2) on the basis columns, fitted on a coefficient window.

    Returns (t, residual): columns of B @ t approximate T(p^2) applied to the
    basis columns on rows 1..n_rows (row-rescaled least squares).
    """
    params = basis.params
    M_out = basis.M // (p * p)
    if n_rows is None:
        n_rows = min(M_out, max(10, basis.d + 6))
    if n_rows < basis.d:
        raise TruncationError(f"Hecke window too small: need M >= {p * p * basis.d}")
    k = params.k
    psi_p = params.psi(p)
    sign = (-1) ** k
    n = np.arange(1, n_rows + 1)
    TB = basis.B[p * p * n - 1, :].astype(np.complex128).copy()
    chi = np.array([kronecker(sign * int(m), p) for m in n], dtype=float)
    TB += psi_p * float(p) ** (k - 1) * chi[:, None] * basis.B[n - 1, :]
    idx = n[n % (p * p) == 0]
    if len(idx):
        TB[idx - 1, :] += psi_p ** 2 * float(p) ** (2 * k - 1) * basis.B[idx // (p * p) - 1, :]
    D = _row_scale(params, n_rows)[:, None]
    t, res, _, _ = np.linalg.lstsq(D * basis.B[:n_rows, :], D * TB, rcond=None)
    fit = D * basis.B[:n_rows, :] @ t - D * TB
    return t, float(np.linalg.norm(fit) / max(np.linalg.norm(D * TB), 1e-300))


# ---------------------------------------------------------------------------
# Fricke involution (evaluation based)
# ---------------------------------------------------------------------------

def _fricke_eval(f: QExpansion, params: SpaceParams, z: complex) -> complex:
    """(f | H_{4N})(z) = i^kappa (4N)^(-kappa/2) z^(-kappa) f(-1 / (4N z))."""
    kappa = params.kappa
    lvl = params.level
    return (cmath.exp(0.5j * math.pi * kappa) * lvl ** (-kappa / 2.0)
            * z ** (-kappa) * f(-1.0 / (lvl * z)))


def _fit_points(params: SpaceParams, count: int) -> list[complex]:
    y0 = 1.0 / math.sqrt(params.level)
    xs = np.linspace(-0.35, 0.35, count)
    ys = y0 * (1.0 + 0.08 * np.cos(np.arange(count)))
    return [complex(x, y) for x, y in zip(xs, ys)]


def w4_map(f: QExpansion, space: "Space | SpaceBasis") -> QExpansion:
    """f | H_{4N} as a q-expansion, by evaluating the involution at sample
    points and fitting back into the space's basis."""
    basis = space.basis if isinstance(space, Space) else space
    params = basis.params
    pts = _fit_points(params, max(24, 4 * basis.d + 8))
    g = np.array([_fricke_eval(f, params, z) for z in pts])
    Phi = np.array([[QExpansion(basis.B[:, i], params)(z) for i in range(basis.d)] for z in pts])
    coef, _, _, _ = np.linalg.lstsq(Phi, g, rcond=None)
    resid = float(np.linalg.norm(Phi @ coef - g) / max(np.linalg.norm(g), 1e-300))
    if resid > 1e-6:
        raise ConsistencyError(f"Fricke image does not lie in the space (fit residual {resid:.2e})")
    out = QExpansion(basis.B @ coef, params, tail_bound_exponent=params.beta + 0.01)
    out.coeff_growth_constant = out.estimate_growth_constant()
    return out


def _fricke_matrix(basis: SpaceBasis) -> np.ndarray:
    """Matrix F with (f_i | H_{4N}) = sum_j F[j, i] f_j, via evaluation fits."""
    params = basis.params
    pts = _fit_points(params, max(24, 4 * basis.d + 8))
    Phi = np.array([[QExpansion(basis.B[:, i], params)(z) for i in range(basis.d)] for z in pts])
    Gvals = np.array([[_fricke_eval(QExpansion(basis.B[:, i], params), params, z) for i in range(basis.d)]
                      for z in pts])
    F, _, _, _ = np.linalg.lstsq(Phi, Gvals, rcond=None)
    return F


def fricke_twist_character(params: SpaceParams) -> DirichletCharacter:
    """Character of the space containing f | H_{4N} for f in S(4N, psi):
    conj(psi) times the quadratic symbol (4N/.)."""
    lvl = params.level
    targets = {a: params.psi(a).conjugate() * kronecker(lvl, a)
               for a in range(1, lvl) if math.gcd(a, lvl) == 1}
    for chi in enumerate_even_characters(lvl):
        if all(abs(chi(a) - v) < 1e-12 for a, v in targets.items()):
            return chi
    raise ConsistencyError("no even character matches the Fricke twist")


def fricke_is_stable(params: SpaceParams) -> bool:
    """True when H_{4N} preserves S(4N, psi), i.e. the twist is psi itself
    (for real psi: exactly when 4N is a perfect square)."""
    return fricke_twist_character(params) == params.psi


# ---------------------------------------------------------------------------
# Eigenforms
# ---------------------------------------------------------------------------

@dataclass
class EigenformRecord:
    """One Hecke eigenform, normalized to first nonzero coefficient 1.

    ``lambda_f`` is the K H_{4N} sign when the involution preserves the
    space (4N a perfect square, e.g. every N = 1 configuration); otherwise
    it is 0 and ``fricke_image`` holds the q-expansion of f | H_{4N}, which
    lives in the character space twisted by the quadratic symbol (4N/.).
    """

    expansion: QExpansion
    hecke_eigenvalues: dict[int, complex]
    lambda_f: int
    petersson_norm: float
    a1: complex
    poincare_coords: np.ndarray
    fricke_image: QExpansion | None = None
    unresolved_multiplicity: bool = False
    label: int = 0


@dataclass
class Space:
    """A fully built space: Poincare data, basis, Gram, Hecke matrices and
    the K-real Fricke-diagonal eigenbasis."""

    params: SpaceParams
    basis: SpaceBasis
    hecke_matrices: dict[int, np.ndarray]
    records: list[EigenformRecord]
    diagnostics: dict

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def pmatrix(self) -> PoincareMatrix:
        return self.basis.pmatrix


def fricke_k_eigenvalue(f: QExpansion, params: SpaceParams) -> int:
    """Sign lambda with f | K H_{4N} = lambda f, measured by evaluation.

    For a real-coefficient f this is the ratio of f | H_{4N} to f at several
    heights near the Fricke fixed point; the three probes must agree on one
    sign to 1e-6.
    """
    lvl = params.level
    root = 1.0 / math.sqrt(lvl)
    ratios = []
    for yfac in (1.05, 1.15, 1.30):
        y = yfac * root
        denom, derr = f.eval_with_error(complex(0.0, y))
        # noise floor: roundoff relative to the sum of term moduli at this height
        n = np.arange(1, f.M + 1)
        scale = float(np.dot(np.abs(f.coeffs), np.exp(-2.0 * np.pi * y * n)))
        if abs(denom) <= 10.0 * derr + 1e-11 * scale:
            continue
        num = _fricke_eval(f, params, complex(0.0, y))
        ratios.append(num / denom)
    if not ratios:
        raise IndeterminateError("form too small at all probe heights; retry with other y")
    signs = [1 if r.real > 0 else -1 for r in ratios]
    if len(set(signs)) != 1 or any(abs(r - s) > 1e-6 for r, s in zip(ratios, signs)):
        raise ConsistencyError(f"inconsistent Fricke ratios {ratios}")
    return signs[0]


def petersson_norm(f: QExpansion, pmatrix: PoincareMatrix,
                   coords: np.ndarray | None = None) -> float:
    """<f, f> through the reproducing property.

    Solves f = sum x_n P_n if coordinates are not supplied, then
    <f, f> = sum_n conj(x_n) Gamma(kappa-1)/(i_{4N} (4 pi n)^{kappa-1}) a_f(n).
    """
    params = pmatrix.params
    if coords is None:
        D = _row_scale(params, pmatrix.M)[:, None]
        coords, _, _, _ = np.linalg.lstsq(D * pmatrix.A, D[:, 0] * f.coeffs[: pmatrix.M], rcond=None)
        resid = float(np.linalg.norm((D * pmatrix.A) @ coords - D[:, 0] * f.coeffs[: pmatrix.M]))
        if resid > 1e-8 * max(1.0, float(np.linalg.norm(D[:, 0] * f.coeffs[: pmatrix.M]))):
            raise ConsistencyError(f"form not in the numerical Poincare span (residual {resid:.2e})")
    cw = reproducing_weights(params, np.arange(1, len(coords) + 1))
    val = complex(np.dot(coords.conj(), cw * f.coeffs[: len(coords)]))
    if abs(val.imag) > 1e-8 * abs(val) + 1e-300:
        raise ConsistencyError(f"Petersson norm not real: {val}")
    if val.real <= 0:
        raise ConsistencyError(f"Petersson norm not positive: {val}")
    return float(val.real)


def _split_blocks(vals: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(vals)
    blocks, cur = [], [int(order[0])]
    for i in order[1:]:
        if vals[int(i)] - vals[cur[-1]] < tol:
            cur.append(int(i))
        else:
            blocks.append(cur)
            cur = [int(i)]
    blocks.append(cur)
    return blocks


def build_space(params: SpaceParams, M: int | None = None, j_max: int | None = None,
                c_max: int | None = None, hecke_primes: tuple[int, ...] = (3, 5, 7),
                c_mult: float = 2.5) -> Space:
    """Construct the space and its K-real, Fricke-diagonal Hecke eigenbasis."""
    hecke_primes = tuple(p for p in hecke_primes if (2 * params.N) % p != 0)
    pmax = max(hecke_primes) if hecke_primes else 3
    if M is None:
        M = max(200, pmax * pmax * 12)
    if j_max is None:
        j_max = 9
    # grow the Poincare family until the numerical rank sits strictly inside it
    for attempt in range(4):
        pm = poincare_matrix(params, j_max=j_max, M=M, c_max=c_max, c_mult=c_mult)
        basis = _extract_basis(params, pm)
        d = basis.d
        if d < j_max - 1:
            break
        j_max += 4
    else:
        raise IllConditionedSpaceError(
            f"rank {d} still too close to the Poincare family size {j_max}")
    diagnostics: dict = {"M": M, "j_max": j_max, "c_max": pm.c_max,
                         "singular_values": basis.singular_values.tolist()}
    if d == 0:
        return Space(params, basis, {}, [], diagnostics)

    hecke = {}
    for p in hecke_primes:
        t, resid = _hecke_matrix(basis, p)
        hecke[p] = t
        diagnostics[f"hecke_fit_residual_{p}"] = resid

    L = np.linalg.cholesky(basis.gram)
    Lh = L.conj().T
    Lh_inv = np.linalg.inv(Lh)
    ortho = {p: Lh @ t @ Lh_inv for p, t in hecke.items()}
    herm = {}
    for p, h in ortho.items():
        diagnostics[f"hecke_asym_{p}"] = float(np.max(np.abs(h - h.conj().T)))
        herm[p] = 0.5 * (h + h.conj().T)

    psi_real = params.psi.is_real
    stable = fricke_is_stable(params)
    diagnostics["fricke_stable"] = stable
    operators = [herm[p] for p in sorted(herm)]
    if stable:
        # the involution acts inside the space: append it as the final
        # splitting operator (it separates the systematically degenerate
        # Hecke blocks coming from plus-space doubling)
        frk = _fricke_matrix(basis)
        frk_ortho = Lh @ frk @ Lh_inv
        diagnostics["fricke_asym"] = float(np.max(np.abs(frk_ortho - frk_ortho.conj().T)))
        operators.append(0.5 * (frk_ortho + frk_ortho.conj().T))

    V = np.eye(d, dtype=np.complex128)
    blocks = [list(range(d))]
    for op_index, h in enumerate(operators):
        new_blocks = []
        for blk in blocks:
            if len(blk) == 1:
                new_blocks.append(blk)
                continue
            Vb = V[:, blk]
            hb = Vb.conj().T @ h @ Vb
            hb = 0.5 * (hb + hb.conj().T)
            vals, vecs = np.linalg.eigh(hb)
            V[:, blk] = Vb @ vecs
            scale = 1e-6 * (1.0 + float(np.max(np.abs(vals))))
            for sub in _split_blocks(vals, scale):
                new_blocks.append([blk[i] for i in sub])
        blocks = new_blocks
    unresolved = {i for blk in blocks if len(blk) > 1 for i in blk}
    if unresolved:
        diagnostics["unresolved_block_sizes"] = sorted(len(b) for b in blocks if len(b) > 1)

    twist = None
    if not stable:
        # the Fricke image lives in the (4N/.)-twisted character space:
        # build that space once and fit every eigenform's image into it
        chi = fricke_twist_character(params)
        tparams = space_params(params.k, params.N, psi=chi)
        tjmax = j_max
        for attempt in range(4):
            pm_t = poincare_matrix(tparams, j_max=tjmax, M=M, c_max=c_max, c_mult=c_mult)
            tbasis = _extract_basis(tparams, pm_t)
            if tbasis.d < tjmax - 1:
                break
            tjmax += 4
        if tbasis.d != d:
            raise ConsistencyError(
                f"twisted space dimension {tbasis.d} != {d}; H_4N must be an isomorphism")
        pts = _fit_points(params, max(24, 4 * d + 8))
        Phi_t = np.array([[QExpansion(tbasis.B[:, i], tparams)(z) for i in range(d)]
                          for z in pts])
        twist = (tparams, pm_t, tbasis, pts, Phi_t)

    records = []
    cw_err = pm.tails
    for i in range(d):
        v = V[:, i]
        y = Lh_inv @ v
        u = basis.B @ y
        x = basis.W @ y
        if psi_real:
            idx = int(np.argmax(np.abs(u[: min(80, len(u))])))
            ph = u[idx] / abs(u[idx])
            u, y, x, v = u / ph, y / ph, x / ph, v / ph
            im_ratio = float(np.max(np.abs(u.imag)) / max(np.max(np.abs(u.real)), 1e-300))
            diagnostics.setdefault("k_reality_residuals", []).append(im_ratio)
            if im_ratio < 1e-6:
                u = u.real.astype(np.complex128)
        us = _row_scale(params, len(u)) * np.abs(u)
        n0 = int(np.argmax(us > 1e-8 * np.max(us)))
        scale = u[n0]
        u, y, x = u / scale, y / scale, x / scale
        norm_quad = complex(y.conj() @ basis.gram @ y)
        exp = QExpansion(u, params, tail_bound_exponent=params.beta + 0.01,
                         coeff_errors=(cw_err @ np.abs(x)))
        exp.coeff_growth_constant = exp.estimate_growth_constant()
        norm = petersson_norm(exp, pm, coords=x)
        if abs(norm - norm_quad.real) > 1e-8 * norm:
            raise ConsistencyError("norm mismatch between Gram and reproducing formulas")
        if stable:
            lam = fricke_k_eigenvalue(exp, params)
            fimg = None
        else:
            lam = 0
            tparams, pm_t, tbasis, pts, Phi_t = twist
            gvals = np.array([_fricke_eval(exp, params, z) for z in pts])
            coef, _, _, _ = np.linalg.lstsq(Phi_t, gvals, rcond=None)
            resid = float(np.linalg.norm(Phi_t @ coef - gvals) / max(np.linalg.norm(gvals), 1e-300))
            if resid > 1e-7:
                raise ConsistencyError(f"Fricke image fit residual {resid:.2e} too large")
            tc = tbasis.B @ coef
            xt = tbasis.W @ coef
            terr = pm_t.tails @ np.abs(xt) + resid * np.abs(tc)
            fimg = QExpansion(tc, tparams, tail_bound_exponent=tparams.beta + 0.01,
                              coeff_errors=terr)
            fimg.coeff_growth_constant = fimg.estimate_growth_constant()
            # the involution must close: (f|H)|H = f
            back = np.array([_fricke_eval(fimg, tparams, z) for z in pts[:5]])
            ref = np.array([exp(z) for z in pts[:5]])
            closure = float(np.linalg.norm(back - ref) / max(np.linalg.norm(ref), 1e-300))
            if closure > 1e-7:
                raise ConsistencyError(f"(f|H)|H != f (relative deviation {closure:.2e})")
            diagnostics.setdefault("fricke_fit_residuals", []).append(resid)
        heckevals = {}
        for p in sorted(herm):
            ev = complex(v.conj() @ herm[p] @ v) / complex(v.conj() @ v)
            if psi_real:
                if abs(ev.imag) > 1e-7 * (1.0 + abs(ev)):
                    raise ConsistencyError(f"non-real Hecke eigenvalue {ev} at p={p} with real psi")
                ev = ev.real
            heckevals[p] = ev
        records.append(EigenformRecord(
            expansion=exp, hecke_eigenvalues=heckevals, lambda_f=lam,
            petersson_norm=norm, a1=complex(u[0]), poincare_coords=x,
            fricke_image=fimg, unresolved_multiplicity=(i in unresolved)))

    key_p = sorted(herm)[0] if herm else None
    records.sort(key=lambda r: (round(float(np.real(r.hecke_eigenvalues.get(key_p, 0))), 6),
                                -r.lambda_f))
    for i, r in enumerate(records):
        r.label = i
    return Space(params, basis, hecke, records, diagnostics)


def eigenbasis(params: SpaceParams, M: int | None = None) -> list[EigenformRecord]:
    """Orthogonal basis of Hecke eigenforms (K-real, Fricke-diagonal)."""
    return build_space(params, M=M).records


# ---------------------------------------------------------------------------
# Level-4 plus space
# ---------------------------------------------------------------------------

def u4(f: QExpansion) -> QExpansion:
    """U(4): b(n) = a(4n)."""
    M_out = f.M // 4
    if M_out < 1:
        raise TruncationError("need at least 4 coefficients for U(4)")
    n = np.arange(1, M_out + 1)
    return QExpansion(f.coeffs[4 * n - 1].copy(), f.space, a0=f.a0,
                      tail_bound_exponent=f.tail_bound_exponent,
                      coeff_growth_constant=f.coeff_growth_constant * 4.0 ** f.tail_bound_exponent)


def plus_space_residues(k: int) -> tuple[int, int]:
    """Allowed coefficient residues mod 4 on the plus space: 0 and (-1)^k."""
    return (0, 1) if k % 2 == 0 else (0, 3)


def plus_space_projector(space: Space) -> list[QExpansion]:
    """Sub-basis of the plus space (N = 1): expansions supported on
    n = 0, (-1)^k mod 4, via the nullspace of the complementary rows."""
    params = space.params
    if params.N != 1:
        raise InvalidArgumentError("plus space is defined at N = 1 only")
    basis = space.basis
    allowed = plus_space_residues(params.k)
    n = np.arange(1, basis.M + 1)
    bad = ~np.isin(n % 4, allowed)
    D = _row_scale(params, basis.M)[:, None]
    Bb = (D * basis.B)[bad, :]
    U, sv, Vh = np.linalg.svd(Bb, full_matrices=True)
    ncols = basis.d
    tol = 1e-8 * (sv[0] if len(sv) else 1.0)
    rank = int(np.sum(sv > tol))
    Z = Vh.conj().T[:, rank:]
    out = []
    for i in range(Z.shape[1]):
        u = basis.B @ Z[:, i]
        us = _row_scale(params, len(u)) * np.abs(u)
        n0 = int(np.argmax(us > 1e-8 * np.max(us)))
        q = QExpansion(u / u[n0], params, tail_bound_exponent=params.beta + 0.01)
        q.coeff_growth_constant = q.estimate_growth_constant()
        out.append(q)
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _c2p(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _vec2p(v: np.ndarray) -> list[list[float]]:
    return [_c2p(z) for z in v]


def _p2vec(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)


def space_to_dict(space: Space) -> dict:
    p = space.params
    return {
        "schema_version": 1,
        "k": p.k,
        "N": p.N,
        "char_modulus": p.psi.modulus,
        "char_exponents": list(p.psi.exponents),
        "index_i4N": p.index_i4N,
        "d": space.d,
        "M": space.basis.M,
        "j_max": space.basis.pmatrix.j_max,
        "c_max": space.basis.pmatrix.c_max,
        "poincare_matrix": [_vec2p(space.pmatrix.A[:, j]) for j in range(space.pmatrix.j_max)],
        "poincare_tails": [[float(t) for t in space.pmatrix.tails[:, j]]
                           for j in range(space.pmatrix.j_max)],
        "eigenforms": [
            {
                "label": r.label,
                "coeffs": _vec2p(r.expansion.coeffs),
                "coeff_errors": [float(t) for t in r.expansion.coeff_errors]
                if r.expansion.coeff_errors is not None else None,
                "hecke_eigenvalues": {str(p_): _c2p(complex(v)) for p_, v in r.hecke_eigenvalues.items()},
                "lambda": r.lambda_f,
                "norm": r.petersson_norm,
                "a1": _c2p(r.a1),
                "poincare_coords": _vec2p(r.poincare_coords),
                "unresolved_multiplicity": r.unresolved_multiplicity,
            }
            for r in space.records
        ],
        "diagnostics": space.diagnostics,
    }


def space_from_dict(data: dict) -> Space:
    if data.get("schema_version") != 1:
        raise InvalidArgumentError("unknown space schema version")
    psi = DirichletCharacter(data["char_modulus"], tuple(data["char_exponents"]))
    params = space_params(data["k"], data["N"], psi=psi)
    A = np.column_stack([_p2vec(col) for col in data["poincare_matrix"]])
    tails = np.column_stack([np.array(col, dtype=float) for col in data["poincare_tails"]])
    pm = PoincareMatrix(params=params, A=A, tails=tails, c_max=data["c_max"])
    basis = _extract_basis(params, pm)
    if basis.d != data["d"]:
        raise ConsistencyError("deserialized rank differs from recorded dimension")
    records = []
    for e in data["eigenforms"]:
        coeffs = _p2vec(e["coeffs"])
        errs = np.array(e["coeff_errors"], dtype=float) if e["coeff_errors"] is not None else None
        exp = QExpansion(coeffs, params, tail_bound_exponent=params.beta + 0.01,
                         coeff_errors=errs)
        exp.coeff_growth_constant = exp.estimate_growth_constant()
        records.append(EigenformRecord(
            expansion=exp,
            hecke_eigenvalues={int(p_): complex(v[0], v[1]) for p_, v in e["hecke_eigenvalues"].items()},
            lambda_f=int(e["lambda"]),
            petersson_norm=float(e["norm"]),
            a1=complex(e["a1"][0], e["a1"][1]),
            poincare_coords=_p2vec(e["poincare_coords"]),
            unresolved_multiplicity=bool(e["unresolved_multiplicity"]),
            label=int(e["label"]),
        ))
    return Space(params, basis, {}, records, dict(data.get("diagnostics", {})))
