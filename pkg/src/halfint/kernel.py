"""The kernel cusp form evaluated by three independent routes.

Route 1 (direct): the explicit Fourier-coefficient formula

    a_R(n) = (2 pi)^s Gamma(kappa - s) n^(s-1)
           + e^(i pi s / 2) (-2 pi i)^kappa n^(kappa - 1)
             * sum_{(a, c): ac != 0, gcd(a, c) = 1, 4N | c}
                 psi(a) (c/a) (-1/a)^k eps_a
                 c^(s - kappa) a^(-s) e^(2 pi i n a' / c)
                 1f1(s, kappa; -2 pi i n / (a c)),

valid for 1 < Re s < kappa - 1, with a' an inverse of a mod c.  All unit
factors are c-periodic in a, so the sum is organized per modulus c with one
unit table for positive and one for negative a.  Two branch conventions are
not determined by the formula alone and are locked empirically by requiring
cross-route agreement at real s in the overlap region: a^(-s) at a < 0 takes
the principal branch |a|^(-s) e^(-i pi s), and the enumeration runs over
c > 0 with both signs of a, with no additional doubling for the c < 0 half
(the displayed constant already accounts for it).

Route 2 (Poincare): a_R(n) = (2 pi)^s Gamma(kappa - s) sum_m m^(s-1) a_{P_m}(n),
valid for 1 < Re s < k - beta - 1/2; the tail is controlled by the
coefficient growth bound through the pairing symmetry
a_{P_m}(n) = n^(kappa-1) m^-(kappa-1) conj(a_{P_n}(m)).  Near the upper edge
of its region this route converges slowly and its honest tail bound stays
comparatively large; it is a structural check, not a precision route.

Route 3 (spectral): the eigenbasis average

    a_R(n) = 2^(1 - 2k + s) pi Gamma(k - 1/2) / (i_{4N} N^(k/2 + 1/4 - s/2))
             * sum_j L*(f_j, s) lambda_j a_j(n) / <f_j, f_j>,

entire in s; this is the route that continues the kernel across the critical
strip, and the averaged sum D(s) of the non-vanishing scan is its n = 1
content stripped of the prefactor.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .arith import kronecker, mod_inverse, trivial_character
from .errors import ConsistencyError, InvalidArgumentError, PoleError, RegionError
from .forms import (
    EigenformRecord,
    PoincareMatrix,
    Space,
    SpaceParams,
    _row_scale,
    reproducing_weights,
)
from .lfun import l_star
from .special import bessel_j_half_array, gamma_complex, tanh_sinh_nodes_01

__all__ = [
    "gamma_k",
    "KernelParams",
    "kernel_params",
    "KernelCoefficients",
    "kernel_coeff_direct",
    "kernel_coeff_via_poincare",
    "kernel_coeff_spectral",
    "DirectKernelMachine",
    "poincare_transposed",
    "average_sum_D",
    "ScanReport",
    "nonvanishing_scan",
    "proof_inequality_diagnostic",
    "ProofDiagnostic",
    "triple_validation",
    "SCAN_CSV_HEADER",
    "write_scan_csv",
]

# branch conventions of the direct route, locked by cross-route agreement
# at real s in the overlap region (see tests)
_NEG_A_PHASE_SIGN = -1.0   # a^(-s) = |a|^(-s) exp(_NEG_A_PHASE_SIGN * i pi s) for a < 0
_C_FOLD = 1.0              # c > 0 enumeration carries the full normalization

_F1_BOUND_SLACK = 5e-9


def gamma_k(s: complex, k: int) -> complex:
    """(1/2) e^(i pi s / 2) Gamma(s) Gamma(k + 1/2 - s)."""
    s = complex(s)
    kappa = k + 0.5
    try:
        g1 = gamma_complex(s).value
        g2 = gamma_complex(kappa - s).value
    except PoleError as exc:
        raise PoleError(f"gamma_k pole at s = {s}", *exc.args[1:]) from exc
    return 0.5 * cmath.exp(0.5j * math.pi * s) * g1 * g2


@dataclass(frozen=True)
class KernelParams:
    """Evaluation point and truncation cutoffs for the kernel routes."""

    s: complex
    space: SpaceParams
    gamma_k_value: complex
    c_max: int
    a_max: int
    m_max: int

    @property
    def kappa(self) -> float:
        return self.space.kappa

    def require_direct(self) -> None:
        sigma = self.s.real
        if not 1.0 < sigma < self.space.k - 0.5:
            raise RegionError(
                f"direct route needs 1 < Re s < k - 1/2 = {self.space.k - 0.5}, got {sigma}")

    def require_poincare(self) -> None:
        sigma = self.s.real
        hi = self.space.k - self.space.beta - 0.5
        if not 1.0 < sigma < hi:
            raise RegionError(
                f"poincare route needs 1 < Re s < k - beta - 1/2 = {hi:.4f}, got {sigma}")


def kernel_params(s: complex, space: SpaceParams, c_max: int | None = None,
                  a_max: int | None = None, m_max: int = 2000) -> KernelParams:
    if c_max is None:
        c_max = 2000 * space.N
    if a_max is None:
        a_max = 2000 * space.N
    return KernelParams(s=complex(s), space=space, gamma_k_value=gamma_k(s, space.k),
                        c_max=c_max, a_max=a_max, m_max=m_max)


@dataclass(frozen=True)
class KernelCoefficients:
    route: str
    n_values: tuple[int, ...]
    coeffs: np.ndarray
    error_estimates: np.ndarray


def _zeta_upper(sigma: float) -> float:
    """Upper bound on zeta(sigma) for sigma > 1."""
    if sigma <= 1.0:
        raise RegionError("zeta bound needs sigma > 1")
    s50 = sum(n ** (-sigma) for n in range(1, 51))
    return s50 + 50.0 ** (1.0 - sigma) / (sigma - 1.0)


def main_term(n: int, s: complex, kappa: float) -> complex:
    return (2.0 * math.pi) ** s * gamma_complex(kappa - s).value * n ** (s - 1.0)


class DirectKernelMachine:
    """Per-modulus tables for the direct double sum, reusable across s and n.

    The pair set {(a, c): c > 0} is flattened into arrays carrying the
    s-independent unit factor, log |a| - ... terms; evaluation against a batch
    of s-values is then a sequence of small matrix products per modulus.
    """

    def __init__(self, space: SpaceParams, c_max: int, a_max: int,
                 a_boost: int | None = None,
                 nodes: tuple[float, float] = (0.08, 4.6)):
        self.space = space
        self.c_max = c_max
        self.a_max = a_max
        lvl = space.level
        if a_boost is None:
            a_boost = 200 * a_max
        self.a_boost = a_boost
        self.t, self.w = tanh_sinh_nodes_01(*nodes)
        psi, k = space.psi, space.k
        chunks = []
        for c in range(lvl, c_max + 1, lvl):
            # the |a| cutoff is relaxed at small c, where c^(sigma-kappa) makes
            # the a-tail dominant; the (lvl/c)^3 profile equalizes the per-c tails
            a_cut = max(a_max, int(a_boost * (lvl / c) ** 3))
            res = [r for r in range(1, c) if math.gcd(r, c) == 1]
            if not res:
                continue
            upos = np.empty(len(res), dtype=np.complex128)
            uneg = np.empty(len(res), dtype=np.complex128)
            abar = np.empty(len(res), dtype=float)
            for i, r in enumerate(res):
                base = psi(r) * kronecker(c, r)
                upos[i] = base * kronecker(-1, r) ** k * (1.0 if r % 4 == 1 else 1.0j)
                mneg = -r
                uneg[i] = base * kronecker(-1, mneg) ** k * (1.0 if mneg % 4 == 1 else 1.0j)
                abar[i] = mod_inverse(r, c) / c
            reps = (a_cut - np.array(res)) // c + 1
            tmax = int(reps.max())
            tgrid = np.arange(tmax)[:, None]
            avals = np.array(res)[None, :] + c * tgrid
            mask = avals <= a_cut
            a_flat = avals[mask].astype(float)
            rep_idx = np.broadcast_to(np.arange(len(res))[None, :], avals.shape)[mask]
            chunks.append({
                "c": c,
                "a_cut": a_cut,
                "a": a_flat,
                "upos": upos[rep_idx],
                "uneg": uneg[rep_idx],
                "wpos": abar[rep_idx],           # a'/c for a > 0
                "wneg": (1.0 - abar[rep_idx]) % 1.0,  # inverse of -a is c - a'
                "lncl": math.log(c) - np.log(a_flat),
                "ck": float(c) ** (-space.kappa),
            })
        self.chunks = chunks
        self.f1_max_seen = 0.0

    def corrections(self, n_values: tuple[int, ...], s_values: np.ndarray) -> np.ndarray:
        """Correction part of a_R(n) (everything except the main term) for
        each n in n_values and each s; shape (len(n_values), len(s_values))."""
        space = self.space
        kappa = space.kappa
        k = space.k
        s_arr = np.asarray(s_values, dtype=np.complex128)
        t, w = self.t, self.w
        # node weights per s: w t^(s-1) (1-t)^(kappa-s-1)
        lt = np.log(t)
        l1t = np.log1p(-t)
        Wmat = w[None, :] * np.exp(np.multiply.outer(s_arr - 1.0, lt)
                                   + np.multiply.outer(kappa - s_arr - 1.0, l1t))
        out = np.zeros((len(n_values), len(s_arr)), dtype=np.complex128)
        negphase = np.exp(_NEG_A_PHASE_SIGN * 1j * math.pi * s_arr)
        for ch in self.chunks:
            a, c = ch["a"], ch["c"]
            powmat = ch["ck"] * np.exp(np.multiply.outer(ch["lncl"], s_arr))
            z1 = -2j * math.pi / (a * c)
            E = np.exp(np.multiply.outer(z1, t))
            cur = np.ones_like(E)
            last_n = 0
            for i, n in enumerate(n_values):
                for _ in range(n - last_n):
                    cur = cur * E
                last_n = n
                f1pos = cur @ Wmat.T
                f1neg = np.conj(cur) @ Wmat.T
                mx = max(float(np.max(np.abs(f1pos))), float(np.max(np.abs(f1neg))))
                self.f1_max_seen = max(self.f1_max_seen, mx)
                if mx > 1.0 + _F1_BOUND_SLACK:
                    raise ConsistencyError(
                        f"|1f1| bound violated: {mx} > 1 (special-function bug)")
                phpos = np.exp(2j * math.pi * n * ch["wpos"])
                phneg = np.exp(2j * math.pi * n * ch["wneg"])
                pos = (ch["upos"] * phpos)[:, None] * f1pos
                neg = (ch["uneg"] * phneg)[:, None] * f1neg * negphase[None, :]
                out[i] += ((pos + neg) * powmat).sum(axis=0)
        pref = (_C_FOLD * (2.0 * math.pi) ** kappa
                * np.exp(0.5j * math.pi * s_arr - 0.5j * math.pi * kappa))
        nk = np.array(n_values, dtype=float)[:, None] ** (kappa - 1.0)
        return out * pref[None, :] * nk

    def correction_envelope(self, n: int, s: complex) -> float:
        """Term-wise absolute value of the correction sum: the computable
        shape of the proof's estimate (|1f1| replaced by its beta-function
        bound, every lattice term by its modulus).  Monotone in the level
        support and in the weight; the contradiction mechanism of the
        non-vanishing theorems is the decay of this envelope relative to the
        main term."""
        kappa = self.space.kappa
        sigma = s.real
        beta_bound = abs(gamma_complex(sigma).value * gamma_complex(kappa - sigma).value
                         / gamma_complex(kappa).value)
        lattice = 0.0
        for ch in self.chunks:
            lattice += ch["ck"] * float(ch["c"]) ** sigma * float(np.sum(ch["a"] ** (-sigma)))
        phase_amp = math.exp(-0.5 * math.pi * s.imag) * (1.0 + math.exp(math.pi * s.imag))
        return (_C_FOLD * (2.0 * math.pi) ** kappa * beta_bound * phase_amp
                * float(n) ** (kappa - 1.0) * lattice)

    def tail_bound(self, n_values: tuple[int, ...], s: complex) -> np.ndarray:
        """Bound on the dropped pairs, from |1f1| <= B(sigma, kappa - sigma)."""
        space = self.space
        kappa, lvl = space.kappa, space.level
        sigma = s.real
        z = _zeta_upper(sigma)
        t0 = self.c_max / lvl
        c_tail = 2.0 * z * lvl ** (sigma - kappa) * (
            t0 ** (sigma - kappa + 1.0) / (kappa - sigma - 1.0) + t0 ** (sigma - kappa))
        a_tail = sum(float(ch["c"]) ** (sigma - kappa)
                     * 2.0 * ch["a_cut"] ** (1.0 - sigma) / (sigma - 1.0)
                     for ch in self.chunks)
        beta_bound = abs(gamma_complex(sigma).value * gamma_complex(kappa - sigma).value
                         / gamma_complex(kappa).value)
        phase_amp = math.exp(-0.5 * math.pi * s.imag) * (1.0 + math.exp(math.pi * abs(s.imag)))
        pref = _C_FOLD * (2.0 * math.pi) ** kappa * beta_bound * phase_amp
        nk = np.array(n_values, dtype=float) ** (kappa - 1.0)
        return pref * nk * (c_tail + a_tail)


def kernel_coeff_direct(n_values, kp: KernelParams,
                        machine: DirectKernelMachine | None = None) -> KernelCoefficients:
    """a_R(n) by the explicit double-sum formula (overlap/strip region)."""
    kp.require_direct()
    if isinstance(n_values, int):
        n_values = (n_values,)
    n_values = tuple(int(n) for n in n_values)
    if machine is None:
        machine = DirectKernelMachine(kp.space, kp.c_max, kp.a_max)
    s = np.array([kp.s])
    corr = machine.corrections(n_values, s)[:, 0]
    kappa = kp.kappa
    mains = np.array([main_term(n, kp.s, kappa) for n in n_values])
    tails = machine.tail_bound(n_values, kp.s)
    return KernelCoefficients(route="direct", n_values=n_values,
                              coeffs=mains + corr, error_estimates=tails)


# ---------------------------------------------------------------------------
# Poincare route
# ---------------------------------------------------------------------------

def poincare_transposed(params: SpaceParams, m_max: int, n_values: tuple[int, ...],
                        c_max: int | None = None, c_mult: float = 2.0):
    """a_{P_m}(n) for m = 1..m_max at the few Fourier indices n_values.

    Same construction as the space-building matrix with the roles of the two
    indices swapped (the FFT runs over the inverse-residue slot).
    """
    from .arith import kloosterman_theta_col

    lvl = params.level
    if c_max is None:
        c = max(400 * params.N, int(c_mult * 4.0 * math.pi
                                    * math.sqrt(m_max * max(n_values))))
        c_max = c - c % lvl + lvl
    k, psi, kappa = params.k, params.psi, params.kappa
    nu2 = 2 * k - 1
    m_arr = np.arange(1, m_max + 1)
    sqrt_m = np.sqrt(m_arr.astype(float))
    S = np.zeros((m_max, len(n_values)), dtype=np.complex128)
    for c in range(lvl, c_max + 1, lvl):
        gather = m_arr % c
        for i, n in enumerate(n_values):
            col = kloosterman_theta_col(n, c, psi, k)
            x = (4.0 * math.pi * math.sqrt(n) / c) * sqrt_m
            S[:, i] += col[gather] * (bessel_j_half_array(nu2, x) / c)
    nn = np.array(n_values, dtype=float)[None, :]
    ratio = (nn / m_arr[:, None].astype(float)) ** ((kappa - 1.0) / 2.0)
    A = 2.0 * math.pi * cmath.exp(-0.5j * math.pi * kappa) * ratio * S
    for i, n in enumerate(n_values):
        if n <= m_max:
            A[n - 1, i] += 1.0
    return A


def kernel_coeff_via_poincare(n_values, kp: KernelParams,
                              transposed: np.ndarray | None = None,
                              growth_constants: np.ndarray | None = None) -> KernelCoefficients:
    """a_R(n) = (2 pi)^s Gamma(kappa-s) sum_{m <= m_max} m^(s-1) a_{P_m}(n).

    The tail bound applies the coefficient growth bound |a_{P_n}(m)| <= C_n m^beta
    through the pairing symmetry; it decays only like m_max^(sigma+beta-kappa+1),
    so this route carries the largest honest error of the three.
    """
    kp.require_poincare()
    if isinstance(n_values, int):
        n_values = (n_values,)
    n_values = tuple(int(n) for n in n_values)
    params = kp.space
    if transposed is None:
        transposed = poincare_transposed(params, kp.m_max, n_values)
    m = np.arange(1, transposed.shape[0] + 1, dtype=float)
    s = kp.s
    pref = (2.0 * math.pi) ** s * gamma_complex(params.kappa - s).value
    vals = pref * (m ** (s - 1.0)) @ transposed
    kappa, beta, sigma = params.kappa, params.beta, s.real
    if growth_constants is None:
        growth_constants = np.full(len(n_values), 2.0)
    mM = transposed.shape[0]
    expo = sigma + beta - kappa
    tails = (abs(pref) * growth_constants * np.array(n_values, dtype=float) ** (kappa - 1.0)
             * (mM ** (expo + 1.0) / (-expo - 1.0) + mM ** expo))
    return KernelCoefficients(route="poincare", n_values=n_values,
                              coeffs=vals, error_estimates=tails)


# ---------------------------------------------------------------------------
# Spectral route and the averaged sum
# ---------------------------------------------------------------------------

def spectral_prefactor(s: complex, params: SpaceParams) -> complex:
    k = params.k
    return (2.0 ** (-2 * k + 1 + s) * math.pi * gamma_complex(k - 0.5).value.real
            / (params.index_i4N * params.N ** (k / 2.0 + 0.25 - s / 2.0)))


def average_sum_D(s: complex, records: list[EigenformRecord]):
    """D(s) = sum_j L*(f_j, s) lambda_j a_j(1) / <f_j, f_j> with breakdown.

    Returns (value, terms, error_bound); terms are
    (label, lstar, lambda, a1, norm) tuples and reconstruct the value exactly.
    """
    total = 0.0 + 0.0j
    err = 0.0
    terms = []
    for r in records:
        lst = l_star(r, s)
        term = lst.value * r.lambda_f * r.a1 / r.petersson_norm
        total += term
        err += (lst.tail_error * abs(r.a1) + 1e-12 * abs(lst.value)) / r.petersson_norm
        terms.append((r.label, lst.value, r.lambda_f, r.a1, r.petersson_norm))
    return total, terms, err


def kernel_coeff_spectral(n_values, s_or_kp, records: list[EigenformRecord],
                          params: SpaceParams | None = None) -> KernelCoefficients:
    """a_R(n) from the eigenbasis average (valid for every s)."""
    if isinstance(s_or_kp, KernelParams):
        s, params = s_or_kp.s, s_or_kp.space
    else:
        s = complex(s_or_kp)
        if params is None:
            if not records:
                raise InvalidArgumentError("empty basis needs explicit space params")
            params = records[0].expansion.space
    if isinstance(n_values, int):
        n_values = (n_values,)
    n_values = tuple(int(n) for n in n_values)
    pref = spectral_prefactor(s, params)
    vals = np.zeros(len(n_values), dtype=np.complex128)
    errs = np.zeros(len(n_values))
    for r in records:
        lst = l_star(r, s)
        an = r.expansion.coeffs[np.array(n_values) - 1]
        vals += lst.value * r.lambda_f * an / r.petersson_norm
        errs += (lst.tail_error * np.abs(an) + abs(lst.value)
                 * (r.expansion.coeff_errors[np.array(n_values) - 1]
                    if r.expansion.coeff_errors is not None else 0.0)) / r.petersson_norm
    return KernelCoefficients(route="spectral", n_values=n_values,
                              coeffs=pref * vals, error_estimates=abs(pref) * errs)


# ---------------------------------------------------------------------------
# Non-vanishing scan
# ---------------------------------------------------------------------------

@dataclass
class ScanReport:
    r0: float
    sigma_grid: np.ndarray
    D_values: np.ndarray
    error_bounds: np.ndarray
    min_abs_D: float
    verdict: str
    per_term: list
    bookkeeping_dev: float

    @property
    def argmin_sigma(self) -> float:
        return float(self.sigma_grid[int(np.argmin(np.abs(self.D_values)))])


SCAN_CSV_HEADER = "sigma,r0,D_re,D_im,abs_D,error_bound"


def write_scan_csv(path, report: ScanReport) -> None:
    with open(path, "w") as fh:
        fh.write(SCAN_CSV_HEADER + "\n")
        for sig, D, eb in zip(report.sigma_grid, report.D_values, report.error_bounds):
            fh.write(f"{sig!r},{report.r0!r},{D.real!r},{D.imag!r},{abs(D)!r},{eb!r}\n")


def scan_grid(params: SpaceParams, grid_size: int) -> np.ndarray:
    """Half-step grid on the open strip, with the center inserted when the
    even step pattern misses it."""
    if grid_size < 16:
        raise InvalidArgumentError("grid_size >= 16 required")
    lo, hi = params.strip
    step = (hi - lo) / grid_size
    sig = lo + step * (np.arange(grid_size) + 0.5)
    center = params.center
    if not np.any(np.abs(sig - center) < 1e-12):
        sig = np.sort(np.append(sig, center))
    return sig


def nonvanishing_scan(r0: float, grid_size: int, space: Space) -> ScanReport:
    """|D(s)| across the strip at Im s = r0, with the 10x-error verdict."""
    params = space.params
    records = space.records
    sig = scan_grid(params, grid_size)
    if not records:
        return ScanReport(r0=r0, sigma_grid=sig, D_values=np.zeros(len(sig), complex),
                          error_bounds=np.zeros(len(sig)), min_abs_D=0.0,
                          verdict="trivially zero (d=0)", per_term=[], bookkeeping_dev=0.0)
    D = np.empty(len(sig), dtype=np.complex128)
    eb = np.empty(len(sig))
    per_term = []
    book_dev = 0.0
    for i, sigma in enumerate(sig):
        s = complex(sigma, r0)
        val, terms, err = average_sum_D(s, records)
        D[i] = val
        eb[i] = err
        per_term.append(terms)
        recon = sum(t[1] * t[2] * t[3] / t[4] for t in terms)
        book_dev = max(book_dev, abs(recon - val) / max(abs(val), 1e-300))
        spec = kernel_coeff_spectral((1,), s, records, params)
        ratio_dev = abs(spec.coeffs[0] / spectral_prefactor(s, params) - val)
        book_dev = max(book_dev, ratio_dev / max(abs(val), 1e-300))
    min_abs = float(np.min(np.abs(D)))
    threshold = 10.0 * float(np.max(eb))
    verdict = "verified non-vanishing" if min_abs > threshold else "inconclusive"
    return ScanReport(r0=r0, sigma_grid=sig, D_values=D, error_bounds=eb,
                      min_abs_D=min_abs, verdict=verdict, per_term=per_term,
                      bookkeeping_dev=book_dev)


# ---------------------------------------------------------------------------
# Proof-mechanism diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProofDiagnostic:
    k: int
    N: int
    delta: float
    r0: float
    s: complex
    main: complex
    correction: complex
    ratio: float
    envelope: float
    tail_bound: float


def proof_inequality_diagnostic(delta: float, r0: float, kp: KernelParams,
                                machine: DirectKernelMachine | None = None) -> ProofDiagnostic:
    """Size of the normalized correction term at s = k/2 + 1/4 - delta + i r0.

    The first kernel coefficient divided by its main term is 1 + correction.
    ``ratio`` is the measured |correction| / |main|; ``envelope`` is the
    term-wise absolute-value estimate of the same truncated sum - the
    computable expression whose decay in k and in N drives the contradiction
    argument (the measured ratio oscillates underneath it and need not be
    monotone on its own).
    """
    if not 0.0 <= delta < 0.5:
        raise InvalidArgumentError("delta must lie in [0, 1/2)")
    space = kp.space
    s = complex(space.k / 2.0 + 0.25 - delta, r0)
    kp2 = KernelParams(s=s, space=space, gamma_k_value=gamma_k(s, space.k),
                       c_max=kp.c_max, a_max=kp.a_max, m_max=kp.m_max)
    if machine is None:
        machine = DirectKernelMachine(space, kp2.c_max, kp2.a_max)
    kc = kernel_coeff_direct((1,), kp2, machine=machine)
    mt = main_term(1, s, space.kappa)
    corr = kc.coeffs[0] - mt
    return ProofDiagnostic(k=space.k, N=space.N, delta=delta, r0=r0, s=s,
                           main=mt, correction=corr, ratio=abs(corr) / abs(mt),
                           envelope=machine.correction_envelope(1, s) / abs(mt),
                           tail_bound=float(kc.error_estimates[0]) / abs(mt))


# ---------------------------------------------------------------------------
# Triple validation
# ---------------------------------------------------------------------------

def _rel_delta(x: complex, y: complex) -> float:
    return abs(x - y) / max(abs(x), abs(y), 1e-300)


def triple_validation(space: Space, s_values, n_values=(1, 2, 3, 4, 5),
                      c_max: int | None = None, a_max: int | None = None,
                      m_max: int = 2000, rel_tol: float = 1e-5) -> list[dict]:
    """Run every route valid at each s and compare pairwise.

    A pair passes when its relative delta is below rel_tol or below the
    combined error bounds of the two routes (the Poincare route's honest
    bound dominates near the top of its region).
    """
    params = space.params
    n_values = tuple(int(n) for n in n_values)
    if c_max is None:
        c_max = 2000 * params.N
    if a_max is None:
        a_max = 2000 * params.N
    machine = DirectKernelMachine(params, c_max, a_max)
    trans = None
    growth = None
    out = []
    for s in np.atleast_1d(np.asarray(s_values, dtype=complex)):
        kp = KernelParams(s=complex(s), space=params, gamma_k_value=gamma_k(s, params.k),
                          c_max=c_max, a_max=a_max, m_max=m_max)
        routes: dict[str, KernelCoefficients | str] = {}
        try:
            routes["direct"] = kernel_coeff_direct(n_values, kp, machine=machine)
        except RegionError as exc:
            routes["direct"] = f"out of region: {exc}"
        try:
            kp.require_poincare()
            if trans is None:
                trans = poincare_transposed(params, m_max, n_values)
                pm = space.pmatrix
                growth = np.empty(len(n_values))
                mm = np.arange(1, pm.M + 1, dtype=float)
                for i, n in enumerate(n_values):
                    col = np.abs(pm.A[:, n - 1]) if n <= pm.j_max else np.abs(pm.A[:, -1])
                    growth[i] = 1.5 * float(np.max(col[49:] / mm[49:] ** params.beta))
            routes["poincare"] = kernel_coeff_via_poincare(n_values, kp, transposed=trans,
                                                           growth_constants=growth)
        except RegionError as exc:
            routes["poincare"] = f"out of region: {exc}"
        routes["spectral"] = kernel_coeff_spectral(n_values, kp, space.records, params)
        names = [r for r in ("direct", "poincare", "spectral")
                 if isinstance(routes[r], KernelCoefficients)]
        deltas = {}
        verdict = "pass"
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                a, b = routes[names[i]], routes[names[j]]
                for idx, n in enumerate(n_values):
                    dd = _rel_delta(a.coeffs[idx], b.coeffs[idx])
                    combined = (a.error_estimates[idx] + b.error_estimates[idx]) \
                        / max(abs(a.coeffs[idx]), abs(b.coeffs[idx]), 1e-300)
                    deltas[f"{names[i]}|{names[j]}|n={n}"] = dd
                    if dd > rel_tol and dd > combined:
                        verdict = "fail"
        out.append({"s": complex(s), "n_values": n_values, "routes": routes,
                    "deltas": deltas, "verdict": verdict,
                    "f1_max_seen": machine.f1_max_seen})
    return out
