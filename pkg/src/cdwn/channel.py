"""Path loss, lattice interference sums and cut-set capacity bounds.

Rates are returned in bit/s. The capacity-bound function ``f`` is evaluated
in nats and converted at the end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .topology import NetworkTopology

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale channel constants.

    ``P`` is the average transmit power of one BS over the whole band ``W``
    and ``eta0`` the noise power spectral density.
    """

    alpha: float = 3.5
    G_b: float = 1.0
    G_d: float = 1.0
    eta0: float = 1e-9
    W: float = 1e6
    P: float = 1.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError("path-loss exponent must exceed 2")
        for name in ("G_b", "G_d", "eta0", "W"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.P < 0:
            raise ValueError("power must be nonnegative")

    @classmethod
    def from_snr(cls, snr_db: float, ref_distance: float, **kw) -> "ChannelParams":
        """Power such that a user at ``ref_distance`` sees ``snr_db`` over the full band."""
        base = cls(**kw)
        snr = 10.0 ** (snr_db / 10.0)
        P = snr * base.W * base.eta0 * ref_distance ** base.alpha / base.G_d
        return cls(**{**kw, "P": P})

    @property
    def snr_full_band(self) -> float:
        """``P / (W eta0)``: transmit power normalised by the full-band noise."""
        return self.P / (self.W * self.eta0)

    def snr_db_at(self, distance: float) -> float:
        return 10.0 * math.log10(self.snr_full_band * path_gain(distance, self.G_d, self.alpha))


def path_gain(distance, G: float, alpha: float):
    """Power gain ``G * r**(-alpha)``."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path gain is undefined at zero distance")
    out = G * d ** (-alpha)
    return float(out) if out.ndim == 0 else out


def link_shannon_rate(signal_gain, interference_gain_sum, bandwidth, tx_power_density, eta0):
    """Shannon rate (bit/s) with interference treated as noise.

    With power density ``rho`` (W/Hz) the SINR is
    ``rho*g / (eta0 + rho*I)``.
    """
    if np.any(np.asarray(bandwidth) <= 0):
        raise ValueError("bandwidth must be positive")
    s = np.asarray(tx_power_density) * np.asarray(signal_gain)
    i = np.asarray(tx_power_density) * np.asarray(interference_gain_sum)
    out = np.asarray(bandwidth) * np.log2(1.0 + s / (eta0 + i))
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------------ I_R sums

def _row_sum_poisson(a, y, s):
    """``sum_j (a^2 + y^2 j^2)^(-s)`` over all integers j via Poisson summation."""
    nu = s - 0.5
    zero = math.sqrt(math.pi) * math.gamma(nu) / math.gamma(s) * a ** (1.0 - 2.0 * s) / y
    kmax = int(math.ceil(45.0 * y / (2.0 * math.pi * a))) + 2
    k = np.arange(1, kmax + 1, dtype=float)
    arg = 2.0 * math.pi * a * k / y
    terms = (k / (y * a)) ** nu * special.kv(nu, arg)
    return zero + 4.0 * math.pi ** s / math.gamma(s) / y * float(np.sum(terms[::-1]))


def _row_sum_direct(a, y, s, n_terms=4000, include_zero=True):
    """Same row sum by direct summation plus an Euler-Maclaurin tail (small ``a``)."""
    j = np.arange(1, n_terms, dtype=float)
    body = float(np.sum(((a * a + (y * j) ** 2) ** (-s))[::-1]))
    J = float(n_terms)
    fJ = (a * a + (y * J) ** 2) ** (-s)
    dfJ = -2.0 * s * y * y * J * (a * a + (y * J) ** 2) ** (-s - 1.0)
    integral = y ** (-2 * s) * (J ** (1 - 2 * s) / (2 * s - 1)
                                - s * (a / y) ** 2 * J ** (-1 - 2 * s) / (2 * s + 1))
    rest = 2.0 * (body + integral + 0.5 * fJ - dfJ / 12.0)
    return a ** (-2 * s) + rest if include_zero else rest


def _row_sum(a, y, s):
    if a / y >= 0.05:
        return _row_sum_poisson(a, y, s)
    return _row_sum_direct(a, y, s)


def _lattice_sum_poisson(x, y, alpha):
    s = 0.5 * alpha
    nu = s - 0.5
    zero_modes = (math.sqrt(math.pi) * math.gamma(nu) / math.gamma(s) * y ** (-2 * s)
                  * (special.zeta(2 * s - 1, 1 - x / y) + special.zeta(2 * s - 1, 1 + x / y)))
    # nonzero Fourier modes of rows i != 0, plus the direct-sum rows
    corr = 0.0
    zero_coef = math.sqrt(math.pi) * math.gamma(nu) / math.gamma(s) / y
    for i in range(1, 10_000):
        row = 0.0
        for a in (y * i - x, y * i + x):
            row += _row_sum(a, y, s) - zero_coef * a ** (1 - 2 * s)
        corr += row
        if abs(row) < 1e-18 * abs(zero_modes) and 2 * math.pi * (y * i - x) / y > 45:
            break
    if x / y >= 0.05:
        row0 = _row_sum_poisson(x, y, s) - x ** (-2 * s)
    elif x > 0:
        row0 = _row_sum_direct(x, y, s, include_zero=False)
    else:
        row0 = 2.0 * y ** (-2 * s) * float(special.zeta(2 * s))
    return zero_modes + corr + row0


def ring_tail_bound(M: int, x: float, y: float, alpha: float) -> float:
    """Upper bound on the sum over square rings beyond ring ``M``.

    Ring ``m`` holds ``8m`` lattice points, all at distance at least
    ``y*m - x``; comparing with an integral gives the closed form below.
    """
    u0 = y * M - x
    if u0 <= 0:
        return math.inf
    return 8.0 / y ** 2 * (u0 ** (2 - alpha) / (alpha - 2) + (x + y) * u0 ** (1 - alpha) / (alpha - 1))


def _lattice_sum_rings(x, y, alpha, rel_tol, max_rings=20_000):
    total = 0.0
    s = 0.5 * alpha
    for m in range(1, max_rings + 1):
        i = np.concatenate([np.full(2 * m + 1, m), np.full(2 * m + 1, -m),
                            np.arange(-m + 1, m), np.arange(-m + 1, m)]).astype(float)
        j = np.concatenate([np.arange(-m, m + 1), np.arange(-m, m + 1),
                            np.full(2 * m - 1, m), np.full(2 * m - 1, -m)]).astype(float)
        total += float(np.sum(((y * i - x) ** 2 + (y * j) ** 2) ** (-s)))
        if ring_tail_bound(m, x, y, alpha) <= rel_tol * total:
            return total, m
    raise RuntimeError("ring summation did not reach the requested tolerance")


def lattice_interference_sum(x: float, y: float, alpha: float, r_0: float = 1.0,
                             rel_tol: float = 1e-10, method: str = "poisson") -> float:
    """Interference from a lattice of co-channel transmitters.

    Evaluates ``r_0**(-alpha) * sum_{(i,j) != 0} ((y i - x)^2 + (y j)^2)^(-alpha/2)``,
    the power received at offset ``x`` (in units of ``r_0``) from a square
    lattice of pitch ``y`` with the origin term removed.

    Parameters
    ----------
    x : float
        Receiver offset from the origin transmitter, ``0 <= x < y``.
    y : float
        Reuse pitch in units of ``r_0``.
    alpha : float
        Path-loss exponent, must exceed 2.
    method : {"poisson", "rings"}
        ``"poisson"`` resums each row with Poisson summation and Hurwitz zeta
        functions (error near machine precision). ``"rings"`` adds square
        rings until the integral tail bound drops below ``rel_tol`` times the
        partial sum; it is only practical for moderate tolerances.
    """
    if not alpha > 2:
        raise ValueError("the lattice sum diverges for alpha <= 2")
    if not y > 0:
        raise ValueError("reuse pitch must be positive")
    if not 0 <= x < y:
        raise ValueError("offset must satisfy 0 <= x < y (x = y puts a transmitter on the receiver)")
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if method == "poisson":
        val = float(_lattice_sum_poisson(float(x), float(y), float(alpha)))
    elif method == "rings":
        val, _ = _lattice_sum_rings(float(x), float(y), float(alpha), rel_tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return val * r_0 ** (-alpha)


# ------------------------------------------------------------ cut-set bounds

def _lambert_zeta() -> float:
    # principal branch: w = W0(-2 e^-2), the root other than -2
    w = float(special.lambertw(-2.0 * math.exp(-2.0), 0).real)
    return -1.0 + math.exp(2.0 + w)


ZETA = _lambert_zeta()


def capacity_bound_f(xi, x):
    """Concave majorant of ``log(1 + xi x^2)`` (nats).

    Equal to ``log(1 + xi x^2)`` for ``x >= sqrt(ZETA/xi)`` and to the tangent
    line through the origin ``2 sqrt(xi ZETA) x / (1 + ZETA)`` below it.
    """
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(xi < 0) or np.any(x < 0):
        raise ValueError("xi and x must be nonnegative")
    knee = np.sqrt(ZETA / np.where(xi > 0, xi, np.inf))
    slope = 2.0 * np.sqrt(xi * ZETA) / (1.0 + ZETA)
    out = np.where(x >= knee, np.log1p(xi * x * x), slope * x)
    out = np.where(xi == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CutSetBound:
    """Aggregate-throughput cut-set bound.

    ``trace`` is the sum of path gains across the cut, ``xi`` is
    ``trace / (n_tx * Pbar)`` with ``Pbar = P / (W eta0)``.
    """

    trace: float
    xi: float
    n_tx: int
    bound_bits_per_sec: float

    def csv_row(self, topology: NetworkTopology) -> str:
        return (f"{topology.n_bs},{topology.n_users},{len(topology.backhaul_set)},"
                f"{self.trace:.12g},{self.bound_bits_per_sec:.12g}")


CUTSET_CSV_HEADER = "N,K,N0,bU,bound_bps"


def _bound(trace, n_tx, params):
    pbar = params.snr_full_band
    xi = trace / (n_tx * pbar) if pbar > 0 else 0.0
    val = n_tx * params.W * capacity_bound_f(xi, pbar) / LN2
    return CutSetBound(float(trace), float(xi), int(n_tx), float(val))


def aggregate_capacity_ub_cdwn(topology: NetworkTopology, params: ChannelParams) -> CutSetBound:
    """Bound with every BS transmitting to every user."""
    d = topology.user_bs_distances()
    trace = float(np.sum(params.G_d * d ** (-params.alpha)))
    return _bound(trace, topology.n_bs, params)


def aggregate_capacity_ub_udwn(topology: NetworkTopology, params: ChannelParams) -> CutSetBound:
    """Bound for the uncached network, cut around the wired BSs."""
    wired = np.array(topology.backhaul_set, dtype=int)
    if len(wired) == 0:
        raise ValueError("the wired backhaul set is empty")
    rest = np.setdiff1d(np.arange(topology.n_bs), wired)
    trace = 0.0
    if len(rest):
        dbs = topology.bs_distances()[np.ix_(wired, rest)]
        trace += float(np.sum(params.G_b * dbs ** (-params.alpha)))
    if topology.n_users:
        du = topology.user_bs_distances()[:, wired]
        trace += float(np.sum(params.G_d * du ** (-params.alpha)))
    return _bound(trace, len(wired), params)


# ------------------------------------------------------------------ phases

@dataclass(frozen=True)
class PhaseDraw:
    """Counter-based source of i.i.d. uniform channel phases.

    The phases of slot ``t`` depend only on ``(seed, t, stream)``, so any
    evaluation order reproduces the same draws.
    """

    seed: int

    def generator(self, slot: int, stream: int = 0) -> np.random.Generator:
        key = (int(self.seed) & (2 ** 64 - 1)) | ((int(slot) * 64 + int(stream)) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def phases(self, slot: int, shape, stream: int = 0) -> np.ndarray:
        return self.generator(slot, stream).uniform(0.0, 2.0 * math.pi, size=shape)
