"""The bilinear model operator, its trilinear dual and level-set diagnostics.

Index conventions
-----------------
``pairs1`` are close pairs (I1, I2) at scale k1 and ``pairs2`` close pairs
(J1, J2) at scale k2, each taken from one diagonal class so that I1 fixes I2
and J1 fixes J2. ``f`` is expanded on I1 x J1 and ``g`` on I2 x J2.
Coefficient tables have axes ``(m, p, q, n1, n2)`` where ``p`` indexes
``pairs1``, ``q`` indexes ``pairs2`` and ``n = -N..N`` is stored at offset N.

The model field is constant in t on every [m, m+1), so space-time norms
integrate t exactly and x by the trapezoid rule.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
from scipy import fft as sp_fft

from .bumps import (
    BumpSpec,
    WavePacket,
    _modulation_matrix,
    bump_transform,
    check_chirp_resolution,
    make_bump,
    mod_coeff,
    packet_freq,
)
from .dyadic import ClosePair, DyadicInterval, diagonal_split, whitney_cover
from .errors import DomainError
from .extension import SpaceTimeBox, extend
from .sampling import SampledFunction, is_power_of_two, trapezoid_weights

__all__ = [
    "ModelTermIndex",
    "ModelTruncation",
    "ModelField",
    "model_pairs",
    "bilinear_product",
    "coefficient_table",
    "physical_table",
    "model_operator",
    "model_operator_bruteforce",
    "model_norm",
    "time_cells",
    "trilinear_form",
    "prop31_sum",
    "prop31_ratio",
    "Prop31Result",
    "dyadic_level",
    "counting_norms",
    "LevelSetReport",
    "level_set_report",
    "prop31_truncation",
    "indicator_triple",
]

# cycles of the chirp exp(-2 pi i m xi^2) allowed per window node
WINDOW_CHIRP_STEP = 0.25


@dataclass(frozen=True)
class ModelTermIndex:
    n: tuple[int, int]
    m: int
    pair1: ClosePair
    pair2: ClosePair


def model_pairs(k: int, offset: int = 2) -> list[ClosePair]:
    """Whitney pairs of scale k in the diagonal class with l2 - l1 = offset."""
    if k < 2:
        return []
    split = diagonal_split(whitney_cover(k).at_scale(k))
    if offset not in split.offsets:
        return []
    return split.by_offset(offset)


@dataclass(frozen=True)
class ModelTruncation:
    """|n|_inf <= N, an unsheared x-lattice [-X, X]^2 and times [-T, T]."""

    N: int = 32
    X: float = 16.0
    T: float = 4.0
    nx: int = 128
    nt: int = 32

    def __post_init__(self):
        if self.N < 0:
            raise DomainError("N must be nonnegative")
        if not (self.X > 0 and self.T > 0):
            raise DomainError("box half-widths must be positive")
        for n in (self.nx, self.nt):
            if not is_power_of_two(n):
                raise DomainError(f"resolution {n} is not a power of two")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.X, self.X, self.nx + 1)

    @property
    def x_weights(self) -> np.ndarray:
        return trapezoid_weights(-self.X, self.X, self.nx)

    @property
    def m_values(self) -> np.ndarray:
        """Integers m with [m, m + 1) meeting [-T, T]."""
        return np.arange(math.floor(-self.T), math.ceil(self.T))

    @property
    def m_lengths(self) -> np.ndarray:
        m = self.m_values
        return np.minimum(m + 1, self.T) - np.maximum(m, -self.T)

    @property
    def box(self) -> SpaceTimeBox:
        return SpaceTimeBox(self.X, self.T, self.nx, self.nt, velocity=0.0)

    def with_N(self, N: int) -> "ModelTruncation":
        return ModelTruncation(N, self.X, self.T, self.nx, self.nt)


def bilinear_product(f: SampledFunction, g: SampledFunction, box: SpaceTimeBox, method: str = "fft") -> SampledFunction:
    """Pointwise product extend(f) * extend(g) on the box lattice."""
    Ef = extend(f, box, method)
    Eg = extend(g, box, method)
    return Ef.with_values(Ef.values * Eg.values)


def coefficient_table(h: SampledFunction, rows: Sequence[DyadicInterval], cols: Sequence[DyadicInterval],
                      N: int, m_values, spec: BumpSpec = BumpSpec()) -> np.ndarray:
    """<h exp(-2 pi i m |.|^2), packet on I x J with modulation (n1, n2)>.

    Returns an array of shape (len(m_values), len(rows), len(cols), 2N+1, 2N+1).
    """
    if h.dim != 2:
        raise DomainError("model coefficients need a function of two variables")
    m_values = np.atleast_1d(m_values)
    for m in (m_values.min(), m_values.max()):
        check_chirp_resolution(h, int(m))
    (a1, a2), (w1, w2) = h.axes, h.axis_weights()
    K = 2 * N + 1
    out = np.zeros((m_values.size, len(rows), len(cols), K, K), dtype=complex)
    if not rows or not cols:
        return out
    for i, m in enumerate(m_values):
        E1 = np.concatenate([_modulation_matrix(a1, w1, packet_freq(I, 0, spec), 0, N, int(m)) for I in rows])
        E2 = np.concatenate([_modulation_matrix(a2, w2, packet_freq(J, 0, spec), 0, N, int(m)) for J in cols])
        block = E1 @ h.values @ E2.T
        out[i] = block.reshape(len(rows), K, len(cols), K).transpose(0, 2, 1, 3)
    return out


def physical_table(intervals: Sequence[DyadicInterval], N: int, x: np.ndarray, spec: BumpSpec = BumpSpec()) -> np.ndarray:
    """Physical 1-d packets: out[i, n + N, :] is the transform of the packet on intervals[i]."""
    x = np.asarray(x, dtype=float)
    n = np.arange(-N, N + 1)
    out = np.empty((len(intervals), n.size, x.size), dtype=complex)
    for i, I in enumerate(intervals):
        pk = packet_freq(I, 0, spec)
        lo, L, p = pk.box[0][0], pk.lengths[0], pk.periods[0]
        y = x[None, :] + n[:, None] / p
        out[i] = pk.amplitude(0) * L * np.exp(-2j * np.pi * y * lo) * bump_transform(L * y, spec)
    return out


def _offsets(sharp: int) -> list[tuple[int, int]]:
    if sharp < 0:
        raise DomainError("offset # must be nonnegative")
    return [(d1, d2) for d1 in range(-sharp, sharp + 1) for d2 in range(-sharp, sharp + 1) if abs(d1) + abs(d2) == sharp]


def _shift(table: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """out[..., n1, n2] = table[..., n1 + d1, n2 + d2], zero outside the truncation."""
    out = np.zeros_like(table)
    K = table.shape[-1]
    s1 = slice(max(0, -d1), min(K, K - d1))
    s2 = slice(max(0, -d2), min(K, K - d2))
    t1 = slice(max(0, d1), min(K, K + d1))
    t2 = slice(max(0, d2), min(K, K + d2))
    out[..., s1, s2] = table[..., t1, t2]
    return out


def _shift_rows(table: np.ndarray, d: int) -> np.ndarray:
    """Physical packets with modulation n + d on axis 1 of (interval, n, x) arrays."""
    out = np.zeros_like(table)
    K = table.shape[1]
    out[:, max(0, -d):min(K, K - d)] = table[:, max(0, d):min(K, K + d)]
    return out


@dataclass
class _Setup:
    pairs1: list
    pairs2: list
    m_values: np.ndarray
    a: np.ndarray
    b: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray


def _setup(f, g, k1, k2, trunc: ModelTruncation, spec, class_offset, sharp=0) -> _Setup:
    pairs1, pairs2 = model_pairs(k1, class_offset), model_pairs(k2, class_offset)
    m = trunc.m_values
    N = trunc.N
    a = coefficient_table(f, [p.first for p in pairs1], [p.first for p in pairs2], N, m, spec)
    b = coefficient_table(g, [p.second for p in pairs1], [p.second for p in pairs2], N, m, spec)
    x = trunc.x
    # physical packets carry `sharp` extra modulations so shifted indices stay in range
    A1 = physical_table([p.first for p in pairs1], N + sharp, x, spec)
    A2 = physical_table([p.second for p in pairs1], N + sharp, x, spec)
    B1 = physical_table([p.first for p in pairs2], N + sharp, x, spec)
    B2 = physical_table([p.second for p in pairs2], N + sharp, x, spec)
    return _Setup(pairs1, pairs2, m, a, b, A1, A2, B1, B2)


def _products(s: _Setup, d1: int, d2: int, N: int, sharp: int):
    """Row matrices for P1[(p, n1), x] = A(I1, n1) A(I2, n1 + d1), likewise on axis 2."""
    core = slice(sharp, sharp + 2 * N + 1)
    P1 = s.A1[:, core] * _shift_rows(s.A2, d1)[:, core]
    P2 = s.B1[:, core] * _shift_rows(s.B2, d2)[:, core]
    return P1.reshape(-1, P1.shape[-1]), P2.reshape(-1, P2.shape[-1])


def _term_matrix(a_m: np.ndarray, b_m: np.ndarray) -> np.ndarray:
    """(p, q, n1, n2) coefficient products as a (p n1) x (q n2) matrix."""
    P, Q, K, _ = a_m.shape
    return (a_m * b_m).transpose(0, 2, 1, 3).reshape(P * K, Q * K)


@dataclass
class ModelField:
    """T~(f, g) on the x-lattice for each time cell [m, m + 1)."""

    x: np.ndarray
    m_values: np.ndarray
    m_lengths: np.ndarray
    values: np.ndarray  # shape (len(m_values), nx + 1, nx + 1)
    x_weights: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.x_weights is None:
            self.x_weights = trapezoid_weights(self.x[0], self.x[-1], self.x.size - 1)

    def norm(self, q: float) -> float:
        return model_norm(self, q)

    def sampled(self, t_nodes) -> np.ndarray:
        """Samples on (x1, x2, t) with the right-continuous step in t."""
        t_nodes = np.asarray(t_nodes, dtype=float)
        out = np.zeros(self.values.shape[1:] + (t_nodes.size,), dtype=complex)
        for j, t in enumerate(t_nodes):
            idx = np.flatnonzero(self.m_values == math.floor(t))
            if idx.size:
                out[..., j] = self.values[idx[0]]
        return out


def model_operator(f: SampledFunction, g: SampledFunction, k1: int, k2: int, sharp: int = 0,
                   trunc: ModelTruncation = ModelTruncation(), spec: BumpSpec = BumpSpec(),
                   class_offset: int = 2) -> ModelField:
    """The discretized bilinear model at scales (k1, k2).

    ``sharp`` restricts the two modulation vectors to |n_f - n_g|_1 = sharp;
    ``sharp = 0`` uses the same modulation on both packets.
    """
    s = _setup(f, g, k1, k2, trunc, spec, class_offset, sharp)
    x = trunc.x
    vals = np.zeros((s.m_values.size, x.size, x.size), dtype=complex)
    if s.pairs1 and s.pairs2:
        for d1, d2 in _offsets(sharp):
            P1, P2 = _products(s, d1, d2, trunc.N, sharp)
            b_shift = _shift(s.b, d1, d2)
            for i in range(s.m_values.size):
                C = _term_matrix(s.a[i], b_shift[i])
                vals[i] += P1.T @ C @ P2
    return ModelField(x, s.m_values, trunc.m_lengths, vals, trunc.x_weights)


def model_operator_bruteforce(f: SampledFunction, g: SampledFunction, k1: int, k2: int, points,
                              trunc: ModelTruncation, spec: BumpSpec = BumpSpec(), class_offset: int = 2,
                              sharp: int = 0) -> np.ndarray:
    """Nested loops over every index tuple; slow, for cross-checking only.

    ``points`` is an array of (x1, x2, t) rows. Coefficients come from
    ``mod_coeff`` and packets from ``WavePacket.physical``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts), dtype=complex)
    cells = np.floor(pts[:, 2]).astype(int)
    N = trunc.N
    for pair1 in model_pairs(k1, class_offset):
        for pair2 in model_pairs(k2, class_offset):
            box_f = (pair1.first.bounds, pair2.first.bounds)
            box_g = (pair1.second.bounds, pair2.second.bounds)
            for m in trunc.m_values:
                live = cells == m
                if not live.any():
                    continue
                for n1, n2 in product(range(-N, N + 1), repeat=2):
                    for d1, d2 in _offsets(sharp):
                        u1, u2 = n1 + d1, n2 + d2
                        if abs(u1) > N or abs(u2) > N:
                            continue
                        pf = WavePacket(box_f, (n1, n2), spec)
                        pg = WavePacket(box_g, (u1, u2), spec)
                        coef = mod_coeff(f, int(m), pf) * mod_coeff(g, int(m), pg)
                        x1, x2 = pts[live, 0], pts[live, 1]
                        out[live] += coef * pf.physical(x1, x2) * pg.physical(x1, x2)
    return out


def model_norm(F: ModelField, q: float) -> float:
    """(sum_m |cell_m| int |T~_m(x)|^q dx)^(1/q)."""
    if q < 1:
        raise DomainError(f"q must be at least 1, got {q}")
    W = np.multiply.outer(F.x_weights, F.x_weights)
    power = sum(L * float(np.sum(W * np.abs(v) ** q)) for L, v in zip(F.m_lengths, F.values))
    return power ** (1.0 / q)


def time_cells(H: SampledFunction, trunc: ModelTruncation) -> np.ndarray:
    """int over [m, m + 1) of H(x, t) dt, for each truncated m.

    ``H`` lives on (x1, x2, t) over the truncation box; its time nodes must
    include every integer in [-T, T].
    """
    if H.dim != 3:
        raise DomainError("H must be sampled on (x1, x2, t)")
    (ta, tb) = H.bounds[2]
    t = H.axes[2]
    if abs(ta + trunc.T) > 1e-12 or abs(tb - trunc.T) > 1e-12:
        raise DomainError("H's time axis must span [-T, T]")
    if H.resolution[:2] != (trunc.nx, trunc.nx):
        raise DomainError("H's spatial lattice must match the truncation")
    dt = t[1] - t[0]
    out = np.zeros((trunc.m_values.size,) + H.values.shape[:2], dtype=complex)
    for i, m in enumerate(trunc.m_values):
        lo, hi = max(m, -trunc.T), min(m + 1, trunc.T)
        j0, j1 = int(round((lo - ta) / dt)), int(round((hi - ta) / dt))
        if abs(t[j0] - lo) > 1e-9 or abs(t[j1] - hi) > 1e-9:
            raise DomainError("H's time nodes must include the cell endpoints")
        w = trapezoid_weights(lo, hi, j1 - j0)
        out[i] = H.values[:, :, j0:j1 + 1] @ w
    return out


def _pairings(s: _Setup, Hm: np.ndarray, W: np.ndarray, d1: int, d2: int, N: int, sharp: int) -> np.ndarray:
    """<H, packet products x chi_m> as (m, p n1, q n2) arrays."""
    P1, P2 = _products(s, d1, d2, N, sharp)
    return np.stack([np.conj(P1) @ (W * H) @ np.conj(P2).T for H in Hm])


def trilinear_form(f: SampledFunction, g: SampledFunction, H: SampledFunction, k1: int, k2: int,
                   trunc: ModelTruncation = ModelTruncation(), spec: BumpSpec = BumpSpec(),
                   class_offset: int = 2, sharp: int = 0) -> complex:
    """sum a_f * a_g * conj(<H, packet products x chi_m>), the dual of the model.

    With this convention the form equals int T~(f, g) conj(H).
    """
    s = _setup(f, g, k1, k2, trunc, spec, class_offset, sharp)
    if not (s.pairs1 and s.pairs2):
        return 0j
    Hm = time_cells(H, trunc)
    W = np.multiply.outer(trunc.x_weights, trunc.x_weights)
    total = 0j
    for d1, d2 in _offsets(sharp):
        D = _pairings(s, Hm, W, d1, d2, trunc.N, sharp)
        b_shift = _shift(s.b, d1, d2)
        for i in range(s.m_values.size):
            total += np.sum(_term_matrix(s.a[i], b_shift[i]) * np.conj(D[i]))
    return complex(total)


# ---------------------------------------------------------------------------
# the one-dimensional bilinear sum


@dataclass
class Prop31Result:
    value: float
    bessel_ratio: float  # worst sum_n |coeff|^2 / (c ||h phi||^2) over all inner functions
    norm1: float  # ||h1 phi_I1||^2
    norm2: float
    k: int


class _Window:
    """Coefficients <h e_m, phi^n_I> for |n| <= N, computed by FFT over one period of the packet."""

    def __init__(self, h, I: DyadicInterval, N: int, M: int, spec: BumpSpec, nodes: int | None = None):
        pk = packet_freq(I, 0, spec)
        (lo, hi), = pk.support
        p = pk.periods[0]
        # the nodes must separate the 2N + 1 residues and resolve the steepest chirp
        need = max(2 * N + 1, int(np.ceil(2 * M * max(abs(lo), abs(hi)) * p / WINDOW_CHIRP_STEP)) + 1, 256)
        self.L = L = nodes or sp_fft.next_fast_len(need)
        self.xi = lo + p * np.arange(L) / L
        dxi = p / L
        hv = np.asarray(h(self.xi), dtype=complex)
        self.base = hv * pk(self.xi)  # |I|^{-1/2} phi (real), conj is itself
        self.norm2 = float(np.sum(np.abs(hv * make_bump(pk.box, spec)(self.xi)) ** 2) * dxi)
        n = np.arange(-N, N + 1)
        self.cols = n % L
        self.phase0 = np.exp(2j * np.pi * n * lo / p) * (L * dxi)
        self.cframe = p / pk.lengths[0]
        self._steps = {}

    def block(self, m0: int, cnt: int) -> np.ndarray:
        """Rows m = m0, ..., m0 + cnt - 1."""
        if cnt not in self._steps:
            self._steps = {cnt: np.exp(-2j * np.pi * np.outer(np.arange(cnt), self.xi**2))}
        v = self._steps[cnt] * (self.base * np.exp(-2j * np.pi * m0 * self.xi**2))
        # sum_j v_j exp(+2 pi i n j / L)
        return sp_fft.ifft(v, axis=1, overwrite_x=True)[:, self.cols] * self.phase0

    def bessel_ratio(self, block: np.ndarray) -> float:
        if self.norm2 == 0:
            return 0.0
        return float(np.max(np.sum(np.abs(block) ** 2, axis=1))) / (self.cframe * self.norm2)


def _window_coefficients(h, I: DyadicInterval, N: int, M: int, spec: BumpSpec, nodes: int | None = None):
    """(coeff[m + M, n + N], ||h phi_I||^2, worst Bessel ratio); holds the full table in memory."""
    w = _Window(h, I, N, M, spec, nodes)
    out = w.block(-M, 2 * M + 1)
    return out, w.norm2, w.bessel_ratio(out)


def prop31_sum(h1, h2, pair: ClosePair, N: int, M: int, spec: BumpSpec = BumpSpec(),
               details: bool = False):
    """sum over |n| <= N, |m| <= M of |<h1 e_m, phi^n_I1>|^2 |<h2 e_m, phi^n_I2>|^2.

    ``e_m(xi) = exp(-2 pi i m xi^2)``. ``h1`` and ``h2`` are callables (or
    sampled functions with an exact evaluator) on [0, 1]. Rows of m are
    streamed in blocks, so memory stays bounded for large M.
    """
    if N < 1 or M < 1:
        raise DomainError("N and M must be at least 1")
    w1 = _Window(h1, pair.first, N, M, spec)
    w2 = _Window(h2, pair.second, N, M, spec)
    chunk = int(max(1, min(2 * M + 1, (1 << 20) // max(w1.L, w2.L))))
    value, worst = 0.0, 0.0
    for s in range(0, 2 * M + 1, chunk):
        cnt = min(chunk, 2 * M + 1 - s)
        b1, b2 = w1.block(s - M, cnt), w2.block(s - M, cnt)
        value += float(np.sum((b1.real**2 + b1.imag**2) * (b2.real**2 + b2.imag**2)))
        worst = max(worst, w1.bessel_ratio(b1), w2.bessel_ratio(b2))
    if details:
        return Prop31Result(value, worst, w1.norm2, w2.norm2, pair.k)
    return value


def prop31_truncation(k: int, scale: float = 1.0) -> tuple[int, int]:
    """Default (N, M) at scale k: N = 10 * 2^k + 64, M = 6 * 4^k + 128, times ``scale``.

    The m-tail of the sum decays roughly like M^-6; the constants keep the
    change under doubling well below 1e-4 for smooth h at every k.
    """
    return int(round((10 * 2**k + 64) * scale)), int(round((6 * 4**k + 128) * scale))


def prop31_ratio(h1, h2, pair: ClosePair, N: int, M: int, spec: BumpSpec = BumpSpec()) -> float:
    """S / (2^{2k} ||h1 phi_I1||^2 ||h2 phi_I2||^2)."""
    r = prop31_sum(h1, h2, pair, N, M, spec, details=True)
    return r.value / (4.0**pair.k * r.norm1 * r.norm2)


# ---------------------------------------------------------------------------
# level sets


def dyadic_level(v) -> np.ndarray:
    """l with 2^{-l-1} < v <= 2^{-l}; entries with v == 0 map to a sentinel."""
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, np.iinfo(np.int64).min, dtype=np.int64)
    pos = v > 0
    m, e = np.frexp(v[pos])  # v = m 2^e with m in [1/2, 1)
    # v <= 2^{-l} and v > 2^{-l-1}: exact powers of two sit at the top of their bin
    lev = -e
    exact = m == 0.5
    lev[exact] += 1
    out[pos] = lev
    return out


ZERO_LEVEL = np.iinfo(np.int64).min


def counting_norms(members) -> tuple[int, int]:
    """Mixed counting norms of an index set with columns (n1, n2, m, I1, J1, I2, J2).

    Returns (l-infinity over (n2, m, J1) of l-1 over (n1, I1),
             l-infinity over (n1, m, I2) of l-1 over (n2, J2)).
    """
    arr = np.asarray(members)
    if arr.size == 0:
        return 0, 0
    arr = arr.reshape(-1, 7)
    first = np.unique(arr[:, [1, 2, 4]], axis=0, return_counts=True)[1]
    second = np.unique(arr[:, [0, 2, 5]], axis=0, return_counts=True)[1]
    # distinct rows only: a set, not a multiset
    if len(np.unique(arr, axis=0)) != len(arr):
        return counting_norms(np.unique(arr, axis=0))
    return int(first.max()), int(second.max())


@dataclass
class LevelSetReport:
    k1: int
    k2: int
    levels: dict  # name -> sorted list of occupied exponents
    cardinalities: dict  # name -> {exponent (str): count}
    x_bins: list  # dicts with levels, count and the two counting norms
    constants: dict  # measured implicit constants
    measures: dict  # |E1|, |E2|, |F|
    lam: complex = 0j

    @property
    def x_total(self) -> int:
        return int(sum(b["count"] for b in self.x_bins))

    def to_dict(self) -> dict:
        return {
            "k1": self.k1,
            "k2": self.k2,
            "levels": self.levels,
            "cardinalities": self.cardinalities,
            "x_bins": self.x_bins,
            "x_total": self.x_total,
            "constants": self.constants,
            "measures": self.measures,
            "trilinear_form": [self.lam.real, self.lam.imag],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


_LEVEL_NAMES = ("l1", "l2", "r1", "r2", "s1", "s2", "t")


def _hist(levels: np.ndarray) -> dict:
    lv = levels[levels != ZERO_LEVEL]
    u, c = np.unique(lv, return_counts=True)
    return {str(int(a)): int(b) for a, b in zip(u, c)}


def _mixed_norm(level_a: np.ndarray, level_b: np.ndarray, outer: np.ndarray) -> dict:
    """max over outer indices of #inner indices, for each (level_a, level_b) pair.

    ``outer`` rows identify the l-infinity index; rows with any zero level are ignored.
    """
    ok = (level_a != ZERO_LEVEL) & (level_b != ZERO_LEVEL)
    if not ok.any():
        return {}
    keys = np.column_stack([level_a[ok], level_b[ok], outer[ok]])
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    out: dict = {}
    for row, c in zip(uniq, counts):
        key = (int(row[0]), int(row[1]))
        if c > out.get(key, 0):
            out[key] = int(c)
    return out


def level_set_report(f: SampledFunction, g: SampledFunction, H: SampledFunction, k1: int, k2: int,
                     trunc: ModelTruncation = ModelTruncation(), spec: BumpSpec = BumpSpec(),
                     class_offset: int = 2, measures: dict | None = None) -> LevelSetReport:
    """Bin every coefficient, mixed norm and pairing by dyadic size and measure the implicit constants."""
    s = _setup(f, g, k1, k2, trunc, spec, class_offset, 0)
    P, Q = len(s.pairs1), len(s.pairs2)
    Mn, K = s.m_values.size, 2 * trunc.N + 1
    if measures is None:
        measures = {
            "E1": float(np.sum(f.weights * (np.abs(f.values) > 0))),
            "E2": float(np.sum(g.weights * (np.abs(g.values) > 0))),
            "F": float(np.sum(H.weights * (np.abs(H.values) > 0))),
        }
    if P == 0 or Q == 0 or Mn == 0:
        return LevelSetReport(k1, k2, {n: [] for n in _LEVEL_NAMES}, {n: {} for n in ("A1", "A2", "B1", "B2", "C1", "C2", "D")},
                              [], {}, measures)

    # mixed norms: inner product along one axis, L^2 along the other
    def mixed(h, rows_, cols_):
        (a1, a2), (w1, w2) = h.axes, h.axis_weights()
        beta1 = np.empty((Mn, len(rows_), K))
        beta2 = np.empty((Mn, len(cols_), K))
        for i, m in enumerate(s.m_values):
            E1 = np.concatenate([_modulation_matrix(a1, w1, packet_freq(I, 0, spec), 0, trunc.N, int(m)) for I in rows_])
            E2 = np.concatenate([_modulation_matrix(a2, w2, packet_freq(J, 0, spec), 0, trunc.N, int(m)) for J in cols_])
            inner1 = E1 @ h.values  # (rows n1, xi2)
            inner2 = h.values @ E2.T  # (xi1, cols n2)
            beta1[i] = np.sqrt(np.abs(inner1) ** 2 @ w2).reshape(len(rows_), K)
            beta2[i] = np.sqrt(w1 @ np.abs(inner2) ** 2).reshape(len(cols_), K)
        return beta1, beta2

    r1v, r2v = mixed(f, [p.first for p in s.pairs1], [p.first for p in s.pairs2])
    s1v, s2v = mixed(g, [p.second for p in s.pairs1], [p.second for p in s.pairs2])

    Hm = time_cells(H, trunc)
    W = np.multiply.outer(trunc.x_weights, trunc.x_weights)
    D = _pairings(s, Hm, W, 0, 0, trunc.N, 0).reshape(Mn, P, K, Q, K).transpose(0, 1, 3, 2, 4)
    lam = complex(np.sum(s.a * s.b * np.conj(D)))

    # index grids over Omega: axes (m, p, q, n1, n2)
    shape = (Mn, P, Q, K, K)
    mi, pi, qi, n1i, n2i = np.indices(shape)
    lev = {
        "l1": dyadic_level(np.abs(s.a)),
        "l2": dyadic_level(np.abs(s.b)),
        "r1": np.broadcast_to(dyadic_level(r1v)[:, :, None, :, None], shape),
        "r2": np.broadcast_to(dyadic_level(r2v)[:, None, :, None, :], shape),
        "s1": np.broadcast_to(dyadic_level(s1v)[:, :, None, :, None], shape),
        "s2": np.broadcast_to(dyadic_level(s2v)[:, None, :, None, :], shape),
        "t": dyadic_level(np.abs(D)),
    }
    cards = {
        "A1": _hist(lev["l1"]),
        "A2": _hist(lev["l2"]),
        "B1": _hist(dyadic_level(r1v)),
        "B2": _hist(dyadic_level(r2v)),
        "C1": _hist(dyadic_level(s1v)),
        "C2": _hist(dyadic_level(s2v)),
        "D": _hist(lev["t"]),
    }

    flat = {k: np.ascontiguousarray(v).ravel() for k, v in lev.items()}
    live = np.ones(flat["l1"].shape, dtype=bool)
    for v in flat.values():
        live &= v != ZERO_LEVEL
    # interval indices: I1, I2 follow p; J1, J2 follow q
    idx = {"m": mi.ravel(), "p": pi.ravel(), "q": qi.ravel(), "n1": n1i.ravel() - trunc.N, "n2": n2i.ravel() - trunc.N}

    # X^{l1, r2}: counting norm l-inf over (n2, m, J1), l-1 over (n1, I1)
    outer_f = np.column_stack([idx["n2"], idx["m"], idx["q"]])
    outer_g = np.column_stack([idx["n1"], idx["m"], idx["p"]])
    norm_l1r2 = _mixed_norm(flat["l1"], flat["r2"], outer_f)
    norm_l2s1 = _mixed_norm(flat["l2"], flat["s1"], outer_g)

    bins = []
    const = {"lemma_1": 0.0, "lemma_2": 0.0, "lemma_3": 0.0, "lemma_4": 0.0,
             "range_l1": 0.0, "range_l2": 0.0, "count_square": 0.0, "count_linear": 0.0}
    F_meas = measures["F"]
    if live.any():
        keys = np.column_stack([flat[n][live] for n in _LEVEL_NAMES])
        uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        members = np.column_stack([idx["n1"][live], idx["n2"][live], idx["m"][live],
                                   idx["p"][live], idx["q"][live], idx["p"][live], idx["q"][live]])
        order = np.argsort(inverse, kind="stable")
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for b, (row, cnt) in enumerate(zip(uniq, counts)):
            l1, l2, r1, r2, s1, s2, t = (int(v) for v in row)
            mem = members[order[bounds[b]:bounds[b + 1]]]
            cn = counting_norms(mem)
            nx_l1r2 = norm_l1r2[(l1, r2)]
            nx_l2s1 = norm_l2s1[(l2, s1)]
            ratios = {
                "lemma_1": 2.0 ** (r1 - l1),
                "lemma_2": 2.0 ** (r2 - l1) * math.sqrt(nx_l1r2),
                "lemma_3": 2.0 ** (s1 - l2) * math.sqrt(nx_l2s1),
                "lemma_4": 2.0 ** (s2 - l2),
            }
            for key, val in ratios.items():
                const[key] = max(const[key], val)
            if F_meas > 0:
                const["count_square"] = max(const["count_square"], cnt / (4.0**t * 2.0 ** (-(k1 + k2)) * F_meas))
                const["count_linear"] = max(const["count_linear"], cnt / (2.0**t * F_meas))
            bins.append({
                "levels": dict(zip(_LEVEL_NAMES, (l1, l2, r1, r2, s1, s2, t))),
                "count": int(cnt),
                "norm_n2mJ1": cn[0],
                "norm_n1mI2": cn[1],
                "outer_n2mJ1": int(len(np.unique(mem[:, [1, 2, 4]], axis=0))),
                "outer_n1mI2": int(len(np.unique(mem[:, [0, 2, 5]], axis=0))),
                "norm_X_l1r2": nx_l1r2,
                "norm_X_l2s1": nx_l2s1,
                **{k: float(v) for k, v in ratios.items()},
            })
    occ_l1 = [int(v) for v in np.unique(flat["l1"][flat["l1"] != ZERO_LEVEL])]
    occ_l2 = [int(v) for v in np.unique(flat["l2"][flat["l2"] != ZERO_LEVEL])]
    if occ_l1:
        const["range_l1"] = 2.0 ** (-min(occ_l1)) / 2.0 ** (-(k1 + k2) / 2)
    if occ_l2:
        const["range_l2"] = 2.0 ** (-min(occ_l2)) / 2.0 ** (-(k1 + k2) / 2)
    levels = {n: [int(v) for v in np.unique(flat[n][flat[n] != ZERO_LEVEL])] for n in _LEVEL_NAMES}
    return LevelSetReport(k1, k2, levels, cards, bins, const, measures, lam)


def _box_indicator(lo, hi):
    def fn(*x):
        out = np.ones(np.broadcast(*x).shape, dtype=bool)
        for xj, a, b in zip(x, lo, hi):
            out &= (xj >= a) & (xj <= b)
        return out.astype(complex)

    return fn


def indicator_triple(seed: int, trunc: ModelTruncation, resolution: int = 128):
    """Seeded indicators (f, g, H) of rectangles with their exact measures.

    f and g indicate boxes of side U(0.55, 0.9) in [0, 1]^2; H indicates a
    box in space-time whose time extent covers half the truncation.
    """
    rng = np.random.default_rng([seed, 44])
    parts = []
    for _ in range(2):
        side = rng.uniform(0.55, 0.9, 2)
        lo = rng.uniform(0, 1 - side)
        parts.append((lo, lo + side))
    c = rng.uniform(-trunc.X / 4, trunc.X / 4, 2)
    r = rng.uniform(trunc.X / 8, trunc.X / 2)
    t0 = rng.uniform(-trunc.T / 2, 0)
    hlo = (c[0] - r, c[1] - r, t0)
    hhi = (c[0] + r, c[1] + r, t0 + trunc.T)
    f = SampledFunction.from_callable(_box_indicator(*parts[0]), ((0.0, 1.0),) * 2, resolution)
    g = SampledFunction.from_callable(_box_indicator(*parts[1]), ((0.0, 1.0),) * 2, resolution)
    bounds = ((-trunc.X, trunc.X),) * 2 + ((-trunc.T, trunc.T),)
    H = SampledFunction.from_callable(_box_indicator(hlo, hhi), bounds, (trunc.nx, trunc.nx, 4 * trunc.nt))
    clip = lambda a, b, lo_, hi_: max(0.0, min(b, hi_) - max(a, lo_))
    measures = {
        "E1": float(np.prod(parts[0][1] - parts[0][0])),
        "E2": float(np.prod(parts[1][1] - parts[1][0])),
        "F": clip(hlo[0], hhi[0], -trunc.X, trunc.X) * clip(hlo[1], hhi[1], -trunc.X, trunc.X)
        * clip(hlo[2], hhi[2], -trunc.T, trunc.T),
    }
    return f, g, H, measures
