"""Adapted bumps, modulated wave packets and their Fourier coefficients.

Conventions
-----------
* ``make_bump(I)`` is identically 1 on ``I`` and vanishes outside the
  ``c``-dilate of ``I``; the two transitions have width ``(c - 1)|I| / 2``.
* The frequency-side packet on a box ``Q = I_1 x ... x I_d`` with modulation
  ``n`` is ``|Q|^{-1/2} phi_Q(xi) exp(-2 pi i n . xi / p)`` where the period
  is ``p_j = c |I_j|`` on each axis, so that the modulations form an
  orthogonal system on the support of ``phi_Q``.
* The physical-side packet is its Fourier transform
  ``x -> int packet(xi) exp(-2 pi i x . xi) dxi``; the envelope sits at
  ``x = -n / p``.
* ``<F, G> = int F conj(G)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .dyadic import DyadicInterval
from .errors import DomainError, ResolutionError
from .sampling import SampledFunction

__all__ = [
    "BumpSpec",
    "WavePacket",
    "smooth_step",
    "make_bump",
    "packet_freq",
    "packet_phys",
    "bump_transform",
    "mod_coeff",
    "gauss_coeff",
    "reconstruct",
    "bessel_sum",
    "frame_constant",
    "check_chirp_resolution",
    "PACKET_CSV_COLUMNS",
    "write_packet_table",
]

# the oscillation exp(-2 pi i m |xi|^2) needs |m| * spacing below this
MAX_CHIRP_STEP = 0.1


@lru_cache(maxsize=None)
def _mollifier_step_spline() -> CubicHermiteSpline:
    def rho(u):
        u = np.asarray(u, dtype=float)
        inside = (u > 0) & (u < 1)
        safe = np.where(inside, u * (1.0 - u), 1.0)
        return np.where(inside, np.exp(-1.0 / safe), 0.0)

    nodes = np.linspace(0.0, 0.5, 2049)
    gx, gw = np.polynomial.legendre.leggauss(12)
    a, b = nodes[:-1, None], nodes[1:, None]
    pts = 0.5 * (b - a) * gx + 0.5 * (a + b)
    pieces = np.sum(0.5 * (b - a) * gw * rho(pts), axis=1)
    half = np.sum(pieces)
    cum = 0.5 * np.concatenate([[0.0], np.cumsum(pieces)]) / half
    cum[-1] = 0.5
    return CubicHermiteSpline(nodes, cum, 0.5 * rho(nodes) / half)


def _mollifier_step(s: np.ndarray) -> np.ndarray:
    spline = _mollifier_step_spline()
    lower = s <= 0.5
    out = np.empty_like(s)
    out[lower] = spline(s[lower])
    out[~lower] = 1.0 - spline(1.0 - s[~lower])
    return out


def _ratio_step(s: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


_PROFILES = {"mollifier": _mollifier_step, "ratio": _ratio_step}


def smooth_step(s, profile: str = "mollifier") -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, step(s) + step(1 - s) = 1.

    ``"mollifier"`` integrates exp(-1/(s(1-s))); ``"ratio"`` is
    e(s) / (e(s) + e(1-s)) with e(s) = exp(-1/s).
    """
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return _PROFILES[profile](s)


@dataclass(frozen=True)
class BumpSpec:
    c: float = 1.4
    profile: str = "mollifier"

    def __post_init__(self):
        if not self.c > 1:
            raise DomainError(f"enlargement must exceed 1, got c={self.c}")
        if self.profile not in _PROFILES:
            raise DomainError(f"unknown profile {self.profile!r}")

    def margin(self, length: float) -> float:
        return (self.c - 1.0) * length / 2.0


Box = tuple[tuple[float, float], ...]


def _as_box(base) -> Box:
    """Normalize an interval, a pair (lo, hi), or a rectangle into a box."""
    if isinstance(base, DyadicInterval):
        return (base.bounds,)
    if len(base) == 2 and all(np.isscalar(v) for v in base):
        return ((float(base[0]), float(base[1])),)
    out = []
    for b in base:
        out.extend(_as_box(b))
    return tuple(out)


def _bump_1d(xi, lo: float, hi: float, spec: BumpSpec) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    w = spec.margin(hi - lo)
    left = smooth_step((xi - (lo - w)) / w, spec.profile)
    right = smooth_step(((hi + w) - xi) / w, spec.profile)
    return np.where(xi < lo, left, np.where(xi > hi, right, 1.0))


def make_bump(base, spec: BumpSpec = BumpSpec()):
    """L-infinity normalized bump adapted to an interval or rectangle."""
    box = _as_box(base)

    def bump(*xi):
        if len(xi) != len(box):
            raise DomainError(f"bump on {len(box)} axes called with {len(xi)} coordinates")
        out = 1.0
        for x, (lo, hi) in zip(xi, box):
            out = out * _bump_1d(x, lo, hi, spec)
        return out

    bump.box = box
    bump.spec = spec
    return bump


@lru_cache(maxsize=None)
def _transform_nodes(spec: BumpSpec, nodes: int = 1024):
    e = (spec.c - 1.0) / 2.0
    u = np.linspace(-e, 1.0 + e, nodes + 1)
    w = np.full(u.shape, (1.0 + 2 * e) / nodes)
    w[[0, -1]] *= 0.5
    return u - 0.5, w * _bump_1d(u, 0.0, 1.0, spec)


def bump_transform(s, spec: BumpSpec = BumpSpec()) -> np.ndarray:
    """Fourier transform of the bump adapted to [0, 1] at frequency s.

    The bump is symmetric about 1/2, so the transform is
    exp(-pi i s) times a real cosine integral.
    """
    s = np.asarray(s, dtype=float)
    v, w = _transform_nodes(spec)
    flat = s.ravel()
    real = np.empty(flat.shape)
    for start in range(0, flat.size, 4096):
        chunk = flat[start:start + 4096]
        real[start:start + 4096] = np.cos(2 * np.pi * np.outer(chunk, v)) @ w
    return (np.exp(-1j * np.pi * flat) * real).reshape(s.shape)


@dataclass(frozen=True)
class WavePacket:
    """A modulated bump on a box, frequency side unless asked otherwise."""

    box: Box
    n: tuple[int, ...]
    spec: BumpSpec = BumpSpec()
    normalization: str = "L2"

    def __post_init__(self):
        if len(self.n) != len(self.box):
            raise DomainError("modulation and box dimensions differ")
        if self.normalization not in ("L2", "Linf"):
            raise DomainError(f"unknown normalization {self.normalization!r}")

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.box)

    @property
    def periods(self) -> tuple[float, ...]:
        return tuple(self.spec.c * L for L in self.lengths)

    @property
    def support(self) -> Box:
        return tuple((lo - self.spec.margin(hi - lo), hi + self.spec.margin(hi - lo)) for lo, hi in self.box)

    def amplitude(self, axis: int) -> float:
        return self.lengths[axis] ** -0.5 if self.normalization == "L2" else 1.0

    def factor(self, axis: int, xi) -> np.ndarray:
        lo, hi = self.box[axis]
        xi = np.asarray(xi, dtype=float)
        mod = np.exp(-2j * np.pi * self.n[axis] * xi / self.periods[axis])
        return self.amplitude(axis) * _bump_1d(xi, lo, hi, self.spec) * mod

    def __call__(self, *xi) -> np.ndarray:
        out = 1.0
        for j, x in enumerate(xi):
            out = out * self.factor(j, x)
        return out

    def physical_factor(self, axis: int, x) -> np.ndarray:
        lo, hi = self.box[axis]
        L = hi - lo
        y = np.asarray(x, dtype=float) + self.n[axis] / self.periods[axis]
        return self.amplitude(axis) * L * np.exp(-2j * np.pi * y * lo) * bump_transform(L * y, self.spec)

    def physical(self, *x) -> np.ndarray:
        out = 1.0
        for j, xj in enumerate(x):
            out = out * self.physical_factor(j, xj)
        return out

    def with_modulation(self, n) -> "WavePacket":
        return WavePacket(self.box, tuple(int(v) for v in np.atleast_1d(n)), self.spec, self.normalization)


def packet_freq(base, n, spec: BumpSpec = BumpSpec()) -> WavePacket:
    box = _as_box(base)
    n = tuple(int(v) for v in np.atleast_1d(n))
    return WavePacket(box, n, spec)


def packet_phys(Q, n, spec: BumpSpec = BumpSpec(), x=None) -> np.ndarray:
    """Fourier transform of the frequency packet on Q, evaluated at x.

    ``x`` is a sequence of coordinate arrays, one per axis (a scalar point
    also works).
    """
    packet = packet_freq(Q, n, spec)
    if x is None:
        raise DomainError("no evaluation point given")
    coords = [x] if packet.dim == 1 and np.ndim(x) <= 1 and not isinstance(x, tuple) else list(x)
    return packet.physical(*coords)


def frame_constant(packet: WavePacket) -> float:
    """prod_j p_j / |I_j|: the Parseval constant of the modulated family."""
    return float(np.prod([p / L for p, L in zip(packet.periods, packet.lengths)]))


def check_chirp_resolution(h: SampledFunction, m: int) -> None:
    step = max(h.spacing)
    if abs(m) * step > MAX_CHIRP_STEP:
        raise ResolutionError(
            f"grid spacing {step:.3g} cannot resolve exp(-2 pi i m |xi|^2) for m={m}: "
            f"|m| * spacing = {abs(m) * step:.3g} > {MAX_CHIRP_STEP}"
        )


def _chirp(axes: Sequence[np.ndarray], m: float) -> np.ndarray:
    out = np.ones(())
    for a in axes:
        out = np.multiply.outer(out, np.exp(-2j * np.pi * m * a**2))
    return out


def mod_coeff(h: SampledFunction, m: int, packet: WavePacket) -> complex:
    """<h exp(-2 pi i m |.|^2), packet> by trapezoid quadrature on h's grid."""
    if h.dim != packet.dim:
        raise DomainError("function and packet dimensions differ")
    check_chirp_resolution(h, m)
    axes = h.axes
    weights = h.axis_weights()
    vec = []
    for j, (a, w) in enumerate(zip(axes, weights)):
        vec.append(w * np.exp(-2j * np.pi * m * a**2) * np.conj(packet.factor(j, a)))
    out = h.values
    for v in reversed(vec):
        out = out @ v
    return complex(out)


def gauss_coeff(u, m: int, t: float, spec: BumpSpec = BumpSpec(), nodes: int = 4096) -> complex:
    """<exp(-2 pi i (t - m)|.|^2), packet on [0,1]^2 with modulation u>."""
    tau = t - m
    if abs(tau) > 1:
        raise DomainError(f"|t - m| = {abs(tau):.3g} exceeds 1")
    u = np.atleast_1d(u)
    e = (spec.c - 1.0) / 2.0
    xi = np.linspace(-e, 1.0 + e, nodes + 1)
    w = np.full(xi.shape, (1.0 + 2 * e) / nodes)
    w[[0, -1]] *= 0.5
    base = w * np.exp(-2j * np.pi * tau * xi**2) * _bump_1d(xi, 0.0, 1.0, spec)
    out = 1.0 + 0j
    for uj in u:
        out *= np.sum(base * np.exp(2j * np.pi * uj * xi / spec.c))
    return complex(out)


def _modulation_matrix(axis_nodes, weights, packet: WavePacket, axis: int, N: int, m: int) -> np.ndarray:
    """Rows n = -N..N of w * chirp_m * conj(packet with modulation n)."""
    lo, hi = packet.box[axis]
    p = packet.periods[axis]
    env = weights * np.exp(-2j * np.pi * m * axis_nodes**2) * packet.amplitude(axis) * _bump_1d(axis_nodes, lo, hi, packet.spec)
    n = np.arange(-N, N + 1)
    return np.exp(2j * np.pi * np.outer(n, axis_nodes) / p) * env


def reconstruct(h: SampledFunction, m: int, base, N: int, spec: BumpSpec = BumpSpec()) -> SampledFunction:
    """Partial sum of the packet expansion of h exp(-2 pi i m |xi|^2).

    The sum runs over |n|_inf <= N and is divided by the frame constant, so
    on the base box it approximates h exp(-2 pi i m |xi|^2) itself. The
    result is returned on the nodes of h's grid that lie in the base box.
    """
    if N < 1:
        raise DomainError("truncation N must be at least 1")
    check_chirp_resolution(h, m)
    packet = packet_freq(base, (0,) * h.dim, spec)
    axes, weights = h.axes, h.axis_weights()
    mats = [_modulation_matrix(a, w, packet, j, N, m) for j, (a, w) in enumerate(zip(axes, weights))]
    # contract axis by axis: coef[n_0, ..., n_{d-1}]
    coef = h.values
    for j, M in enumerate(mats):
        coef = np.moveaxis(np.tensordot(coef, M, axes=([j], [1])), -1, j)
    # synthesize on the nodes inside the base box
    out_axes = []
    synth = []
    for j, (a, (lo, hi)) in enumerate(zip(axes, packet.box)):
        sel = a[(a >= lo - 1e-12) & (a <= hi + 1e-12)]
        out_axes.append(sel)
        n = np.arange(-N, N + 1)
        p = packet.periods[j]
        phi = packet.amplitude(j) * _bump_1d(sel, lo, hi, spec) * (packet.lengths[j] / p)
        synth.append(np.exp(-2j * np.pi * np.outer(sel, n) / p) * phi[:, None])
    vals = coef
    for j, S in enumerate(synth):
        vals = np.moveaxis(np.tensordot(vals, S, axes=([j], [1])), -1, j)
    bounds = tuple((float(a[0]), float(a[-1])) for a in out_axes)
    return SampledFunction(bounds, vals)


def bessel_sum(h: SampledFunction, m: int, base, N: int, spec: BumpSpec = BumpSpec()) -> tuple[float, float]:
    """(sum_{|n|<=N} |coeff|^2, frame_constant * ||h phi_base||^2)."""
    check_chirp_resolution(h, m)
    packet = packet_freq(base, (0,) * h.dim, spec)
    axes, weights = h.axes, h.axis_weights()
    coef = h.values
    for j, (a, w) in enumerate(zip(axes, weights)):
        M = _modulation_matrix(a, w, packet, j, N, m)
        coef = np.moveaxis(np.tensordot(coef, M, axes=([j], [1])), -1, j)
    lhs = float(np.sum(np.abs(coef) ** 2))
    bump = make_bump(packet.box, spec)
    grids = np.meshgrid(*axes, indexing="ij")
    rhs = frame_constant(packet) * float(np.sum(h.weights * np.abs(h.values * bump(*grids)) ** 2))
    return lhs, rhs


PACKET_CSV_COLUMNS = ("k1", "k2", "l1", "l2", "n1", "n2", "m", "re", "im")


def write_packet_table(path, rows: Iterable[Sequence]) -> None:
    """Write coefficient rows (k1, k2, l1, l2, n1, n2, m, value) as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PACKET_CSV_COLUMNS)
        for k1, k2, l1, l2, n1, n2, m, value in rows:
            value = complex(value)
            writer.writerow([k1, k2, l1, l2, n1, n2, m, repr(value.real), repr(value.imag)])
