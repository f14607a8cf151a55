"""Fourier extension from the unit cube to the paraboloid.

``extend(g)(x, t) = int g(xi) exp(-2 pi i x.xi) exp(-2 pi i t |xi|^2) dxi``
for ``g`` supported in ``[0, 1]^d``, ``d`` in {1, 2}.

Space-time lattices live on a co-moving box: the slice at time ``t`` is the
cube of half-width ``X`` centred at ``x = velocity * t`` (each axis). Mass of
``extend(g)(., t)`` for ``g`` on ``[0, 1]`` sits near ``x = -2 t xi``, so the
default ``velocity = -1`` follows the middle of the beam. The shear has unit
Jacobian, so norms on the box are plain trapezoid sums.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np
from scipy.signal import czt

from .errors import DomainError, ResolutionError
from .sampling import SampledFunction, is_power_of_two, trapezoid_weights

__all__ = [
    "SpaceTimeBox",
    "extend",
    "extend_points",
    "extend_slices",
    "schrodinger_evolve",
    "spacetime_norm",
    "strichartz_ratio",
    "slice_masses",
    "MAX_PHASE_STEP",
    "min_resolution",
]

# largest allowed local frequency |x + 2 t xi| times the xi spacing
MAX_PHASE_STEP = 0.5


@dataclass(frozen=True)
class SpaceTimeBox:
    """[-X, X]^d x [-T, T] in co-moving coordinates, nx / nt intervals per axis."""

    X: float
    T: float
    nx: int
    nt: int
    velocity: float = -1.0

    def __post_init__(self):
        if not (self.X > 0 and self.T > 0):
            raise DomainError(f"box half-widths must be positive, got X={self.X}, T={self.T}")
        for n in (self.nx, self.nt):
            if not is_power_of_two(n):
                raise DomainError(f"resolution {n} is not a power of two")

    @property
    def y(self) -> np.ndarray:
        """Co-moving spatial nodes (one axis)."""
        return np.linspace(-self.X, self.X, self.nx + 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.nt + 1)

    def x_at(self, t: float) -> np.ndarray:
        return self.y + self.velocity * t

    def spatial_weights(self) -> np.ndarray:
        return trapezoid_weights(-self.X, self.X, self.nx)

    def time_weights(self) -> np.ndarray:
        return trapezoid_weights(-self.T, self.T, self.nt)

    def bounds(self, d: int) -> tuple:
        return ((-self.X, self.X),) * d + ((-self.T, self.T),)

    def doubled(self) -> "SpaceTimeBox":
        """Twice the extent at the same spacing."""
        return replace(self, X=2 * self.X, T=2 * self.T, nx=2 * self.nx, nt=2 * self.nt)

    def refined(self) -> "SpaceTimeBox":
        """Same extent, half the spacing."""
        return replace(self, nx=2 * self.nx, nt=2 * self.nt)


def min_resolution(box: SpaceTimeBox) -> int:
    """Smallest power-of-two grid on [0, 1] that passes the phase check on ``box``."""
    # |y + v t + 2 t xi| over the box and xi in [0, 1]
    worst = box.X + box.T * max(abs(box.velocity), abs(box.velocity + 2))
    K = int(np.ceil(worst / MAX_PHASE_STEP - 1e-9))
    return 1 << max(int(np.ceil(np.log2(max(K, 2)))), 1)


def _check_support(g: SampledFunction) -> None:
    if g.dim not in (1, 2):
        raise DomainError(f"only d = 1, 2 are supported, got d = {g.dim}")
    for a, b in g.bounds:
        if a < -1e-12 or b > 1 + 1e-12:
            raise DomainError(f"g must be supported in [0, 1]^d, got axis [{a}, {b}]")


def _check_phase(g: SampledFunction, x_lo, x_hi, t) -> None:
    """Refuse when the trapezoid rule in xi would alias onto the integrand."""
    t = np.asarray(t, dtype=float)
    for (a, b), h in zip(g.bounds, g.spacing):
        # largest |x + 2 t xi| over the requested points and xi in [a, b]
        ends = [np.abs(x + 2 * t * xi) for x in (x_lo, x_hi) for xi in (a, b)]
        worst = float(np.max(ends))
        if worst * h > MAX_PHASE_STEP:
            raise ResolutionError(
                f"xi spacing {h:.3g} under-resolves local frequency {worst:.3g} "
                f"(product {worst * h:.3g} > {MAX_PHASE_STEP}); refine g's grid or shrink the box"
            )


def _dft_direct(v: np.ndarray, axis: int, xi: np.ndarray, x: np.ndarray) -> np.ndarray:
    M = np.exp(-2j * np.pi * np.outer(x, xi))
    return np.moveaxis(np.tensordot(v, M, axes=([axis], [1])), -1, axis)


def _dft_fast(v: np.ndarray, axis: int, xi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """sum_k v_k exp(-2 pi i x_j xi_k) for uniform xi and x via FFT."""
    dxi, dx = xi[1] - xi[0], x[1] - x[0]
    a, x0 = xi[0], x[0]
    K, J = xi.size, x.size
    k = np.arange(K)
    j = np.arange(J)
    shape = [1] * v.ndim
    shape[axis] = K
    pre = np.exp(-2j * np.pi * x0 * dxi * k).reshape(shape)
    L = 1.0 / (dx * dxi)
    Li = int(round(L))
    if abs(L - Li) < 1e-9 * L and Li >= max(K, J):
        # exact zero-padded FFT: exp(-2 pi i j k / L)
        out = np.fft.fft(v * pre, n=Li, axis=axis)
        out = np.take(out, j, axis=axis)
    else:
        out = czt(v * pre, m=J, w=np.exp(-2j * np.pi * dx * dxi), a=1.0, axis=axis)
    shape[axis] = J
    post = np.exp(-2j * np.pi * a * (x0 + dx * j)).reshape(shape)
    return out * post


_METHODS = {"fft": _dft_fast, "direct": _dft_direct}


def _weighted(g: SampledFunction) -> np.ndarray:
    return g.weights * g.values


def _chirp(g: SampledFunction, t: float) -> np.ndarray:
    out = np.ones(())
    for a in g.axes:
        out = np.multiply.outer(out, np.exp(-2j * np.pi * t * a**2))
    return out


def extend_slices(g: SampledFunction, box: SpaceTimeBox, method: str = "fft") -> Iterator[tuple[int, np.ndarray]]:
    """Yield (time index, slice of extend(g) on the co-moving lattice)."""
    _check_support(g)
    if method not in _METHODS:
        raise DomainError(f"unknown method {method!r}")
    worst_t = box.T
    _check_phase(g, box.velocity * worst_t - box.X, box.velocity * worst_t + box.X, worst_t)
    _check_phase(g, -box.velocity * worst_t - box.X, -box.velocity * worst_t + box.X, -worst_t)
    transform = _METHODS[method]
    gw = _weighted(g)
    axes = g.axes
    for i, t in enumerate(box.t):
        v = gw * _chirp(g, t)
        x = box.x_at(t)
        for j, xi in enumerate(axes):
            v = transform(v, j, xi, x)
        yield i, v


def extend(g: SampledFunction, box: SpaceTimeBox, method: str = "fft") -> SampledFunction:
    """extend(g) on the co-moving lattice; axes are (y_1, ..., y_d, t).

    The sample at (y, t) is the value at the physical point x = y + velocity * t.
    """
    shape = (box.nx + 1,) * g.dim + (box.nt + 1,)
    out = np.empty(shape, dtype=complex)
    for i, v in extend_slices(g, box, method):
        out[..., i] = v
    return SampledFunction(box.bounds(g.dim), out)


def extend_points(g: SampledFunction, x, t) -> np.ndarray:
    """Direct quadrature of extend(g) at arbitrary points.

    ``x`` has shape (P, d) (or (P,) when d = 1) and ``t`` shape (P,).
    """
    _check_support(g)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.asarray(x, dtype=float).reshape(t.size, g.dim)
    _check_phase(g, x.min(axis=0), x.max(axis=0), t)
    gw = _weighted(g)
    mats = [np.exp(-2j * np.pi * (np.outer(x[:, j], xi) + np.outer(t, xi**2))) for j, xi in enumerate(g.axes)]
    if g.dim == 1:
        return mats[0] @ gw
    return np.sum((mats[0] @ gw) * mats[1], axis=1)


def schrodinger_evolve(u0_hat: SampledFunction, x, t) -> np.ndarray:
    """Free Schroedinger solution u(x, t) with initial data of transform u0_hat."""
    return extend_points(u0_hat, -np.asarray(x, dtype=float), -np.asarray(t, dtype=float))


def spacetime_norm(F: SampledFunction, q: float, box: SpaceTimeBox | None = None) -> float:
    """L^q norm of samples by the trapezoid rule on their box."""
    if q < 1:
        raise DomainError(f"q must be at least 1, got {q}")
    if box is not None:
        d = F.dim - 1
        expect = (box.nx,) * d + (box.nt,)
        if F.resolution != expect:
            raise DomainError(f"samples of resolution {F.resolution} do not match the box {expect}")
    return F.norm(q)


def _streamed_power(g: SampledFunction, q: float, box: SpaceTimeBox, method: str) -> float:
    wx = box.spatial_weights()
    wy = wx if g.dim == 1 else np.multiply.outer(wx, wx)
    wt = box.time_weights()
    total = 0.0
    for i, v in extend_slices(g, box, method):
        total += wt[i] * float(np.sum(wy * np.abs(v) ** q))
    return total


def strichartz_ratio(g: SampledFunction, q: float, box: SpaceTimeBox, method: str = "fft") -> float:
    """||extend(g)||_{L^q(box)} / ||g||_2."""
    gn = g.norm(2)
    if gn == 0:
        raise DomainError("g is zero")
    if q < 1:
        raise DomainError(f"q must be at least 1, got {q}")
    return _streamed_power(g, q, box, method) ** (1.0 / q) / gn


def slice_masses(g: SampledFunction, box: SpaceTimeBox, method: str = "fft") -> np.ndarray:
    """||extend(g)(., t)||_2 for every time node of the box."""
    wx = box.spatial_weights()
    wy = wx if g.dim == 1 else np.multiply.outer(wx, wx)
    out = np.empty(box.nt + 1)
    for i, v in extend_slices(g, box, method):
        out[i] = np.sqrt(np.sum(wy * np.abs(v) ** 2))
    return out
