"""Functions sampled on uniform power-of-two grids with trapezoid weights."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError

__all__ = ["SampledFunction", "trapezoid_weights", "is_power_of_two"]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def trapezoid_weights(lo: float, hi: float, n: int) -> np.ndarray:
    """Composite trapezoid weights for n intervals (n + 1 nodes)."""
    w = np.full(n + 1, (hi - lo) / n)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass
class SampledFunction:
    """Complex samples on the nodes of a uniform grid over a box.

    The function is understood to vanish outside ``bounds``. ``fn``, when
    present, is an exact evaluator used for off-grid points; otherwise
    off-grid values are interpolated linearly.
    """

    bounds: tuple[tuple[float, float], ...]
    values: np.ndarray
    fn: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        self.bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != len(self.bounds):
            raise DomainError("values rank does not match the number of axes")
        for (a, b), n in zip(self.bounds, self.resolution):
            if not b > a:
                raise DomainError(f"empty axis [{a}, {b}]")
            if not is_power_of_two(n):
                raise DomainError(f"resolution {n} is not a power of two")

    @classmethod
    def from_callable(cls, fn: Callable, bounds: Sequence, resolution) -> "SampledFunction":
        bounds = tuple(tuple(b) for b in bounds)
        if np.isscalar(resolution):
            resolution = (int(resolution),) * len(bounds)
        axes = [np.linspace(a, b, n + 1) for (a, b), n in zip(bounds, resolution)]
        grids = np.meshgrid(*axes, indexing="ij")
        return cls(bounds, fn(*grids), fn)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def resolution(self) -> tuple[int, ...]:
        return tuple(s - 1 for s in self.values.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / n for (a, b), n in zip(self.bounds, self.resolution))

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, n + 1) for (a, b), n in zip(self.bounds, self.resolution)]

    def axis_weights(self) -> list[np.ndarray]:
        return [trapezoid_weights(a, b, n) for (a, b), n in zip(self.bounds, self.resolution)]

    @property
    def weights(self) -> np.ndarray:
        w = np.ones(())
        for wi in self.axis_weights():
            w = np.multiply.outer(w, wi)
        return w

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.bounds]))

    def integral(self, values=None) -> complex:
        v = self.values if values is None else values
        return complex(np.sum(self.weights * v))

    def norm(self, q: float = 2.0) -> float:
        return float(np.sum(self.weights * np.abs(self.values) ** q) ** (1.0 / q))

    def with_values(self, values, fn=None) -> "SampledFunction":
        return SampledFunction(self.bounds, values, fn)

    def scaled(self, c) -> "SampledFunction":
        fn = None if self.fn is None else (lambda *x, _f=self.fn: c * _f(*x))
        return SampledFunction(self.bounds, c * self.values, fn)

    def __call__(self, *coords) -> np.ndarray:
        coords = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        inside = np.ones(coords[0].shape, dtype=bool)
        for c, (a, b) in zip(coords, self.bounds):
            inside &= (c >= a) & (c <= b)
        if self.fn is not None:
            out = np.asarray(self.fn(*coords), dtype=complex)
            return np.where(inside, out, 0.0)
        interp = RegularGridInterpolator(self.axes, self.values, bounds_error=False, fill_value=0.0)
        pts = np.stack([c.ravel() for c in coords], axis=-1)
        return interp(pts).reshape(coords[0].shape)
