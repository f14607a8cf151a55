"""Random test functions, ascent estimates of operator norms, decay fits."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bumps import smooth_step
from .errors import DomainError
from .sampling import SampledFunction

__all__ = [
    "FUNCTION_CLASSES",
    "random_function",
    "gaussian_profile",
    "SearchConfig",
    "AscentResult",
    "TrigBasis",
    "ascend",
    "ascend_ratio",
    "strichartz_objective",
    "model_norm_objective",
    "finite_difference_gradient",
    "gradient_check",
    "decay_fit",
    "DecayFit",
    "epsilon_prime",
    "array_hash",
]

FUNCTION_CLASSES = ("band-limited", "indicator-smooth", "gaussian-profile")


def _taper(x):
    # sin^2 vanishes to second order at both ends of [0, 1]
    return np.where((x >= 0) & (x <= 1), np.sin(np.pi * x) ** 2, 0.0)


def gaussian_profile(x, center, width):
    """exp(-|x - center|^2 / (2 width^2)), cut off outside [0, 1]^d."""
    out = 1.0
    for xj, cj in zip(x, center):
        xj = np.asarray(xj, dtype=float)
        out = out * np.where((xj >= 0) & (xj <= 1), np.exp(-((xj - cj) ** 2) / (2 * width**2)), 0.0)
    return out


def _band_limited(rng, d):
    degree = 2
    freqs = np.arange(-degree, degree + 1)
    C = rng.normal(size=(freqs.size,) * d) + 1j * rng.normal(size=(freqs.size,) * d)

    def raw(*x):
        out = 0j
        for idx in np.ndindex(C.shape):
            term = C[idx]
            for j, xj in enumerate(x):
                term = term * np.exp(2j * np.pi * freqs[idx[j]] * xj)
            out = out + term
        for xj in x:
            out = out * _taper(xj)
        return out

    return raw


def _indicator_smooth(rng, d):
    lengths = rng.uniform(0.4, 0.8, size=d)
    lows = rng.uniform(0.05, 0.95 - lengths)
    ramp = 0.1

    def raw(*x):
        out = 1.0
        for xj, lo, L in zip(x, lows, lengths):
            up = smooth_step((np.asarray(xj) - lo) / ramp)
            down = smooth_step((lo + L - np.asarray(xj)) / ramp)
            out = out * up * down
        return out + 0j

    return raw


def _gaussian(rng, d):
    center = rng.uniform(0.3, 0.7, size=d)
    width = rng.uniform(0.12, 0.3)

    def raw(*x):
        return gaussian_profile(x, center, width) + 0j

    raw.center, raw.width = center, width
    return raw


_BUILDERS = {
    "band-limited": _band_limited,
    "indicator-smooth": _indicator_smooth,
    "gaussian-profile": _gaussian,
}


def random_function(seed: int, kind: str = "band-limited", d: int = 1, resolution: int = 256) -> SampledFunction:
    """A seeded test function on [0, 1]^d with unit trapezoid L^2 norm.

    The returned samples carry an exact evaluator, so the same function can
    be resampled on a finer grid.
    """
    if kind not in _BUILDERS:
        raise DomainError(f"unknown function class {kind!r}; expected one of {FUNCTION_CLASSES}")
    if d not in (1, 2):
        raise DomainError(f"d must be 1 or 2, got {d}")
    rng = np.random.default_rng([int(seed), FUNCTION_CLASSES.index(kind), d])
    raw = _BUILDERS[kind](rng, d)
    probe = SampledFunction.from_callable(raw, ((0.0, 1.0),) * d, resolution)
    scale = 1.0 / probe.norm(2)

    def fn(*x, _raw=raw, _s=scale):
        return _s * _raw(*x)

    for attr in ("center", "width"):
        if hasattr(raw, attr):
            setattr(fn, attr, getattr(raw, attr))
    return SampledFunction(probe.bounds, probe.values * scale, fn)


def resample(g: SampledFunction, resolution) -> SampledFunction:
    if g.fn is None:
        raise DomainError("resampling needs an exact evaluator")
    return SampledFunction.from_callable(g.fn, g.bounds, resolution)


def epsilon_prime(eps: float) -> float:
    """8 eps / (1 - 2 eps); the model norms are measured in L^{2 + eps'}."""
    if not 0 < eps < 0.5:
        raise DomainError(f"epsilon must lie in (0, 0.5), got {eps}")
    return 8 * eps / (1 - 2 * eps)


def array_hash(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()[:16]


class TrigBasis:
    """Tapered trigonometric functions sin^2(pi xi_j) exp(2 pi i k_j xi_j), |k_j| <= K."""

    def __init__(self, d: int = 2, K: int = 1, resolution: int = 64):
        if d not in (1, 2):
            raise DomainError(f"d must be 1 or 2, got {d}")
        self.d, self.K, self.resolution = d, K, resolution
        self.freqs = list(np.ndindex(*(2 * K + 1,) * d))
        self.bounds = ((0.0, 1.0),) * d
        self.elements = [SampledFunction.from_callable(self._element(idx), self.bounds, resolution) for idx in self.freqs]
        W = self.elements[0].weights
        V = np.stack([e.values.ravel() for e in self.elements])
        self.gram = (np.conj(V) * W.ravel()) @ V.T

    def _element(self, idx):
        ks = [i - self.K for i in idx]

        def fn(*x):
            out = 1.0 + 0j
            for kj, xj in zip(ks, x):
                out = out * _taper(xj) * np.exp(2j * np.pi * kj * np.asarray(xj))
            return out

        return fn

    def __len__(self):
        return len(self.elements)

    def coefficients(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return theta[: len(self)] + 1j * theta[len(self):]

    def norm(self, theta) -> float:
        c = self.coefficients(theta)
        return float(np.sqrt(max(np.real(np.conj(c) @ self.gram.T @ c), 0.0)))

    def function(self, theta, resolution: int | None = None) -> SampledFunction:
        c = self.coefficients(theta)
        fns = [e.fn for e in self.elements]

        def fn(*x, _c=c, _fns=fns):
            return sum(ci * f(*x) for ci, f in zip(_c, _fns))

        res = resolution or self.resolution
        return SampledFunction.from_callable(fn, self.bounds, res)


@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    restarts: int = 5
    iterations: int = 200
    epsilon: float = 0.125
    fd_step: float = 1e-4
    probes: int = 8
    initial_step: float = 0.25
    min_step: float = 1e-6
    rtol: float = 1e-9

    def __post_init__(self):
        epsilon_prime(self.epsilon)
        if self.restarts < 1 or self.iterations < 0:
            raise DomainError("restarts must be positive and iterations nonnegative")

    @property
    def q(self) -> float:
        return 2.0 + epsilon_prime(self.epsilon)


class _Objective:
    """Scale-invariant objective over real parameter vectors."""

    size: int

    def __call__(self, theta) -> float:
        raise NotImplementedError

    def normalize(self, theta) -> np.ndarray:
        raise NotImplementedError


class strichartz_objective(_Objective):
    """||extend(f)||_q on a box over ||f||_2, for f in the span of a trig basis.

    The extensions of the basis functions are computed once, so one
    evaluation is a linear combination and a power sum.
    """

    def __init__(self, q: float, box, basis: TrigBasis, method: str = "fft"):
        from .extension import extend

        self.q, self.box, self.basis = q, box, basis
        self.size = 2 * len(basis)
        self.images = np.stack([extend(e, box, method).values for e in basis.elements])
        wx = box.spatial_weights()
        w = wx if basis.d == 1 else np.multiply.outer(wx, wx)
        self.weights = np.multiply.outer(w, box.time_weights())

    def field(self, theta) -> np.ndarray:
        c = self.basis.coefficients(theta)
        return np.tensordot(c, self.images, axes=1)

    def __call__(self, theta) -> float:
        n = self.basis.norm(theta)
        if n == 0:
            return 0.0
        F = self.field(theta)
        return float(np.sum(self.weights * np.abs(F) ** self.q) ** (1 / self.q) / n)

    def normalize(self, theta):
        return np.asarray(theta, dtype=float) / self.basis.norm(theta)

    def functions(self, theta, resolution=None):
        return (self.basis.function(self.normalize(theta), resolution),)


class model_norm_objective(_Objective):
    """||T~_{k1,k2}(f, g)||_q over ||f||_2 ||g||_2 with f, g in a trig basis span.

    Coefficient tables of the basis functions are computed once; the model
    is bilinear, so tables of f and g are linear combinations of them.
    """

    def __init__(self, k1: int, k2: int, q: float, trunc, basis: TrigBasis, sharp: int = 0, spec=None,
                 class_offset: int = 2):
        from . import model as mdl
        from .bumps import BumpSpec

        spec = spec or BumpSpec()
        self.q, self.basis, self.trunc, self.sharp = q, basis, trunc, sharp
        B = len(basis)
        self.size = 4 * B
        setups = [mdl._setup(e, e, k1, k2, trunc, spec, class_offset, sharp) for e in basis.elements]
        s0 = setups[0]
        self.empty = not (s0.pairs1 and s0.pairs2)
        self.a = np.stack([s.a for s in setups])
        self.b = np.stack([s.b for s in setups])
        self.mats = [(d, mdl._products(s0, d[0], d[1], trunc.N, sharp)) for d in mdl._offsets(sharp)]
        self.m_lengths = trunc.m_lengths
        self.W = np.multiply.outer(trunc.x_weights, trunc.x_weights)
        self._mdl = mdl

    def split(self, theta):
        theta = np.asarray(theta, dtype=float)
        h = self.size // 2
        return theta[:h], theta[h:]

    def field(self, theta) -> np.ndarray:
        tf, tg = self.split(theta)
        cf, cg = self.basis.coefficients(tf), self.basis.coefficients(tg)
        a = np.tensordot(cf, self.a, axes=1)
        b = np.tensordot(cg, self.b, axes=1)
        nx = self.W.shape[0]
        out = np.zeros((a.shape[0], nx, nx), dtype=complex)
        if self.empty:
            return out
        for (d1, d2), (P1, P2) in self.mats:
            bs = self._mdl._shift(b, d1, d2)
            for i in range(a.shape[0]):
                out[i] += P1.T @ self._mdl._term_matrix(a[i], bs[i]) @ P2
        return out

    def __call__(self, theta) -> float:
        tf, tg = self.split(theta)
        nf, ng = self.basis.norm(tf), self.basis.norm(tg)
        if nf == 0 or ng == 0:
            return 0.0
        F = self.field(theta)
        power = sum(L * float(np.sum(self.W * np.abs(v) ** self.q)) for L, v in zip(self.m_lengths, F))
        return power ** (1 / self.q) / (nf * ng)

    def normalize(self, theta):
        tf, tg = self.split(theta)
        return np.concatenate([tf / self.basis.norm(tf), tg / self.basis.norm(tg)])

    def functions(self, theta, resolution=None):
        tf, tg = self.split(self.normalize(theta))
        return self.basis.function(tf, resolution), self.basis.function(tg, resolution)


def _fd_steps(theta: np.ndarray, rel: float) -> np.ndarray:
    scale = max(float(np.max(np.abs(theta))), 1e-12)
    return rel * np.maximum(np.abs(theta), 1e-2 * scale)


def finite_difference_gradient(obj: Callable, theta, rel: float = 1e-4, value: float | None = None) -> np.ndarray:
    """Forward differences with steps rel * max(|theta_i|, 0.01 max|theta|)."""
    theta = np.asarray(theta, dtype=float)
    v0 = obj(theta) if value is None else value
    h = _fd_steps(theta, rel)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        e = theta.copy()
        e[i] += h[i]
        grad[i] = (obj(e) - v0) / h[i]
    return grad


def gradient_check(obj: Callable, theta, grad: np.ndarray, rng, coords: int = 10, rel: float = 1e-4) -> float:
    """Worst relative gap between forward and central differences on random coordinates.

    The gap is measured against max(|central_i|, 0.1 * max_j |central_j|) so
    that coordinates with a vanishing derivative do not dominate.
    """
    theta = np.asarray(theta, dtype=float)
    h = _fd_steps(theta, rel)
    pick = rng.choice(theta.size, size=min(coords, theta.size), replace=False)
    central = np.empty(pick.size)
    for j, i in enumerate(pick):
        up, dn = theta.copy(), theta.copy()
        up[i] += h[i]
        dn[i] -= h[i]
        central[j] = (obj(up) - obj(dn)) / (2 * h[i])
    floor = max(0.1 * float(np.max(np.abs(central))), 1e-300)
    return float(np.max(np.abs(grad[pick] - central) / np.maximum(np.abs(central), floor)))


@dataclass
class AscentResult:
    value: float
    theta: np.ndarray
    traces: list  # one list of objective values per restart
    probe_values: list  # values of the random starting probes, per restart
    restart_values: list
    gradient_errors: list = field(default_factory=list)
    seed: int = 0

    @property
    def argmax_hash(self) -> str:
        return array_hash(self.theta)


def _check(v: float, where: str) -> float:
    if not np.isfinite(v):
        from .errors import SearchAborted

        raise SearchAborted(f"objective is not finite ({v}) at {where}; the sampling grid is probably too coarse")
    return v


def ascend(obj: _Objective, theta0, cfg: SearchConfig, rng=None) -> tuple[float, np.ndarray, list, list]:
    """Backtracking gradient ascent; returns (value, theta, trace, gradient errors).

    Every accepted step strictly increases the objective, so traces are
    monotone. The parameter vector is renormalized after every step.
    """
    theta = obj.normalize(theta0)
    v = _check(obj(theta), "start")
    trace = [v]
    errs = []
    step = cfg.initial_step
    for it in range(cfg.iterations):
        grad = finite_difference_gradient(obj, theta, cfg.fd_step, v)
        if not np.all(np.isfinite(grad)):
            _check(float("nan"), f"gradient, iteration {it}")
        if rng is not None and it == 0:
            errs.append(gradient_check(obj, theta, grad, rng, rel=cfg.fd_step))
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0:
            break
        direction = grad / gnorm * np.linalg.norm(theta)
        s = step
        accepted = False
        while s >= cfg.min_step:
            cand = obj.normalize(theta + s * direction)
            vc = _check(obj(cand), f"iteration {it}")
            if vc > v:
                accepted = True
                break
            s /= 2
        if not accepted:
            break
        gain = vc - v
        theta, v = cand, vc
        trace.append(v)
        step = min(2 * s, 1.0)
        if gain <= cfg.rtol * abs(v):
            break
    return v, theta, trace, errs


def ascend_ratio(obj: _Objective, cfg: SearchConfig) -> AscentResult:
    """Best value over restarts; each restart starts from its best random probe."""
    best_v, best_theta = -np.inf, None
    traces, probes, finals, errs = [], [], [], []
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, r])
        cands = rng.normal(size=(cfg.probes, obj.size))
        vals = [_check(obj(c), f"probe {j} of restart {r}") for j, c in enumerate(cands)]
        start = cands[int(np.argmax(vals))]
        v, theta, trace, e = ascend(obj, start, cfg, rng)
        traces.append(trace)
        probes.append(vals)
        finals.append(v)
        errs.extend(e)
        if v > best_v:
            best_v, best_theta = v, theta
    return AscentResult(float(best_v), best_theta, traces, probes, finals, errs, cfg.seed)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    residuals: tuple

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.residuals))))


def decay_fit(points: Sequence[tuple[float, float]]) -> DecayFit:
    """Least-squares line through (k, log2 value)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DomainError("a decay fit needs at least three points")
    k, v = pts[:, 0], pts[:, 1]
    if np.any(v <= 0):
        raise DomainError("decay fit values must be positive")
    y = np.log2(v)
    A = np.column_stack([k, np.ones_like(k)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (slope * k + intercept)
    return DecayFit(float(slope), float(intercept), tuple(float(r) for r in res))
