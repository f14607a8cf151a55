"""Dyadic intervals of [0, 1], close pairs and Whitney covers of the square.

Endpoints are exact binary fractions (``fractions.Fraction``); floats only
appear when a caller asks for them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import DomainError

__all__ = [
    "DyadicInterval",
    "ClosePair",
    "WhitneyCover",
    "DiagonalSplit",
    "interval",
    "parent",
    "is_close",
    "close_pairs",
    "whitney_cover",
    "diagonal_split",
    "cover_overlaps",
    "cover_multiplicity",
]


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """The closed interval [l 2^-k, (l+1) 2^-k]."""

    k: int
    l: int

    def __post_init__(self):
        if self.k < 0:
            raise DomainError(f"scale must be nonnegative, got k={self.k}")
        if not 0 <= self.l < 2**self.k:
            raise DomainError(f"index l={self.l} out of range for scale k={self.k}")

    @property
    def left(self) -> Fraction:
        return Fraction(self.l, 2**self.k)

    @property
    def right(self) -> Fraction:
        return Fraction(self.l + 1, 2**self.k)

    @property
    def length(self) -> Fraction:
        return Fraction(1, 2**self.k)

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.left), float(self.right)

    def contains(self, x) -> bool:
        return self.left <= x <= self.right

    def __str__(self):
        return f"[{self.left}, {self.right}]"


def interval(k: int, l: int) -> DyadicInterval:
    return DyadicInterval(k, l)


def parent(I: DyadicInterval) -> DyadicInterval:
    if I.k == 0:
        raise DomainError("[0, 1] has no parent inside [0, 1]")
    return DyadicInterval(I.k - 1, I.l // 2)


def _closed_disjoint(I: DyadicInterval, J: DyadicInterval) -> bool:
    return I.right < J.left or J.right < I.left


def is_close(I: DyadicInterval, J: DyadicInterval) -> bool:
    """I ~ J: same length, disjoint as closed sets, intersecting parents."""
    if I.k != J.k or I.k == 0:
        return False
    if not _closed_disjoint(I, J):
        return False
    return not _closed_disjoint(parent(I), parent(J))


@dataclass(frozen=True)
class ClosePair:
    first: DyadicInterval
    second: DyadicInterval

    def __post_init__(self):
        if not is_close(self.first, self.second):
            raise DomainError(f"{self.first} and {self.second} are not close")

    @property
    def k(self) -> int:
        return self.first.k

    @property
    def offset(self) -> int:
        """Index difference l2 - l1; one of -3, -2, 2, 3."""
        return self.second.l - self.first.l

    @property
    def gap(self) -> Fraction:
        return (abs(self.offset) - 1) * self.first.length

    def key(self) -> tuple[int, int, int]:
        return self.k, self.first.l, self.second.l

    def rectangle(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return self.first.bounds, self.second.bounds


def close_pairs(k: int) -> list[ClosePair]:
    """All ordered close pairs at scale k, sorted by (l1, l2)."""
    if k < 2:
        return []
    n = 2**k
    out = []
    for l1 in range(n):
        # closeness forces |l1 - l2| in {2, 3}
        for l2 in sorted({l1 - 3, l1 - 2, l1 + 2, l1 + 3}):
            if 0 <= l2 < n and is_close(DyadicInterval(k, l1), DyadicInterval(k, l2)):
                out.append(ClosePair(DyadicInterval(k, l1), DyadicInterval(k, l2)))
    return out


@dataclass
class WhitneyCover:
    max_scale: int
    pairs: dict[int, list[ClosePair]] = field(default_factory=dict)

    def all_pairs(self) -> list[ClosePair]:
        return [p for k in sorted(self.pairs) for p in self.pairs[k]]

    def __len__(self):
        return sum(len(v) for v in self.pairs.values())

    def at_scale(self, k: int) -> list[ClosePair]:
        return list(self.pairs.get(k, []))

    def records(self) -> list[dict]:
        return sorted(
            ({"k": p.k, "l1": p.first.l, "l2": p.second.l} for p in self.all_pairs()),
            key=lambda r: (r["k"], r["l1"], r["l2"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.records(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "WhitneyCover":
        recs = json.loads(text)
        pairs: dict[int, list[ClosePair]] = {}
        for r in recs:
            k = r["k"]
            pairs.setdefault(k, []).append(
                ClosePair(DyadicInterval(k, r["l1"]), DyadicInterval(k, r["l2"]))
            )
        max_scale = max(pairs) if pairs else 2
        return cls(max_scale, pairs)

    def containing(self, x: float, y: float) -> list[ClosePair]:
        """Rectangles (closed) containing the point (x, y)."""
        hits = []
        for p in self.all_pairs():
            (a1, b1), (a2, b2) = p.rectangle()
            if a1 <= x <= b1 and a2 <= y <= b2:
                hits.append(p)
        return hits


def whitney_cover(max_scale: int) -> WhitneyCover:
    """Close pairs of scales 2..max_scale, pruned coarse-to-fine.

    A finer rectangle is dropped when one of its dyadic ancestors is already
    in the cover; dyadic squares of different sizes either nest or have
    disjoint interiors, so this is exactly the interior-overlap test.
    """
    if max_scale < 2:
        raise DomainError(f"max_scale must be >= 2, got {max_scale}")
    kept: set[tuple[int, int, int]] = set()
    pairs: dict[int, list[ClosePair]] = {}
    for k in range(2, max_scale + 1):
        layer = []
        for p in close_pairs(k):
            l1, l2 = p.first.l, p.second.l
            if any((kk, l1 >> (k - kk), l2 >> (k - kk)) in kept for kk in range(2, k)):
                continue
            layer.append(p)
        kept.update(p.key() for p in layer)
        pairs[k] = layer
    return WhitneyCover(max_scale, pairs)


@dataclass
class DiagonalSplit:
    """Sub-collections in which the first interval determines the second."""

    classes: list[list[ClosePair]]
    offsets: list[int]

    def __len__(self):
        return len(self.classes)

    def by_offset(self, offset: int) -> list[ClosePair]:
        return list(self.classes[self.offsets.index(offset)])

    def is_functional(self) -> bool:
        for cls in self.classes:
            fwd: dict = {}
            bwd: dict = {}
            for p in cls:
                if fwd.setdefault(p.first, p.second) != p.second:
                    return False
                if bwd.setdefault(p.second, p.first) != p.first:
                    return False
        return True


def diagonal_split(cover: WhitneyCover | Iterable[ClosePair]) -> DiagonalSplit:
    """Group pairs by the index offset l2 - l1 (the four diagonals)."""
    pairs = cover.all_pairs() if isinstance(cover, WhitneyCover) else list(cover)
    groups: dict[int, list[ClosePair]] = {}
    for p in pairs:
        groups.setdefault(p.offset, []).append(p)
    offsets = sorted(groups)
    return DiagonalSplit([groups[o] for o in offsets], offsets)


def cover_overlaps(cover: WhitneyCover) -> list[tuple[ClosePair, ClosePair]]:
    """Pairs of rectangles whose interiors intersect (exhaustive)."""
    rects = cover.all_pairs()
    bounds = np.array(
        [[float(p.first.left), float(p.first.right), float(p.second.left), float(p.second.right)]
         for p in rects]
    )
    bad = []
    for i in range(len(rects)):
        a = bounds[i]
        rest = bounds[i + 1:]
        hit = (
            (np.minimum(a[1], rest[:, 1]) > np.maximum(a[0], rest[:, 0]))
            & (np.minimum(a[3], rest[:, 3]) > np.maximum(a[2], rest[:, 2]))
        )
        bad.extend((rects[i], rects[i + 1 + j]) for j in np.flatnonzero(hit))
    return bad


def cover_multiplicity(cover: WhitneyCover, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Number of closed cover rectangles containing each point (x[i], y[i])."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    counts = np.zeros(x.shape, dtype=int)
    for p in cover.all_pairs():
        (a1, b1), (a2, b2) = p.rectangle()
        counts += (a1 <= x) & (x <= b1) & (a2 <= y) & (y <= b2)
    return counts
