"""Young shapes, l-sequences, empirical profiles, Casimir values and corner moves."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import ShapeOverflow, ShapeTooTall
from .measures import DiscreteMeasure

MAX_BOXES = 2**63 - 1


@dataclass(frozen=True, order=True)
class YoungShape:
    """A partition stored as a tuple of positive row lengths (trailing zeros stripped)."""

    parts: tuple[int, ...] = ()

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p < 0 for p in parts):
            raise ValueError("parts must be non-negative")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise ValueError(f"parts {parts} are not weakly decreasing")
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        if sum(parts) > MAX_BOXES:
            raise ShapeOverflow("box count exceeds 2^63 - 1")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def parse(cls, text: str) -> "YoungShape":
        """Read a comma-separated list such as ``"3,1,1"``; the empty string is the empty shape."""
        text = text.strip().strip("()[]")
        if not text:
            return cls(())
        return cls(tuple(int(t) for t in text.split(",") if t.strip()))

    def __str__(self) -> str:
        return ",".join(str(p) for p in self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    @property
    def size(self) -> int:
        """Total number of boxes ``|lambda|``."""
        return sum(self.parts)

    total_boxes = size

    def padded(self, N: int) -> tuple[int, ...]:
        check_fits(self, N)
        return self.parts + (0,) * (N - len(self.parts))

    def conjugate(self) -> "YoungShape":
        if not self.parts:
            return self
        return YoungShape(tuple(sum(1 for p in self.parts if p > j) for j in range(self.parts[0])))


def as_shape(shape) -> YoungShape:
    if isinstance(shape, YoungShape):
        return shape
    if isinstance(shape, str):
        return YoungShape.parse(shape)
    return YoungShape(tuple(shape))


def check_fits(shape: YoungShape, N: int) -> None:
    if N < 1:
        raise ValueError("N must be a positive integer")
    if len(shape.parts) > N:
        raise ShapeTooTall(f"shape {shape} has {len(shape.parts)} rows > N={N}")


@dataclass(frozen=True)
class LSequence:
    """Strictly decreasing non-negative integers ``l_i = lambda_i + N - i``."""

    N: int
    l: tuple[int, ...]

    def __post_init__(self):
        if len(self.l) != self.N:
            raise ValueError("length of l must equal N")
        if self.l and self.l[-1] < 0:
            raise ValueError("l_N must be non-negative")
        if any(self.l[i] - self.l[i + 1] < 1 for i in range(self.N - 1)):
            raise ValueError("l must be strictly decreasing")

    def to_shape(self) -> YoungShape:
        return YoungShape(tuple(li - (self.N - 1 - i) for i, li in enumerate(self.l)))

    def as_array(self) -> np.ndarray:
        return np.array(self.l, dtype=float)


def l_sequence(shape, N: int) -> LSequence:
    shape = as_shape(shape)
    lam = shape.padded(N)
    return LSequence(N, tuple(lam[i] + N - 1 - i for i in range(N)))


def empirical_measure(shape, N: int) -> DiscreteMeasure:
    """Uniform measure on the points ``l_i / N``."""
    l = np.array(l_sequence(shape, N).l, dtype=float)
    return DiscreteMeasure(l / N, np.full(N, 1.0 / N))


def casimir_c2(shape, N: int) -> int:
    """Quadratic Casimir ``sum_i lambda_i (lambda_i + 1 - 2i + N)``."""
    lam = as_shape(shape).padded(N)
    return sum(x * (x + 1 - 2 * (i + 1) + N) for i, x in enumerate(lam))


def casimir_c2_lform(shape, N: int) -> int:
    """Same value written through the l-sequence."""
    l = l_sequence(shape, N).l
    return (
        sum(x * x for x in l)
        - (N - 1) * sum(l)
        + sum((N - i) * (i - 1) for i in range(1, N + 1))
    )


def _partitions(m: int, max_part: int, max_len: int) -> Iterator[tuple[int, ...]]:
    # reverse lexicographic: largest first part first
    if m == 0:
        yield ()
        return
    if max_len == 0:
        return
    for first in range(min(m, max_part), 0, -1):
        for rest in _partitions(m - first, first, max_len - 1):
            yield (first,) + rest


def enumerate_shapes(max_boxes: int, N: int) -> Iterator[YoungShape]:
    """All shapes with at most ``N`` rows and at most ``max_boxes`` boxes, by size."""
    if max_boxes < 0:
        raise ValueError("max_boxes must be non-negative")
    if N < 1:
        raise ValueError("N must be a positive integer")
    for m in range(max_boxes + 1):
        for p in _partitions(m, m, N):
            yield YoungShape(p)


@lru_cache(maxsize=None)
def partition_count(m: int, N: int) -> int:
    """Number of partitions of ``m`` into at most ``N`` parts (standard recurrence)."""
    if m == 0:
        return 1
    if m < 0 or N == 0:
        return 0
    # p_N(m) = p_{N-1}(m) + p_N(m - N)
    return partition_count(m, N - 1) + partition_count(m - N, N)


def addable_rows(lam: Sequence[int], N: int) -> list[int]:
    """Row indices (0-based) where a box can be added without leaving N rows."""
    lam = list(lam) + [0] * (N - len(lam))
    return [i for i in range(N) if i == 0 or lam[i - 1] > lam[i]]


def removable_rows(lam: Sequence[int], N: int) -> list[int]:
    lam = list(lam) + [0] * (N - len(lam))
    return [i for i in range(N) if lam[i] > 0 and (i == N - 1 or lam[i + 1] < lam[i])]


def corner_moves(shape, N: int) -> list[YoungShape]:
    """Shapes reachable by adding or removing a single box, staying within ``N`` rows."""
    shape = as_shape(shape)
    lam = list(shape.padded(N))
    out = []
    for i in addable_rows(lam, N):
        mu = lam.copy()
        mu[i] += 1
        out.append(YoungShape(tuple(mu)))
    for i in removable_rows(lam, N):
        mu = lam.copy()
        mu[i] -= 1
        out.append(YoungShape(tuple(mu)))
    return out


def vandermonde_int(l: Sequence[int]) -> int:
    """Exact ``prod_{i<j} (l_i - l_j)``."""
    out = 1
    for i in range(len(l)):
        for j in range(i + 1, len(l)):
            out *= l[i] - l[j]
    return out
