"""Counter-based random streams, Haar unitaries, GUE matrices and Monte-Carlo reduction.

Every Monte-Carlo routine splits its samples into fixed-size blocks.  Block
``b`` of stream ``(seed, stream_id)`` draws from a Philox generator keyed by
``seed`` and ``stream_id`` with ``b`` in the high word of the counter, so the
values produced are the same whatever the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EmptyInput
from .measures import pairwise_sum

BLOCK_SIZE = 4096
_MASK64 = (1 << 64) - 1
_default_workers = 1


def set_default_workers(n: int) -> None:
    global _default_workers
    _default_workers = max(1, int(n))


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self, block: int = 0) -> np.random.Generator:
        key = (self.seed & _MASK64) | ((self.stream_id & _MASK64) << 64)
        counter = [0, 0, 0, block & _MASK64]
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def child(self, j: int) -> "RngStream":
        """Independent sub-stream ``j`` (distinct ids give distinct keys)."""
        return RngStream(self.seed, ((self.stream_id * 1_000_003) + j + 1) & _MASK64)


def as_stream(stream_or_seed) -> RngStream:
    if isinstance(stream_or_seed, RngStream):
        return stream_or_seed
    return RngStream(int(stream_or_seed))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    seed: int

    def zscore(self, target: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == target else math.inf
        return abs(self.mean - target) / self.stderr

    def agrees(self, target: float, k: float = 4.0, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr + slack

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed}


def mc_reduce(values, seed: int | None = None) -> MCEstimate:
    """Mean and standard error with fixed-order pairwise summation.

    Raises
    ------
    EmptyInput
        If ``values`` is empty.
    """
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n == 0:
        raise EmptyInput("cannot reduce an empty sample")
    mean = pairwise_sum(v) / n
    if n < 2:
        return MCEstimate(mean, 0.0, n, seed)
    var = pairwise_sum((v - mean) ** 2) / (n - 1)
    return MCEstimate(mean, math.sqrt(var / n), n, seed)


def _blocks(samples: int, block_size: int):
    nb = -(-samples // block_size)
    return [(b, min(block_size, samples - b * block_size)) for b in range(nb)]


def mc_blocks(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    samples: int,
    stream: RngStream,
    *,
    workers: int | None = None,
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Evaluate ``fn(rng, n)`` block by block and concatenate the results in block order.

    ``fn`` returns an array whose first axis has length ``n``.
    """
    if samples < 1:
        raise EmptyInput("samples must be positive")
    workers = _default_workers if workers is None else max(1, workers)
    jobs = _blocks(samples, block_size)

    def run(job):
        b, n = job
        return np.asarray(fn(stream.generator(b), n))

    if workers == 1 or len(jobs) == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, jobs))
    return np.concatenate(parts, axis=0)


def mc_map(fn, samples: int, stream: RngStream, *, workers: int | None = None,
           block_size: int = BLOCK_SIZE) -> MCEstimate:
    """Monte-Carlo mean of the per-sample values returned by ``fn(rng, n)``."""
    vals = mc_blocks(fn, samples, stream, workers=workers, block_size=block_size)
    return mc_reduce(vals, stream.seed)


def haar_batch(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar unitaries of size ``N`` as an array ``(count, N, N)``.

    QR of a complex Ginibre matrix, with the columns of Q rephased so that
    the triangular factor has a positive diagonal.
    """
    Z = (rng.standard_normal((count, N, N)) + 1j * rng.standard_normal((count, N, N))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=1, axis2=2)
    ph = d / np.abs(d)
    return Q * ph[:, None, :]


def haar_unitary(N: int, stream: RngStream) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be a positive integer")
    return haar_batch(N, 1, stream.generator(0))[0]


def gue_batch(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """GUE matrices with density proportional to ``exp(-(N/2) tr M^2)``.

    Diagonal entries have variance ``1/N``; real and imaginary parts of
    off-diagonal entries have variance ``1/(2N)`` each.
    """
    s = 1.0 / math.sqrt(N)
    G = s * (rng.standard_normal((count, N, N)) + 1j * rng.standard_normal((count, N, N)))
    H = 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
    idx = np.arange(N)
    H[:, idx, idx] = H[:, idx, idx].real
    return H


def gue_sample(N: int, stream: RngStream) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be a positive integer")
    return gue_batch(N, 1, stream.generator(0))[0]


def gue_eigenvalues(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return np.linalg.eigvalsh(gue_batch(N, count, rng))


def semicircle_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    return 0.5 + (x * np.sqrt(4 - x * x) / 2 + 2 * np.arcsin(x / 2)) / (2 * np.pi)
