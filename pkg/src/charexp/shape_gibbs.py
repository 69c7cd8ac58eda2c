"""Metropolis sampling of Young shapes under the weights of the shape large-deviation model.

The weight of a shape with l-sequence ``l`` is

``Delta(l/N)^{a+b} I_N(log A, l/N)^a I_N(log B, l/N)^b exp(N^2 F(mu) - N^2 int c dmu)``

with ``mu`` the empirical measure of ``l/N``.  The chain moves one box at a
time, proposing uniformly among the legal moves with a Hastings correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ComputationError
from .measures import DiscreteMeasure, spectrum_points
from .ratefun import EnsembleSpec, bl_distance
from .sampling import RngStream
from .spherical import hciz_exact
from .tableaux import YoungShape, as_shape, l_sequence

DRIFT_TOL = 1e-6
_CHUNK = 1 << 16


class _Model:
    """Log-weight pieces for a fixed ``N`` and ensemble."""

    def __init__(self, N: int, ens: EnsembleSpec):
        self.N, self.ens = N, ens
        self.ab = ens.a + ens.b
        self.logA = np.log(spectrum_points(ens.mu_A, N)) if ens.a else None
        self.logB = np.log(spectrum_points(ens.mu_B, N)) if ens.b else None
        self.needs_hciz = bool((ens.a and np.ptp(self.logA) > 0) or (ens.b and np.ptp(self.logB) > 0))
        self.F_kind = ens.F.kind

    def c_term(self, v):
        """``-N c(v/N)`` for a single row value ``v``."""
        return -self.N * float(self.ens.c(v / self.N))

    def vandermonde(self, l: np.ndarray) -> float:
        N = self.N
        i, j = np.triu_indices(N, 1)
        return float(np.sum(np.log((l[i] - l[j]) / N)))

    def hciz_part(self, l: np.ndarray) -> float:
        e = np.sort(l / self.N)
        out = 0.0
        for w, logM in ((self.ens.a, self.logA), (self.ens.b, self.logB)):
            if w:
                out += w * hciz_exact(logM, e, ties="perturb").log_value
        return out

    def F_part(self, l: np.ndarray) -> float:
        if self.F_kind == "zero":
            return 0.0
        mu = DiscreteMeasure.uniform(l / self.N)
        return self.N**2 * self.ens.F.value(mu)

    def full(self, l: np.ndarray) -> float:
        v = sum(self.c_term(x) for x in l)
        if self.ab:
            v += self.ab * self.vandermonde(l)
            v += self.hciz_part(l)
        return v + self.F_part(l)

    def delta(self, l: np.ndarray, i: int, step: int) -> float:
        """Change of log-weight when ``l_i -> l_i + step``."""
        old, new = l[i], l[i] + step
        d = self.c_term(new) - self.c_term(old)
        if self.ab:
            others = np.delete(l, i)
            d += self.ab * float(np.sum(np.log(np.abs(new - others)) - np.log(np.abs(old - others))))
        if self.needs_hciz or self.F_kind != "zero":
            l2 = l.astype(float)
            l2[i] = new
            if self.needs_hciz:
                d += self.hciz_part(l2) - self.hciz_part(l.astype(float))
            d += self.F_part(l2) - self.F_part(l.astype(float))
        if self.ab and not self.needs_hciz:
            d += self._scalar_hciz_delta(step)
        return d

    def _scalar_hciz_delta(self, step: int) -> float:
        # log I_N(c I, E) = N c sum(E); moving one row by step changes sum(E) by step/N
        out = 0.0
        for w, logM in ((self.ens.a, self.logA), (self.ens.b, self.logB)):
            if w:
                out += w * logM[0] * step
        return out


def shape_log_weight(shape, N: int, ens: EnsembleSpec) -> float:
    """Log of the shape weight; see the module docstring."""
    l = np.array(l_sequence(as_shape(shape), N).l, dtype=float)
    return _Model(N, ens).full(l)


class _IndexSet:
    """Set of small integers with O(1) insert, remove and uniform choice."""

    def __init__(self, n: int):
        self.items: list[int] = []
        self.pos = np.full(n, -1, dtype=np.int64)

    def add(self, k: int):
        if self.pos[k] < 0:
            self.pos[k] = len(self.items)
            self.items.append(k)

    def discard(self, k: int):
        p = self.pos[k]
        if p >= 0:
            last = self.items.pop()
            if last != k:
                self.items[p] = last
                self.pos[last] = p
            self.pos[k] = -1

    def __len__(self):
        return len(self.items)


@dataclass
class ChainSummary:
    N: int
    steps: int
    burn_in: int
    accepted: int
    acceptance_rate: float
    final_shape: YoungShape
    final_log_weight: float
    max_drift: float
    split_distance: float
    seed: int
    visits: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "steps": self.steps,
            "burn_in": self.burn_in,
            "accepted": self.accepted,
            "acceptance_rate": self.acceptance_rate,
            "final_shape": str(self.final_shape),
            "final_log_weight": self.final_log_weight,
            "max_drift": self.max_drift,
            "split_chain_distance": self.split_distance,
            "seed": self.seed,
        }


def _legal_count(G: _IndexSet, l: np.ndarray) -> int:
    return 2 * len(G) + 1 + (1 if l[-1] >= 1 else 0)


def _profile(times: dict, N: int, total: float) -> DiscreteMeasure:
    keys = sorted(times)
    w = np.array([times[k] for k in keys], dtype=float)
    return DiscreteMeasure(np.array(keys, dtype=float) / N, w / w.sum())


def metropolis_sample(
    N: int,
    steps: int,
    ens: EnsembleSpec,
    stream: RngStream,
    *,
    burn_in: int | None = None,
    init=None,
    max_boxes: int | None = None,
    validate_every: int = 10_000,
    record_visits: bool = False,
    record_transitions: bool = False,
):
    """Run the shape chain and return its time-averaged profile.

    Parameters
    ----------
    N : number of rows
    steps : total number of proposals, including ``burn_in``
    ens : ensemble defining the weight
    stream : random stream
    burn_in : discarded steps, default ``steps // 5``
    init : starting shape (default empty)
    max_boxes : optional truncation; moves beyond it are rejected
    validate_every : accepted moves between full log-weight recomputations
    record_visits : keep the time spent in each shape
    record_transitions : keep the list of (from, to) shape pairs per step

    Returns
    -------
    summary : ChainSummary
    profile : DiscreteMeasure
        Time average of the empirical measure of ``l/N`` after burn-in.
    acceptance_rate : float
    """
    burn_in = steps // 5 if burn_in is None else burn_in
    if steps < burn_in:
        raise ValueError("steps must be at least burn_in")
    model = _Model(N, ens)
    l = np.array(l_sequence(as_shape(init or ()), N).l, dtype=np.int64)
    logw = model.full(l.astype(float))
    G = _IndexSet(max(N - 1, 1))
    for i in range(N - 1):
        if l[i] - l[i + 1] >= 2:
            G.add(i)
    boxes = int(l.sum() - N * (N - 1) // 2)
    rng = stream.generator(0)
    accepted = 0
    since_check = 0
    max_drift = 0.0
    half = burn_in + (steps - burn_in) // 2
    times = [{}, {}]  # occupancy time per row value, first and second half
    start = {int(v): burn_in for v in l}
    visits: dict = {}
    transitions: list = []
    u_move = u_acc = None
    cur_key = tuple(int(v) for v in l) if (record_visits or record_transitions) else None

    def flush(v, t_end):
        t0 = start[v]
        # split the interval at the half mark
        if t0 < half:
            a = min(t_end, half) - t0
            if a > 0:
                times[0][v] = times[0].get(v, 0.0) + a
        if t_end > half:
            b = t_end - max(t0, half)
            if b > 0:
                times[1][v] = times[1].get(v, 0.0) + b

    for t in range(steps):
        k = t % _CHUNK
        if k == 0:
            u_move = rng.random(_CHUNK)
            u_acc = rng.random(_CHUNK)
        n_x = _legal_count(G, l)
        r = int(u_move[k] * n_x)
        # decode move r: 0 -> add to row 0; 1..2|G| -> gap moves; last -> remove from row N-1
        if r == 0:
            i, step = 0, 1
        elif r <= 2 * len(G):
            g = G.items[(r - 1) >> 1]
            i, step = (g + 1, 1) if (r - 1) & 1 == 0 else (g, -1)
        else:
            i, step = N - 1, -1
        ok = max_boxes is None or boxes + step <= max_boxes
        if ok:
            d = model.delta(l, i, step)
            # legal-move count after the move
            l[i] += step
            changed = []
            for gi in (i - 1, i):
                if 0 <= gi < N - 1:
                    changed.append((gi, G.pos[gi] >= 0))
                    if l[gi] - l[gi + 1] >= 2:
                        G.add(gi)
                    else:
                        G.discard(gi)
            n_y = _legal_count(G, l)
            log_acc = d + math.log(n_x) - math.log(n_y)
            if log_acc >= 0 or u_acc[k] < math.exp(log_acc):
                accepted += 1
                logw += d
                boxes += step
                if t >= burn_in:
                    old = int(l[i] - step)
                    flush(old, t)
                    del start[old]
                    start[int(l[i])] = t
                since_check += 1
                if since_check >= validate_every:
                    exact = model.full(l.astype(float))
                    drift = abs(exact - logw)
                    max_drift = max(max_drift, drift)
                    if drift > DRIFT_TOL * max(1.0, abs(exact)):
                        raise ComputationError(f"incremental log-weight drifted by {drift:.3g}")
                    logw = exact
                    since_check = 0
            else:
                l[i] -= step
                for gi, was in changed:
                    if was:
                        G.add(gi)
                    else:
                        G.discard(gi)
        if t == burn_in - 1:
            start = {int(v): burn_in for v in l}
        if record_visits or record_transitions:
            new_key = tuple(int(v) for v in l)
            if record_transitions:
                transitions.append((cur_key, new_key))
            if record_visits and t >= burn_in:
                visits[new_key] = visits.get(new_key, 0) + 1
            cur_key = new_key
    for v in list(start):
        flush(v, steps)
    total = {}
    for part in times:
        for v, w in part.items():
            total[v] = total.get(v, 0.0) + w
    if not total:
        total = {int(v): 1.0 for v in l}
    profile = _profile(total, N, steps - burn_in)
    split = math.nan
    if times[0] and times[1]:
        split = bl_distance(_profile(times[0], N, 1.0), _profile(times[1], N, 1.0))
    exact = model.full(l.astype(float))
    max_drift = max(max_drift, abs(exact - logw))
    summary = ChainSummary(
        N=N,
        steps=steps,
        burn_in=burn_in,
        accepted=accepted,
        acceptance_rate=accepted / max(1, steps),
        final_shape=_shape_from_l(N, l),
        final_log_weight=exact,
        max_drift=max_drift,
        split_distance=split,
        seed=stream.seed,
        visits={_key_shape(N, k): v for k, v in visits.items()},
    )
    if record_transitions:
        summary.visits["__transitions__"] = [(_key_shape(N, a), _key_shape(N, b)) for a, b in transitions]
    return summary, profile, summary.acceptance_rate


def _shape_from_l(N: int, l) -> YoungShape:
    return YoungShape(tuple(int(l[i]) - (N - 1 - i) for i in range(N)))


def _key_shape(N: int, key) -> YoungShape:
    return _shape_from_l(N, key)


def exact_stationary(N: int, max_boxes: int, ens: EnsembleSpec) -> dict:
    """Normalized weights over all shapes with at most ``max_boxes`` boxes."""
    from .tableaux import enumerate_shapes

    shapes = list(enumerate_shapes(max_boxes, N))
    lw = np.array([shape_log_weight(s, N, ens) for s in shapes])
    p = np.exp(lw - lw.max())
    p /= p.sum()
    return dict(zip(shapes, p.tolist()))


def profile_mass_bound(profile: DiscreteMeasure, N: int) -> float:
    """Largest excess of ``mu([c, d])`` over ``(d - c) + 1/N`` among atom intervals."""
    x, w = profile.positions, profile.weights
    cw = np.concatenate([[0.0], np.cumsum(w)])
    worst = -math.inf
    for i in range(x.size):
        mass = cw[i + 1 :] - cw[i]
        worst = max(worst, float(np.max(mass - (x[i:] - x[i]) - 1.0 / N)))
    return worst
