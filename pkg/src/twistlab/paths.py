"""Killed continuous-time chain simulation, occupation fields and bridges.

A path from x holds at each state for an exponential time with that
state's rate, then jumps along a row of the jump matrix or is killed with
the row's deficit; killing is almost sure.  The occupation field divides
time per state by the reference measure.  The bridge accumulator realises
the local-time-weighted path measure: along each path from x, every stay
at y of length tau contributes ``(1/m_y) * int_0^tau F(field + u e_y / m_y) du``
with ``field`` the running occupation field (plus an optional per-path
offset).  Exponential functionals integrate in closed form; anything else
goes through Gauss-Legendre quadrature with node doubling.

Replication is deterministic: batches have a fixed size and every batch
draws from its own counter-based stream, so identical (seed, count) give
bit-identical results and replicas may run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chain import DualPair, NumericalError
from .functionals import ExpField
from .seeding import rng_stream

__all__ = [
    "OccupationField",
    "PathRecord",
    "bridge_estimate",
    "bridge_values",
    "occupation",
    "occupation_batch",
    "sample_path",
]

BATCH = 1 << 15  # fixed so results depend only on (seed, count)


@dataclass(frozen=True)
class PathRecord:
    """Visited states with holding durations; ``killed`` marks a finite lifetime."""

    states: np.ndarray
    durations: np.ndarray
    killed: bool

    @property
    def visits(self):
        """The path as (state, holding duration) pairs, in visit order."""
        return tuple(zip(self.states.tolist(), self.durations.tolist()))

    @property
    def lifetime(self) -> float:
        return float(self.durations.sum())


@dataclass(frozen=True)
class OccupationField:
    """Local time field l^x = (time at x) / m_x and the total lifetime."""

    l: np.ndarray
    lifetime: float


def sample_path(dp: DualPair, start: int, seed: int, max_jumps: int = 1_000_000) -> PathRecord:
    """Simulate one killed path from ``start``; deterministic given seed."""
    if not 0 <= int(start) < dp.n:
        raise ValueError(f"start state {start} out of range")
    rng = rng_stream(seed, "single-path")
    cum = np.cumsum(dp.pi, axis=1)
    states: list[int] = []
    durations: list[float] = []
    s = int(start)
    for _ in range(max_jumps):
        states.append(s)
        durations.append(rng.exponential(1.0 / dp.q[s]))
        u = rng.random()
        row = cum[s]
        if u >= row[-1]:
            return PathRecord(
                states=np.array(states, dtype=int),
                durations=np.array(durations, dtype=float),
                killed=True,
            )
        s = int(np.searchsorted(row, u, side="right"))
    raise NumericalError("path did not terminate; jump matrix too close to stochastic")


def occupation(dp: DualPair, path: PathRecord) -> OccupationField:
    """Occupation field of a path: holding time per state over m."""
    t = np.zeros(dp.n)
    np.add.at(t, path.states, path.durations)
    return OccupationField(l=t / dp.m, lifetime=path.lifetime)


def occupation_batch(dp: DualPair, start: int, count: int, seed: int):
    """Occupation fields of ``count`` paths from ``start``: (count, n) array, lifetimes."""
    fields = np.empty((count, dp.n))
    lives = np.empty(count)
    cum = np.cumsum(dp.pi, axis=1)
    done = 0
    batch_idx = 0
    while done < count:
        b = min(BATCH, count - done)
        rng = rng_stream(seed, "occupation-batch", batch_idx)
        l, lt = _batch_occupation(dp, cum, int(start), b, rng)
        fields[done : done + b] = l
        lives[done : done + b] = lt
        done += b
        batch_idx += 1
    return fields, lives


def _batch_occupation(dp, cum, start, b, rng):
    state = np.full(b, start, dtype=int)
    alive = np.ones(b, dtype=bool)
    tfield = np.zeros((b, dp.n))
    life = np.zeros(b)
    while alive.any():
        idx = np.flatnonzero(alive)
        s = state[idx]
        tau = rng.exponential(1.0 / dp.q[s])
        tfield[idx, s] += tau
        life[idx] += tau
        u = rng.random(idx.size)
        nxt = (u[:, None] >= cum[s]).sum(axis=1)
        killed = nxt >= dp.n
        state[idx[~killed]] = nxt[~killed]
        alive[idx[killed]] = False
    return tfield / dp.m[None, :], life


@lru_cache(maxsize=None)
def _leggauss(k: int):
    return np.polynomial.legendre.leggauss(k)


def _sojourn_quadrature(functional, fields, taus, y, m_y, tol, max_nodes):
    """(1/m_y) * int_0^tau F(field + u e_y / m_y) du per row, by node doubling."""
    k = 8
    prev = None
    while True:
        nodes, weights = _leggauss(k)
        u = (nodes[None, :] + 1.0) * (taus[:, None] / 2.0)
        pts = np.repeat(fields[:, None, :], k, axis=1)
        pts[:, :, y] += u / m_y
        vals = np.asarray(functional(pts), dtype=float)
        est = (vals @ weights) * (taus / 2.0) / m_y
        if prev is not None:
            err = float(np.max(np.abs(est - prev) / np.maximum(1e-30, np.abs(est))))
            if err < tol or 2 * k > max_nodes:
                return est
        prev = est
        k *= 2


def bridge_values(
    dp: DualPair,
    x: int,
    y: int,
    functional,
    count: int,
    seed: int,
    offsets=None,
    quad_tol: float = 1e-8,
    max_nodes: int = 64,
) -> np.ndarray:
    """Per-path bridge accumulations for ``count`` paths from x weighted at y.

    ``offsets`` (count, n), when given, shifts the field seen by the
    functional path by path; the sample mean is then an unbiased estimator
    of the bridge integral of ``F(l + offset)``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if not (0 <= int(x) < dp.n and 0 <= int(y) < dp.n):
        raise ValueError("states out of range")
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=float)
        if offsets.shape != (count, dp.n):
            raise ValueError(f"offsets must be (count, {dp.n})")
    out = np.empty(count)
    done = 0
    batch_idx = 0
    while done < count:
        b = min(BATCH, count - done)
        rng = rng_stream(seed, "bridge-batch", batch_idx)
        off = None if offsets is None else offsets[done : done + b]
        out[done : done + b] = _batch_bridge(
            dp, int(x), int(y), functional, b, rng, off, quad_tol, max_nodes
        )
        done += b
        batch_idx += 1
    return out


def _batch_bridge(dp, x, y, functional, b, rng, offsets, quad_tol, max_nodes):
    n = dp.n
    cum = np.cumsum(dp.pi, axis=1)
    field = np.zeros((b, n)) if offsets is None else np.array(offsets, dtype=float)
    state = np.full(b, x, dtype=int)
    alive = np.ones(b, dtype=bool)
    acc = np.zeros(b)
    m_y = dp.m[y]
    exp_rate = float(functional.chi[y]) if isinstance(functional, ExpField) else None
    while alive.any():
        idx = np.flatnonzero(alive)
        s = state[idx]
        tau = rng.exponential(1.0 / dp.q[s])
        here = s == y
        if here.any():
            rows = idx[here]
            stay = tau[here]
            if exp_rate is not None:
                base = functional(field[rows])
                if exp_rate > 0:
                    soj = (1.0 - np.exp(-exp_rate * stay)) / (exp_rate * m_y)
                else:
                    soj = stay / m_y
                acc[rows] += base * soj
            else:
                acc[rows] += _sojourn_quadrature(
                    functional, field[rows], stay, y, m_y, quad_tol, max_nodes
                )
        field[idx, s] += tau / dp.m[s]
        u = rng.random(idx.size)
        nxt = (u[:, None] >= cum[s]).sum(axis=1)
        killed = nxt >= n
        state[idx[~killed]] = nxt[~killed]
        alive[idx[killed]] = False
    return acc


def bridge_estimate(dp: DualPair, x: int, y: int, functional, count: int, seed: int):
    """Unbiased bridge-measure estimate of F and its standard error."""
    vals = bridge_values(dp, x, y, functional, count, seed)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(count)) if count > 1 else 0.0
    return mean, se
