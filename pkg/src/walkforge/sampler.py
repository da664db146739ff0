"""Discrete-distribution samplers.

Five methods are provided, each split into an initialization phase over a
weight sequence ``P`` and a generation phase that draws one index:

========  =====================  ==========================  ============
method    init                   generate                    draws / call
========  =====================  ==========================  ============
NAIVE     none                   uniform int                 1
ITS       cumulative sums        uniform real + bisection    1
ALIAS     Vose tables (H, A)     uniform int, uniform real   2
REJ       p* = max(P)            (int, real) darts           2 per trial
O_REJ     none (caller's p*)     (int, real) darts           2 per trial
========  =====================  ==========================  ============

The low-level ``*_fill`` / ``*_pick`` kernels write into caller-provided
buffers at an offset so the walk engine can keep per-vertex tables in one
CSR-aligned array. The public functions wrap them with validation.
"""
import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (EmptyDomainError, InvalidDistributionError,
                     NonterminatingSamplerError)
from .rng import RngStream, uniform_int, uniform_real

DEFAULT_TRIAL_CAP = 1 << 20


class SamplerKind(enum.IntEnum):
    NAIVE = 0
    ITS = 1
    ALIAS = 2
    REJ = 3
    O_REJ = 4

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        if key == "OREJ":
            key = "O_REJ"
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown sampling method {name!r}") from None


# ---------------------------------------------------------------- kernels

@njit(inline="always")
def naive_pick(d, states, i):
    return uniform_int(states, i, d)


@njit(cache=True)
def its_fill(weights, src, cum, base, n):
    """Write partial sums of ``weights[src:src+n]`` to ``cum[base:base+n]``."""
    acc = 0.0
    for j in range(n):
        acc += weights[src + j]
        cum[base + j] = acc
    return acc


@njit(inline="always")
def its_search(cum, base, n, x):
    # smallest j with x < cum[base + j]
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if x < cum[base + mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(inline="always")
def its_pick(cum, base, n, states, i):
    x = uniform_real(states, i, cum[base + n - 1])
    return its_search(cum, base, n, x)


@njit(cache=True)
def alias_fill(weights, src, n, total, prob, alias, base, small, large):
    """Vose's alias construction over ``weights[src:src+n]``.

    ``small`` and ``large`` are scratch worklists of length >= n, consumed
    FIFO so that indices are paired in ascending order. Results land in
    ``prob[base:base+n]`` and ``alias[base:base+n, :]`` where column 0 is
    the primary element (always the slot itself) and column 1 the alias
    (-1 when the slot holds a single element).
    """
    scale = n / total
    ns = 0
    nl = 0
    for j in range(n):
        p = weights[src + j] * scale
        prob[base + j] = p
        alias[base + j, 0] = j
        alias[base + j, 1] = -1
        if p < 1.0:
            small[ns] = j
            ns += 1
        else:
            large[nl] = j
            nl += 1
    hs = 0
    hl = 0
    while hs < ns and hl < nl:
        s = small[hs]
        hs += 1
        g = large[hl]
        alias[base + s, 1] = g
        p = (prob[base + g] + prob[base + s]) - 1.0
        prob[base + g] = p
        if p < 1.0:
            hl += 1
            small[ns] = g
            ns += 1
    while hl < nl:
        prob[base + large[hl]] = 1.0
        hl += 1
    # leftovers here are rounding residue of elements with scaled p ~ 1
    while hs < ns:
        s = small[hs]
        prob[base + s] = 1.0
        alias[base + s, 1] = -1
        hs += 1


@njit(inline="always")
def alias_select(prob, alias, base, x, y):
    if y < prob[base + x]:
        return np.int64(alias[base + x, 0])
    return np.int64(alias[base + x, 1])


@njit(inline="always")
def alias_pick(prob, alias, base, n, states, i):
    x = uniform_int(states, i, n)
    y = uniform_real(states, i, 1.0)
    return alias_select(prob, alias, base, x, y)


@njit(cache=True)
def max_fill(weights, src, n):
    m = 0.0
    for j in range(n):
        if weights[src + j] > m:
            m = weights[src + j]
    return m


@njit(cache=True)
def rej_pick(weights, base, n, p_star, states, i, cap):
    """Dart-throwing over ``weights[base:base+n]``; returns (index, trials).

    Returns index -1 when ``cap`` trials all miss.
    """
    trials = 0
    while trials < cap:
        trials += 1
        x = uniform_int(states, i, n)
        y = uniform_real(states, i, p_star)
        if y < weights[base + x]:
            return x, trials
    return -1, trials


# --------------------------------------------------------- batch drivers

@njit(cache=True)
def _batch_naive(n, states, size):
    out = np.empty(size, dtype=np.int64)
    for t in range(size):
        out[t] = naive_pick(n, states, 0)
    return out


@njit(cache=True)
def _batch_its(cum, states, size):
    n = cum.shape[0]
    out = np.empty(size, dtype=np.int64)
    for t in range(size):
        out[t] = its_pick(cum, 0, n, states, 0)
    return out


@njit(cache=True)
def _batch_alias(prob, alias, states, size):
    n = prob.shape[0]
    out = np.empty(size, dtype=np.int64)
    for t in range(size):
        out[t] = alias_pick(prob, alias, 0, n, states, 0)
    return out


@njit(cache=True)
def _batch_rej(weights, p_star, states, size, cap):
    n = weights.shape[0]
    out = np.empty(size, dtype=np.int64)
    trials = np.empty(size, dtype=np.int64)
    for t in range(size):
        x, c = rej_pick(weights, 0, n, p_star, states, 0, cap)
        out[t] = x
        trials[t] = c
    return out, trials


# ------------------------------------------------------------- public API

@dataclass(frozen=True)
class ItsState:
    cumulative: np.ndarray

    @property
    def total(self):
        return float(self.cumulative[-1])


@dataclass(frozen=True)
class AliasState:
    """``prob`` is the table H; ``alias[i] = (first, second)``, second -1 for null."""

    prob: np.ndarray
    alias: np.ndarray

    def reconstruct(self):
        """Per-element probability mass implied by the tables."""
        n = self.prob.shape[0]
        mass = np.zeros(n)
        np.add.at(mass, self.alias[:, 0], self.prob)
        has_second = self.alias[:, 1] >= 0
        np.add.at(mass, self.alias[has_second, 1], 1.0 - self.prob[has_second])
        return mass / n


@dataclass(frozen=True)
class RejState:
    """Envelope for dart throwing; expected trials are ``n * p_star / sum(P)``."""

    p_star: float


def _validated(weights):
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidDistributionError("weights must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidDistributionError("weights must be finite and non-negative")
    if not w.sum() > 0:
        raise InvalidDistributionError("weights sum to zero")
    return w


def _stream(rng):
    if isinstance(rng, RngStream):
        return rng.state
    return rng


def naive_generate(n, rng, size=None):
    if n < 1:
        raise EmptyDomainError("naive sampling needs n >= 1")
    out = _batch_naive(int(n), _stream(rng), 1 if size is None else int(size))
    return int(out[0]) if size is None else out


def its_init(weights):
    w = _validated(weights)
    cum = np.empty_like(w)
    its_fill(w, 0, cum, 0, w.size)
    return ItsState(cum)


def its_generate(state, rng, size=None):
    out = _batch_its(state.cumulative, _stream(rng), 1 if size is None else int(size))
    return int(out[0]) if size is None else out


def its_locate(state, x):
    """Bisection step of ITS for a given uniform point ``x``."""
    return int(its_search(state.cumulative, 0, state.cumulative.size, float(x)))


def alias_init(weights):
    w = _validated(weights)
    n = w.size
    prob = np.empty(n)
    alias = np.empty((n, 2), dtype=np.int32)
    scratch = np.empty(n, dtype=np.int64)
    scratch2 = np.empty(n, dtype=np.int64)
    alias_fill(w, 0, n, w.sum(), prob, alias, 0, scratch, scratch2)
    return AliasState(prob, alias)


def alias_generate(state, rng, size=None):
    out = _batch_alias(state.prob, state.alias, _stream(rng), 1 if size is None else int(size))
    return int(out[0]) if size is None else out


def alias_choose(state, x, y):
    """Generation step of ALIAS for given draws ``x`` (slot) and ``y`` in [0, 1)."""
    return int(alias_select(state.prob, state.alias, 0, int(x), float(y)))


def rej_init(weights):
    w = _validated(weights)
    return RejState(float(w.max()))


def _rej(weights, p_star, rng, size, trial_cap):
    if callable(weights):
        raise TypeError("pass weights as an array; callables are served by the walk engine")
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.size == 0:
        raise EmptyDomainError("rejection sampling over an empty sequence")
    idx, trials = _batch_rej(w, float(p_star), _stream(rng), 1 if size is None else int(size),
                             int(trial_cap))
    if np.any(idx < 0):
        raise NonterminatingSamplerError(
            f"no acceptance within {trial_cap} trials (p*={p_star})")
    if size is None:
        return int(idx[0]), int(trials[0])
    return idx, trials


def rej_generate(weights, p_star, rng, size=None, trial_cap=DEFAULT_TRIAL_CAP):
    """Return ``(index, trials)``; arrays of both when ``size`` is given."""
    return _rej(weights, p_star, rng, size, trial_cap)


def orej_generate(weights, user_p_star, rng, size=None, trial_cap=DEFAULT_TRIAL_CAP):
    """Rejection sampling against a caller-asserted envelope ``user_p_star``.

    No pass over ``weights`` happens; if the envelope is below the true
    maximum the output distribution is silently truncated.
    """
    return _rej(weights, user_p_star, rng, size, trial_cap)


def expected_trials(weights, p_star):
    w = np.asarray(weights, dtype=np.float64)
    return w.size * p_star / w.sum()


def sample(kind, weights, rng, size):
    """Draw ``size`` indices from ``weights`` with method ``kind``.

    NAIVE ignores the weight values and samples uniformly over their count.
    """
    kind = SamplerKind.parse(kind)
    if kind is SamplerKind.NAIVE:
        return naive_generate(len(weights), rng, size)
    if kind is SamplerKind.ITS:
        return its_generate(its_init(weights), rng, size)
    if kind is SamplerKind.ALIAS:
        return alias_generate(alias_init(weights), rng, size)
    if kind is SamplerKind.REJ:
        return rej_generate(weights, rej_init(weights).p_star, rng, size)[0]
    w = _validated(weights)
    return orej_generate(w, float(w.max()), rng, size)[0]
