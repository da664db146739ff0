"""Step-centric walk engine: Gather, Move, Update.

A walk program is a pair of numba-jitted user functions plus a couple of
hyperparameters::

    weight(G, P, path, plen, state, v, e) -> float   # relative chance of edge e
    update(G, P, path, plen, state, e, rng, q) -> bool  # True terminates the walk

``G`` is ``Graph.kernel_view()`` (offsets, neighbors, weights, labels) and
``P`` is the program's ``(fparams, iparams)`` tuple. ``path[:plen]`` is the
walk so far and ``v = path[plen - 1]`` its current vertex; static
preprocessing calls ``weight`` with ``plen == 0`` (the null query). ``state``
is the walker's float64 scratch row. ``update`` may draw from the walker's
own stream through ``rng.uniform_real(rng, q, b)`` and friends.

Execution flows, chosen from the walker type and sampler:

* NAIVE                 -- no Gather, uniform pick
* ITS/ALIAS/REJ, static -- per-vertex tables built once by preprocessing
* ITS/ALIAS/REJ, dynamic-- Gather at every step
* O_REJ                 -- no Gather; weights computed on demand under MaxWeight
"""
import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numba import cfunc, njit, types
from numba.core.ccallback import CFunc
from numba.core.errors import TypingError

from . import sampler as smp
from .errors import (ConfigurationError, NonterminatingSamplerError,
                     ProgramContractError)
from .rng import RngStream, seed_streams
from .sampler import SamplerKind

COMPLETE = 0
DEAD_END = 1
STATUS_NAMES = ("complete", "dead_end")

FLOW_NAIVE = 0
FLOW_TABLE = 1
FLOW_GATHER = 2
FLOW_OREJ = 3

_ITS = int(SamplerKind.ITS)
_ALIAS = int(SamplerKind.ALIAS)
_REJ = int(SamplerKind.REJ)

# relative slack allowed when checking weights against MaxWeight
BOUND_SLACK = 1e-12


def _ro(dtype):
    return types.Array(dtype, 1, "C", readonly=True)


GRAPH_TYPE = types.Tuple((_ro(types.int64), _ro(types.uint32), _ro(types.float64),
                          _ro(types.uint32)))
PARAMS_TYPE = types.Tuple((types.float64[::1], types.int64[::1]))
PATH_TYPE = types.Array(types.int64, 1, "A")
STATE_TYPE = types.Array(types.float64, 1, "A")
WEIGHT_SIG = types.float64(GRAPH_TYPE, PARAMS_TYPE, PATH_TYPE, types.int64, STATE_TYPE,
                           types.int64, types.int64)
UPDATE_SIG = types.boolean(GRAPH_TYPE, PARAMS_TYPE, PATH_TYPE, types.int64, STATE_TYPE,
                           types.int64, types.uint64[::1], types.int64)


def _compiled(fn, sig):
    if isinstance(fn, CFunc):
        return fn
    py = getattr(fn, "py_func", fn)
    try:
        return _compile(py, sig, cache=True)
    except RuntimeError:
        # no cache locator (REPL, notebook, stdin): compile uncached
        return _compile(py, sig, cache=False)


def _compile(py, sig, cache):
    # Without reference counting, every array pulled out of the graph tuple
    # skips an atomic incref/decref pair; that is most of the cost of a small
    # weight function. Functions that allocate need it and fall back.
    try:
        return cfunc(sig, cache=cache, _nrt=False)(py)
    except TypingError:
        return cfunc(sig, cache=cache)(py)


def weight_function(fn):
    """Compile ``fn(G, P, path, plen, state, v, e) -> float`` for the engine."""
    return _compiled(fn, WEIGHT_SIG)


def update_function(fn):
    """Compile ``fn(G, P, path, plen, state, e, rng, q) -> bool`` for the engine."""
    return _compiled(fn, UPDATE_SIG)


class WalkerType(enum.IntEnum):
    UNBIASED = 0
    STATIC = 1
    DYNAMIC = 2

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        return cls[str(name).strip().upper()]


def default_sampler(walker_type):
    return {WalkerType.UNBIASED: SamplerKind.NAIVE,
            WalkerType.STATIC: SamplerKind.ALIAS,
            WalkerType.DYNAMIC: SamplerKind.ITS}[WalkerType.parse(walker_type)]


@dataclass(frozen=True)
class WalkProgram:
    """A walk algorithm expressed as Weight/Update (and MaxWeight for O-REJ).

    ``max_weight`` takes the graph and returns an upper bound on every value
    ``weight`` can produce. ``max_length`` (vertices, 0 = unbounded) stops a
    walk before a move is attempted, which lets a one-vertex target length
    work without an Update call. ``check_graph`` rejects graphs the program
    cannot run on.
    """

    weight: Callable
    update: Callable
    walker_type: WalkerType
    sampler: Optional[SamplerKind] = None
    max_weight: Optional[Callable] = None
    fparams: np.ndarray = field(default_factory=lambda: np.zeros(1))
    iparams: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    state_width: int = 0
    max_length: int = 0
    check_graph: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "weight", weight_function(self.weight))
        object.__setattr__(self, "update", update_function(self.update))
        object.__setattr__(self, "walker_type", WalkerType.parse(self.walker_type))
        if self.sampler is not None:
            object.__setattr__(self, "sampler", SamplerKind.parse(self.sampler))
        object.__setattr__(self, "fparams", np.array(self.fparams, dtype=np.float64, ndmin=1))
        object.__setattr__(self, "iparams", np.array(self.iparams, dtype=np.int64, ndmin=1))

    @property
    def sampling_method(self):
        return default_sampler(self.walker_type) if self.sampler is None else self.sampler

    @property
    def params(self):
        return (self.fparams, self.iparams)

    def with_sampler(self, kind):
        from dataclasses import replace
        return replace(self, sampler=None if kind is None else SamplerKind.parse(kind))


def validate(g, prog):
    """Raise ConfigurationError for program/sampler combinations that cannot run."""
    kind = prog.sampling_method
    if kind is SamplerKind.NAIVE and prog.walker_type is not WalkerType.UNBIASED:
        raise ConfigurationError(
            f"NAIVE sampling requires an unbiased program, {prog.name} is "
            f"{prog.walker_type.name.lower()}")
    if kind is SamplerKind.O_REJ:
        if prog.max_weight is None:
            raise ConfigurationError(f"O_REJ needs a MaxWeight function ({prog.name} has none)")
        bound = float(prog.max_weight(g))
        if not (np.isfinite(bound) and bound > 0):
            raise ConfigurationError(f"MaxWeight must be positive and finite, got {bound}")
    if prog.check_graph is not None:
        prog.check_graph(g)


def flow_for(prog, preprocess=True):
    kind = prog.sampling_method
    if kind is SamplerKind.NAIVE:
        return FLOW_NAIVE
    if kind is SamplerKind.O_REJ:
        return FLOW_OREJ
    if preprocess and prog.walker_type is not WalkerType.DYNAMIC:
        return FLOW_TABLE
    return FLOW_GATHER


# ----------------------------------------------------------------- queries

@dataclass(frozen=True)
class QuerySpec:
    """Where walks start: ``sources[i]`` is the start vertex of query ``i``."""

    mode: str
    source: int = 0
    count: int = 1
    path: Optional[str] = None

    @classmethod
    def one_per_vertex(cls, per_vertex=1):
        return cls("one_per_vertex", count=per_vertex)

    @classmethod
    def from_source(cls, v, n):
        return cls("n_from_source", source=int(v), count=int(n))

    @classmethod
    def from_file(cls, path):
        return cls("from_file", path=str(path))

    def sources(self, g):
        n = g.vertex_count
        if self.mode == "one_per_vertex":
            src = np.repeat(np.arange(n, dtype=np.int64), self.count)
        elif self.mode == "n_from_source":
            src = np.full(self.count, self.source, dtype=np.int64)
        elif self.mode == "from_file":
            src = _read_sources(self.path)
        else:
            raise ConfigurationError(f"unknown query mode {self.mode!r}")
        if src.size and (src.min() < 0 or src.max() >= n):
            raise ConfigurationError(f"query source out of range [0, {n})")
        return src


def _read_sources(path):
    """Lines of ``vertex [count]``; ``#`` starts a comment."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        try:
            v = int(line[0])
            c = int(line[1]) if len(line) > 1 else 1
        except ValueError:
            raise ConfigurationError(f"{path}:{lineno}: bad query line {raw!r}") from None
        out.extend([v] * c)
    return np.asarray(out, dtype=np.int64)


# ------------------------------------------------------------------ output

@dataclass(eq=False)
class WalkSet:
    """All walk paths of a run, indexed by query id."""

    offsets: np.ndarray
    vertices: np.ndarray
    status: np.ndarray
    blocks: tuple = ()
    preprocess_seconds: float = 0.0
    execute_seconds: float = 0.0
    trials: int = 0
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return self.status.size

    def path(self, q):
        return self.vertices[self.offsets[q]:self.offsets[q + 1]]

    def paths(self):
        return [self.path(q) for q in range(len(self))]

    @property
    def lengths(self):
        return np.diff(self.offsets)

    @property
    def total_steps(self):
        return int(self.vertices.size - len(self))

    @property
    def mean_steps(self):
        return self.total_steps / len(self) if len(self) else 0.0

    @property
    def throughput(self):
        return self.total_steps / self.execute_seconds if self.execute_seconds > 0 else float("inf")

    def records(self):
        for q in range(len(self)):
            yield q, STATUS_NAMES[self.status[q]], self.path(q)

    def same_walks(self, other):
        return (np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.status, other.status))


def assemble(parts, blocks):
    """Concatenate per-block ``(vertices, lengths, status)`` in block order."""
    lengths = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64)
    offsets = np.zeros(lengths.size + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    vertices = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    status = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0, np.uint8)
    return WalkSet(offsets, vertices, status, tuple(blocks))


def partition(n, workers):
    """Contiguous, near-equal query blocks ``[(lo, hi), ...]``."""
    workers = max(1, min(int(workers), max(n, 1)))
    cuts = np.linspace(0, n, workers + 1).round().astype(np.int64)
    return [(int(cuts[i]), int(cuts[i + 1])) for i in range(workers)]


# ----------------------------------------------------------- jitted helpers

@njit(cache=True)
def grow(buf, need):
    size = buf.size * 2
    while size < need:
        size *= 2
    out = np.empty(size, dtype=buf.dtype)
    out[:buf.size] = buf
    return out


@njit(cache=True)
def max_degree(offsets):
    m = 1
    for v in range(offsets.size - 1):
        m = max(m, offsets[v + 1] - offsets[v])
    return m


@njit(cache=True)
def new_tables(sampler, entries, slots, alias_weights=True):
    """Scratch tables: ``entries`` edge-aligned cells and ``slots`` per-context cells.

    Layout: (cumulative, alias prob, alias pairs, weights, max weight, total).
    """
    ne_cum = entries if sampler == _ITS else 0
    ne_prob = entries if sampler == _ALIAS else 0
    ne_w = entries if (sampler == _REJ or (sampler == _ALIAS and alias_weights)) else 0
    return (np.empty(ne_cum), np.empty(ne_prob), np.empty((ne_prob, 2), dtype=np.int32),
            np.empty(ne_w), np.zeros(slots), np.zeros(slots))


@njit(cache=True)
def gather_into(G, P, weight_fn, sampler, T, base, slot, path, plen, state, v, lo, d,
                small, large):
    """Weights of every edge leaving ``v`` plus sampler initialization.

    Writes tables at ``base`` and the per-context total / maximum at
    ``slot``. Returns False when every weight is zero (a dead end).
    """
    cum, prob, alias, w, pstar, total = T
    acc = 0.0
    top = 0.0
    for j in range(d):
        x = weight_fn(G, P, path, plen, state, v, lo + j)
        if not (x >= 0.0) or x == np.inf:
            raise ProgramContractError("Weight returned a negative or non-finite value")
        acc += x
        if x > top:
            top = x
        if sampler == _ITS:
            cum[base + j] = acc
        else:
            w[base + j] = x
    total[slot] = acc
    pstar[slot] = top
    if acc <= 0.0:
        return False
    if sampler == _ALIAS:
        smp.alias_fill(w, base, d, acc, prob, alias, base, small, large)
    return True


@njit(inline="always")
def pick_from_tables(sampler, T, base, slot, d, rng, q, cap):
    """Generation phase over prepared tables; (-1, 0) marks a dead end."""
    cum, prob, alias, w, pstar, total = T
    if total[slot] <= 0.0:
        return -1, 0
    if sampler == _ITS:
        return smp.its_pick(cum, base, d, rng, q), 0
    if sampler == _ALIAS:
        return smp.alias_pick(prob, alias, base, d, rng, q), 0
    x, trials = smp.rej_pick(w, base, d, pstar[slot], rng, q, cap)
    if x < 0:
        raise NonterminatingSamplerError("REJ exceeded its trial cap")
    return x, trials


@njit(inline="always")
def soft_cap(d):
    # after this many misses O-REJ checks whether any edge has nonzero weight
    return 64 + 32 * d


@njit(cache=True)
def all_zero(G, P, weight_fn, path, plen, state, v, lo, d):
    for j in range(d):
        if weight_fn(G, P, path, plen, state, v, lo + j) > 0.0:
            return False
    return True


@njit(cache=True)
def orej_accept(G, P, weight_fn, path, plen, state, v, e, y, p_star):
    x = weight_fn(G, P, path, plen, state, v, e)
    if x > p_star * (1.0 + BOUND_SLACK):
        raise ProgramContractError("Weight exceeded MaxWeight under O_REJ")
    if not (x >= 0.0):
        raise ProgramContractError("Weight returned a negative or non-finite value")
    return y < x


@njit(cache=True)
def orej_pick(G, P, weight_fn, path, plen, state, v, lo, d, p_star, rng, q, cap):
    trials = 0
    soft = soft_cap(d)
    while True:
        trials += 1
        x = smp.uniform_int(rng, q, d)
        y = smp.uniform_real(rng, q, p_star)
        if orej_accept(G, P, weight_fn, path, plen, state, v, lo + x, y, p_star):
            return x, trials
        if trials == soft and all_zero(G, P, weight_fn, path, plen, state, v, lo, d):
            return -1, trials
        if trials >= cap:
            raise NonterminatingSamplerError("O_REJ exceeded its trial cap")


@njit(cache=True)
def build_static_tables(G, P, weight_fn, sampler, state_width):
    """Per-vertex sampler initialization over ``weight(null, e)``."""
    offsets = G[0]
    n = offsets.size - 1
    m = offsets[n]
    T = new_tables(sampler, m, n, False)
    cum, prob, alias, w, pstar, total = T
    dmax = 0
    for v in range(n):
        dmax = max(dmax, offsets[v + 1] - offsets[v])
    scratch = np.empty(max(dmax, 1))
    small = np.empty(max(dmax, 1), dtype=np.int64)
    large = np.empty(max(dmax, 1), dtype=np.int64)
    null_path = np.empty(0, dtype=np.int64)
    null_state = np.zeros(state_width)
    for v in range(n):
        lo = offsets[v]
        d = offsets[v + 1] - lo
        acc = 0.0
        top = 0.0
        for j in range(d):
            x = weight_fn(G, P, null_path, 0, null_state, v, lo + j)
            if not (x >= 0.0) or x == np.inf:
                raise ProgramContractError("Weight returned a negative or non-finite value")
            scratch[j] = x
            acc += x
            if x > top:
                top = x
            if sampler == _ITS:
                cum[lo + j] = acc
            elif sampler == _REJ:
                w[lo + j] = x
        total[v] = acc
        pstar[v] = top
        if sampler == _ALIAS and acc > 0.0:
            smp.alias_fill(scratch, 0, d, acc, prob, alias, lo, small, large)
    return T


@njit(nogil=True, cache=True)
def run_block(G, P, weight_fn, update_fn, flow, sampler, T, p_star, sources, qlo, qhi,
              rng, states, max_len, cap):
    """Execute queries ``qlo..qhi-1`` one after another (Gather-Move-Update)."""
    offsets = G[0]
    neighbors = G[1]
    nq = qhi - qlo
    lengths = np.zeros(nq, dtype=np.int64)
    status = np.zeros(nq, dtype=np.uint8)
    out = np.empty(max(64, 8 * nq), dtype=np.int64)
    pos = 0
    # sized once: reallocating inside the loop slows every flow down
    dcap = 1
    if flow == FLOW_GATHER:
        dcap = max_degree(offsets)
    D = new_tables(sampler, dcap, 1)
    small = np.empty(dcap, dtype=np.int64)
    large = np.empty(dcap, dtype=np.int64)
    trials = 0
    for qi in range(nq):
        q = qlo + qi
        if pos + 2 > out.size:
            out = grow(out, pos + 2)
        out[pos] = sources[q]
        plen = 1
        st = COMPLETE
        while max_len <= 0 or plen < max_len:
            v = out[pos + plen - 1]
            lo = offsets[v]
            d = offsets[v + 1] - lo
            if d == 0:
                st = DEAD_END
                break
            if flow == FLOW_NAIVE:
                x = smp.naive_pick(d, rng, q)
            elif flow == FLOW_TABLE:
                x, t = pick_from_tables(sampler, T, lo, v, d, rng, q, cap)
                trials += t
            elif flow == FLOW_GATHER:
                if not gather_into(G, P, weight_fn, sampler, D, 0, 0, out[pos:pos + plen],
                                   plen, states[q], v, lo, d, small, large):
                    st = DEAD_END
                    break
                x, t = pick_from_tables(sampler, D, 0, 0, d, rng, q, cap)
                trials += t
            else:
                x, t = orej_pick(G, P, weight_fn, out[pos:pos + plen], plen, states[q], v,
                                 lo, d, p_star, rng, q, cap)
                trials += t
            if x < 0:
                st = DEAD_END
                break
            e = lo + x
            if pos + plen + 1 > out.size:
                out = grow(out, pos + plen + 1)
            out[pos + plen] = neighbors[e]
            plen += 1
            if update_fn(G, P, out[pos:pos + plen], plen, states[q], e, rng, q):
                break
        lengths[qi] = plen
        status[qi] = st
        pos += plen
    return out[:pos].copy(), lengths, status, trials


# ------------------------------------------------------ static preprocessing

@dataclass(frozen=True)
class StaticTables:
    """Per-vertex sampler state laid out CSR-aligned with the edge array."""

    sampler: SamplerKind
    offsets: np.ndarray
    arrays: tuple

    @property
    def cumulative(self):
        return self.arrays[0]

    @property
    def prob(self):
        return self.arrays[1]

    @property
    def alias(self):
        return self.arrays[2]

    @property
    def p_star(self):
        return self.arrays[4]

    @property
    def total(self):
        return self.arrays[5]

    def state_for(self, v):
        """Sampler state of vertex ``v``, or None for the empty marker."""
        lo, hi = int(self.offsets[v]), int(self.offsets[v + 1])
        if hi == lo or self.total[v] <= 0:
            return None
        if self.sampler is SamplerKind.ITS:
            return smp.ItsState(self.cumulative[lo:hi])
        if self.sampler is SamplerKind.ALIAS:
            return smp.AliasState(self.prob[lo:hi], self.alias[lo:hi])
        return smp.RejState(float(self.p_star[v]))


def preprocess_static(g, prog):
    """Build per-vertex tables for unbiased/static programs; None for NAIVE/O_REJ."""
    kind = prog.sampling_method
    if kind in (SamplerKind.NAIVE, SamplerKind.O_REJ):
        return None
    if prog.walker_type is WalkerType.DYNAMIC:
        raise ConfigurationError("dynamic programs cannot be preprocessed")
    T = build_static_tables(g.kernel_view(), prog.params, prog.weight, int(kind),
                            prog.state_width)
    return StaticTables(kind, g.offsets, T)


def _empty_tables():
    return new_tables(-1, 0, 0)


@dataclass
class RunPlan:
    """Everything a block kernel needs, shared by every worker."""

    G: tuple
    prog: WalkProgram
    flow: int
    sampler: int
    tables: tuple
    p_star: float
    sources: np.ndarray
    rng: np.ndarray
    states: np.ndarray
    max_len: int
    cap: int
    preprocess_seconds: float


def plan_run(g, spec, prog, seed=0, preprocess=True, trial_cap=smp.DEFAULT_TRIAL_CAP):
    validate(g, prog)
    kind = prog.sampling_method
    flow = flow_for(prog, preprocess)
    t0 = time.perf_counter()
    if flow == FLOW_TABLE:
        tables = preprocess_static(g, prog).arrays
    else:
        tables = _empty_tables()
    prep = time.perf_counter() - t0
    sources = spec.sources(g) if isinstance(spec, QuerySpec) else np.asarray(spec, np.int64)
    p_star = float(prog.max_weight(g)) if kind is SamplerKind.O_REJ else 0.0
    seed64 = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return RunPlan(G=g.kernel_view(), prog=prog, flow=flow, sampler=int(kind), tables=tables,
                   p_star=p_star, sources=sources, rng=seed_streams(seed64, 0, sources.size),
                   states=np.zeros((sources.size, prog.state_width)),
                   max_len=int(prog.max_length), cap=int(trial_cap),
                   preprocess_seconds=prep)


def execute(plan, threads, block_fn):
    """Run ``block_fn(plan, lo, hi)`` over contiguous query blocks."""
    blocks = partition(plan.sources.size, threads)
    t0 = time.perf_counter()
    if len(blocks) == 1:
        parts = [block_fn(plan, *blocks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            parts = list(pool.map(lambda b: block_fn(plan, *b), blocks))
    elapsed = time.perf_counter() - t0
    ws = assemble([p[:3] for p in parts], blocks)
    ws.execute_seconds = elapsed
    ws.preprocess_seconds = plan.preprocess_seconds
    ws.trials = int(sum(int(p[3]) for p in parts))
    return ws, parts


def _sequential_block(plan, lo, hi):
    return run_block(plan.G, plan.prog.params, plan.prog.weight, plan.prog.update, plan.flow,
                     plan.sampler, plan.tables, plan.p_star, plan.sources, lo, hi, plan.rng,
                     plan.states, plan.max_len, plan.cap)


def run_sequential(g, spec, prog, threads=1, seed=0, preprocess=True,
                   trial_cap=smp.DEFAULT_TRIAL_CAP):
    """Execute every query step by step, ``threads`` contiguous blocks in parallel.

    The result depends only on (graph, queries, program, seed): each query
    draws from its own stream seeded by ``(seed, query id)``.
    """
    plan = plan_run(g, spec, prog, seed, preprocess, trial_cap)
    ws, _ = execute(plan, threads, _sequential_block)
    return ws


# ---------------------------------------------------- single-walker surface

@dataclass
class Walker:
    """One query, driven step by step through ``gather``/``move``/``update``."""

    id: int
    path: list
    rng: RngStream
    payload: np.ndarray
    status: str = "active"

    @classmethod
    def start(cls, source, query_id=0, seed=0, state_width=0):
        return cls(query_id, [int(source)], RngStream.from_seed(seed, query_id),
                   np.zeros(state_width))

    @property
    def cur(self):
        return self.path[-1]

    def path_array(self):
        return np.asarray(self.path, dtype=np.int64)


@dataclass
class TransitionContext:
    """Weights over the current vertex's edges and the sampler's init output.

    ``state`` is None when every weight is zero (a dead end).
    """

    weights: Optional[np.ndarray]
    state: object


@njit(cache=True)
def _weights_of(G, P, weight_fn, path, plen, state, v):
    lo = G[0][v]
    d = G[0][v + 1] - lo
    out = np.empty(d)
    for j in range(d):
        out[j] = weight_fn(G, P, path, plen, state, v, lo + j)
    return out


@njit(cache=True)
def _orej_single(G, P, weight_fn, path, state, v, p_star, rng, cap):
    lo = G[0][v]
    d = G[0][v + 1] - lo
    return orej_pick(G, P, weight_fn, path, path.size, state, v, lo, d, p_star, rng, 0, cap)


@njit(cache=True)
def _update_single(G, P, update_fn, path, state, e, rng):
    return update_fn(G, P, path, path.size, state, e, rng, 0)


def gather(g, walker, prog):
    kind = prog.sampling_method
    if kind not in (SamplerKind.ITS, SamplerKind.ALIAS, SamplerKind.REJ):
        raise ConfigurationError(f"{kind.name} has no initialization phase to gather for")
    path = walker.path_array()
    w = _weights_of(g.kernel_view(), prog.params, prog.weight, path, path.size,
                    walker.payload, walker.cur)
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ProgramContractError("Weight returned a negative or non-finite value")
    if w.size == 0 or w.sum() <= 0:
        return TransitionContext(w, None)
    init = {SamplerKind.ITS: smp.its_init, SamplerKind.ALIAS: smp.alias_init,
            SamplerKind.REJ: smp.rej_init}[kind]
    return TransitionContext(w, init(w))


def move(g, walker, ctx, prog, trial_cap=smp.DEFAULT_TRIAL_CAP):
    """Select an edge, append its destination and return its edge index.

    Returns None (and marks the walker ``dead_end``) when no edge can be taken.
    """
    kind = prog.sampling_method
    v = walker.cur
    lo = int(g.offsets[v])
    d = g.degree(v)
    if d == 0 or (ctx is not None and ctx.state is None):
        walker.status = "dead_end"
        return None
    if kind is SamplerKind.NAIVE:
        i = smp.naive_generate(d, walker.rng)
    elif kind is SamplerKind.O_REJ:
        path = walker.path_array()
        i, _ = _orej_single(g.kernel_view(), prog.params, prog.weight, path, walker.payload,
                            v, float(prog.max_weight(g)), walker.rng.state, trial_cap)
        if i < 0:
            walker.status = "dead_end"
            return None
    elif ctx is None:
        raise ConfigurationError(f"{kind.name} needs a transition context")
    elif kind is SamplerKind.ITS:
        i = smp.its_generate(ctx.state, walker.rng)
    elif kind is SamplerKind.ALIAS:
        i = smp.alias_generate(ctx.state, walker.rng)
    else:
        i, _ = smp.rej_generate(ctx.weights, ctx.state.p_star, walker.rng, trial_cap=trial_cap)
    e = lo + int(i)
    walker.path.append(int(g.neighbors[e]))
    return e


def update(g, walker, e, prog):
    """Apply the program's Update; returns True when the walk should stop."""
    stop = bool(_update_single(g.kernel_view(), prog.params, prog.update, walker.path_array(),
                               walker.payload, e, walker.rng.state))
    if stop:
        walker.status = "complete"
    return stop


def step(g, walker, prog, tables=None):
    """One Gather-Move-Update step; returns True when the walker finished."""
    if prog.max_length and len(walker.path) >= prog.max_length:
        walker.status = "complete"
        return True
    kind = prog.sampling_method
    ctx = None
    if kind in (SamplerKind.ITS, SamplerKind.ALIAS, SamplerKind.REJ):
        if tables is not None:
            ctx = TransitionContext(None, tables.state_for(walker.cur))
            if kind is SamplerKind.REJ and ctx.state is not None:
                lo, hi = g.offsets[walker.cur], g.offsets[walker.cur + 1]
                ctx.weights = tables.arrays[3][lo:hi]
        elif g.degree(walker.cur) > 0:
            ctx = gather(g, walker, prog)
    e = move(g, walker, ctx, prog)
    if e is None:
        return True
    return update(g, walker, e, prog)


def walk(g, prog, source, query_id=0, seed=0, preprocess=True):
    """Run one query through the step-by-step surface; returns the Walker."""
    validate(g, prog)
    tables = None
    if preprocess and flow_for(prog) == FLOW_TABLE:
        tables = preprocess_static(g, prog)
    w = Walker.start(source, query_id, seed, prog.state_width)
    while not step(g, w, prog, tables):
        pass
    return w
