"""Immutable CSR graph storage, edge-list loading and the WFG1 binary format.

WFG1 layout (little-endian)::

    magic        4 bytes   b"WFG1"
    vertex_count u64
    edge_count   u64
    flags        u8        bit0: weights present, bit1: labels present
    offsets      u64[vertex_count + 1]
    neighbors    u32[edge_count]
    weights      f64[edge_count]        (if bit0)
    labels       u32[edge_count]        (if bit1)
"""
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

from .errors import GraphBoundsError, GraphFormatError
from .rng import mix64, stream_seed

MAGIC = b"WFG1"
_HEADER = struct.Struct("<4sQQB")
_FLAG_WEIGHTS = 1
_FLAG_LABELS = 2

WEIGHT_LOW, WEIGHT_HIGH = 1.0, 5.0
DEFAULT_NUM_LABELS = 5

# salts separating the weight and label hash streams
_WEIGHT_SALT = 0x5745494748
_LABEL_SALT = 0x4C4142454C


_EMPTY_F8 = np.empty(0, dtype=np.float64)
_EMPTY_F8.setflags(write=False)
_EMPTY_U4 = np.empty(0, dtype=np.uint32)
_EMPTY_U4.setflags(write=False)


@dataclass(frozen=True)
class GraphStats:
    d_avg: float
    d_max: int


@dataclass(frozen=True, eq=False)
class Graph:
    """Directed graph in compressed sparse row form.

    Edges leaving ``v`` occupy ``neighbors[offsets[v]:offsets[v + 1]]``,
    sorted by destination. ``weights`` and ``labels``, when present, are
    aligned with ``neighbors``. ``vertex_ids`` maps dense ids back to the
    ids of the source file when the loader had to remap them.
    """

    offsets: np.ndarray
    neighbors: np.ndarray
    weights: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    vertex_ids: Optional[np.ndarray] = None
    stats: GraphStats = field(init=False)

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        neighbors = np.ascontiguousarray(self.neighbors, dtype=np.uint32)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "neighbors", neighbors)
        if self.weights is not None:
            object.__setattr__(self, "weights",
                               np.ascontiguousarray(self.weights, dtype=np.float64))
        if self.labels is not None:
            object.__setattr__(self, "labels",
                               np.ascontiguousarray(self.labels, dtype=np.uint32))
        for arr in (offsets, neighbors, self.weights, self.labels):
            if arr is not None:
                arr.setflags(write=False)
        self._validate()
        deg = np.diff(offsets)
        n = self.vertex_count
        object.__setattr__(self, "stats", GraphStats(
            d_avg=self.edge_count / n if n else 0.0,
            d_max=int(deg.max()) if n else 0))

    def _validate(self):
        offsets, neighbors = self.offsets, self.neighbors
        if offsets.ndim != 1 or offsets.size < 1:
            raise GraphFormatError("offsets must have vertex_count + 1 entries")
        if offsets[0] != 0 or offsets[-1] != neighbors.size:
            raise GraphFormatError("offsets must start at 0 and end at edge_count")
        if np.any(np.diff(offsets) < 0):
            raise GraphFormatError("offsets must be nondecreasing")
        if neighbors.size and int(neighbors.max()) >= self.vertex_count:
            raise GraphFormatError("neighbor id out of range")
        if self.weights is not None:
            if self.weights.shape != neighbors.shape:
                raise GraphFormatError("weights must align with neighbors")
            if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
                raise GraphFormatError("weights must be finite and non-negative")
        if self.labels is not None and self.labels.shape != neighbors.shape:
            raise GraphFormatError("labels must align with neighbors")

    @property
    def vertex_count(self):
        return self.offsets.size - 1

    @property
    def edge_count(self):
        return self.neighbors.size

    @property
    def degrees(self):
        return np.diff(self.offsets)

    @property
    def max_weight(self):
        if self.weights is None or self.weights.size == 0:
            return 1.0
        return float(self.weights.max())

    @property
    def label_set(self):
        if self.labels is None:
            return frozenset()
        return frozenset(int(x) for x in np.unique(self.labels))

    @property
    def nbytes(self):
        return sum(a.nbytes for a in (self.offsets, self.neighbors, self.weights, self.labels)
                   if a is not None)

    def kernel_view(self):
        """Arrays in the fixed layout the jitted kernels expect."""
        w = self.weights if self.weights is not None else _EMPTY_F8
        lab = self.labels if self.labels is not None else _EMPTY_U4
        return (self.offsets, self.neighbors, w, lab)

    def degree(self, v):
        self._check_vertex(v)
        return int(self.offsets[v + 1] - self.offsets[v])

    def edge_at(self, v, i):
        """``(dst, weight, label)`` of the ``i``-th edge leaving ``v``."""
        d = self.degree(v)
        if not 0 <= i < d:
            raise GraphBoundsError(f"edge offset {i} out of range for vertex {v} (degree {d})")
        e = int(self.offsets[v]) + i
        w = float(self.weights[e]) if self.weights is not None else 1.0
        lab = int(self.labels[e]) if self.labels is not None else None
        return int(self.neighbors[e]), w, lab

    def neighbors_of(self, v):
        self._check_vertex(v)
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def _check_vertex(self, v):
        if not 0 <= v < self.vertex_count:
            raise GraphBoundsError(f"vertex {v} out of range [0, {self.vertex_count})")

    def with_weights(self, weights):
        return Graph(self.offsets, self.neighbors, weights, self.labels, self.vertex_ids)

    def with_labels(self, labels):
        return Graph(self.offsets, self.neighbors, self.weights, labels, self.vertex_ids)

    def equals(self, other):
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.dtype == b.dtype and np.array_equal(a, b)
        return (same(self.offsets, other.offsets) and same(self.neighbors, other.neighbors)
                and same(self.weights, other.weights) and same(self.labels, other.labels))

    def __repr__(self):
        extras = [name for name in ("weights", "labels") if getattr(self, name) is not None]
        return (f"Graph(V={self.vertex_count}, E={self.edge_count}, d_avg={self.stats.d_avg:.2f}, "
                f"d_max={self.stats.d_max}{', ' + '+'.join(extras) if extras else ''})")


def from_edges(src, dst, vertex_count=None, weights=None, labels=None, directed=True):
    """Build a graph from dense integer endpoint arrays.

    Edges are sorted by (source, destination); ties keep input order.
    """
    src = np.asarray(src, dtype=np.int64).ravel()
    dst = np.asarray(dst, dtype=np.int64).ravel()
    if src.shape != dst.shape:
        raise GraphFormatError("source and destination arrays differ in length")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64).ravel()
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64).ravel()
    if not directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        if weights is not None:
            weights = np.concatenate([weights, weights])
        if labels is not None:
            labels = np.concatenate([labels, labels])
    if src.size and min(src.min(), dst.min()) < 0:
        raise GraphFormatError("vertex ids must be non-negative")
    if vertex_count is None:
        vertex_count = int(max(src.max(), dst.max())) + 1 if src.size else 0
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    counts = np.bincount(src, minlength=vertex_count)
    offsets = np.zeros(vertex_count + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return Graph(offsets, dst,
                 None if weights is None else weights[order],
                 None if labels is None else labels[order])


@njit(cache=True)
def _hash_uniform(seed, salt, count):
    key = stream_seed(seed, salt)
    out = np.empty(count)
    for e in range(count):
        z = mix64(key ^ (np.uint64(e) * np.uint64(0x9E3779B97F4A7C15)))
        out[e] = np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return out


def synthetic_weights(edge_count, seed):
    """Per-edge weights uniform in [1, 5); a pure function of (seed, edge index)."""
    u = _hash_uniform(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), _WEIGHT_SALT, edge_count)
    w = WEIGHT_LOW + (WEIGHT_HIGH - WEIGHT_LOW) * u
    # guard the open upper bound against rounding
    return np.minimum(w, np.nextafter(WEIGHT_HIGH, 0.0))


def synthetic_labels(edge_count, k, seed):
    """Per-edge labels uniform over {0, ..., k-1}."""
    if k < 1:
        raise ValueError("need at least one label")
    u = _hash_uniform(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), _LABEL_SALT, edge_count)
    return np.minimum((u * k).astype(np.int64), k - 1).astype(np.uint32)


def _parse_lines(text, want_weight, want_label):
    src, dst, wts, labs = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split()
        if len(cols) < 2 or len(cols) > 4:
            raise GraphFormatError(f"expected 2-4 columns, got {len(cols)}: {raw!r}", lineno)
        try:
            s, d = int(cols[0]), int(cols[1])
        except ValueError:
            raise GraphFormatError(f"vertex ids must be integers: {raw!r}", lineno) from None
        if s < 0 or d < 0:
            raise GraphFormatError(f"vertex ids must be non-negative: {raw!r}", lineno)
        src.append(s)
        dst.append(d)
        if want_weight:
            if len(cols) < 3:
                raise GraphFormatError("weight column missing", lineno)
            try:
                w = float(cols[2])
            except ValueError:
                raise GraphFormatError(f"bad weight {cols[2]!r}", lineno) from None
            if not np.isfinite(w) or w < 0:
                raise GraphFormatError(f"weight must be finite and >= 0, got {cols[2]}", lineno)
            wts.append(w)
        if want_label:
            col = 3 if (want_weight or len(cols) == 4) else 2
            if len(cols) <= col:
                raise GraphFormatError("label column missing", lineno)
            try:
                lab = int(cols[col])
            except ValueError:
                raise GraphFormatError(f"bad label {cols[col]!r}", lineno) from None
            if lab < 0:
                raise GraphFormatError("labels must be non-negative", lineno)
            labs.append(lab)
    return src, dst, wts, labs


def load_edge_list(path, directed=True, weight_mode="none", label_mode="none",
                   num_labels=DEFAULT_NUM_LABELS, seed=0):
    """Read a whitespace-separated ``src dst [weight] [label]`` edge list.

    Parameters
    ----------
    path : str or Path
    directed : bool
        When False every line yields both directions.
    weight_mode : {"none", "from_file", "random"}
        ``random`` draws each weight uniformly from [1, 5).
    label_mode : {"none", "from_file", "random"}
        ``random`` draws labels uniformly from ``{0, ..., num_labels - 1}``.
    seed : int
        Seed for the synthetic weights and labels.

    Input ids need not be dense; they are remapped in ascending order and
    the original ids are kept in ``Graph.vertex_ids`` when they differ.
    The third column is the weight and the fourth the label; a 3-column
    file read with ``label_mode="from_file"`` and no file weights takes
    its label from the third column.
    """
    weight_mode = _mode(weight_mode, "weight")
    label_mode = _mode(label_mode, "label")
    text = Path(path).read_text()
    src, dst, wts, labs = _parse_lines(text, weight_mode == "from_file", label_mode == "from_file")
    if not src:
        raise GraphFormatError(f"{path}: no edges")
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    ids = np.unique(np.concatenate([src, dst]))
    vertex_ids = None
    if ids[-1] != ids.size - 1:
        vertex_ids = ids
        src = np.searchsorted(ids, src)
        dst = np.searchsorted(ids, dst)
    g = from_edges(src, dst, ids.size,
                   weights=wts if weight_mode == "from_file" else None,
                   labels=labs if label_mode == "from_file" else None,
                   directed=directed)
    if weight_mode == "random":
        g = g.with_weights(synthetic_weights(g.edge_count, seed))
    if label_mode == "random":
        g = g.with_labels(synthetic_labels(g.edge_count, num_labels, seed))
    if vertex_ids is not None:
        g = Graph(g.offsets, g.neighbors, g.weights, g.labels, vertex_ids)
    return g


def _mode(mode, what):
    mode = {"uniform_random": "random", "file": "from_file"}.get(mode, mode)
    if mode not in ("none", "from_file", "random"):
        raise ValueError(f"unknown {what} mode {mode!r}")
    return mode


def write_binary(g, path):
    flags = (_FLAG_WEIGHTS if g.weights is not None else 0) | \
            (_FLAG_LABELS if g.labels is not None else 0)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.vertex_count, g.edge_count, flags))
        fh.write(g.offsets.astype("<u8").tobytes())
        fh.write(g.neighbors.astype("<u4").tobytes())
        if g.weights is not None:
            fh.write(g.weights.astype("<f8").tobytes())
        if g.labels is not None:
            fh.write(g.labels.astype("<u4").tobytes())


def read_binary(path):
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise GraphFormatError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < _HEADER.size:
        raise GraphFormatError(f"{path}: truncated header")
    _, n, m, flags = _HEADER.unpack_from(data)
    if flags & ~(_FLAG_WEIGHTS | _FLAG_LABELS):
        raise GraphFormatError(f"{path}: unknown flag bits 0x{flags:02x}")
    sections = [("offsets", "<u8", n + 1), ("neighbors", "<u4", m)]
    if flags & _FLAG_WEIGHTS:
        sections.append(("weights", "<f8", m))
    if flags & _FLAG_LABELS:
        sections.append(("labels", "<u4", m))
    pos = _HEADER.size
    arrays = {}
    for name, dtype, count in sections:
        size = np.dtype(dtype).itemsize * count
        if pos + size > len(data):
            raise GraphFormatError(f"{path}: truncated {name} section")
        arrays[name] = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        pos += size
    if pos != len(data):
        raise GraphFormatError(f"{path}: {len(data) - pos} trailing bytes do not match flags")
    return Graph(arrays["offsets"].astype(np.int64), arrays["neighbors"].astype(np.uint32),
                 arrays.get("weights"), arrays.get("labels"))


def power_law_graph(vertex_count, avg_degree, exponent=2.5, seed=0, directed=False):
    """Chung-Lu style random graph with a power-law expected degree sequence.

    Endpoints are drawn with probability proportional to
    ``(i + 1) ** (-1 / (exponent - 1))``; ids are then shuffled so hubs are
    spread over the id space.
    """
    rng = np.random.default_rng(seed)
    expected = np.arange(1, vertex_count + 1, dtype=np.float64) ** (-1.0 / (exponent - 1.0))
    cdf = np.cumsum(expected)
    cdf /= cdf[-1]
    m = int(round(vertex_count * avg_degree / (1 if directed else 2)))
    perm = rng.permutation(vertex_count)
    src = perm[np.minimum(np.searchsorted(cdf, rng.random(m), side="right"), vertex_count - 1)]
    dst = perm[np.minimum(np.searchsorted(cdf, rng.random(m), side="right"), vertex_count - 1)]
    return from_edges(src, dst, vertex_count, directed=directed)


def uniform_random_graph(vertex_count, avg_degree, seed=0, directed=False):
    rng = np.random.default_rng(seed)
    m = int(round(vertex_count * avg_degree / (1 if directed else 2)))
    src = rng.integers(0, vertex_count, m)
    dst = rng.integers(0, vertex_count, m)
    return from_edges(src, dst, vertex_count, directed=directed)
