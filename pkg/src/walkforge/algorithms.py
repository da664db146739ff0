"""Built-in walk programs: PPR, DeepWalk, Node2Vec, MetaPath and a uniform walk."""
from dataclasses import dataclass

import numpy as np
from numba import njit

from .engine import WalkerType, WalkProgram, update_function, weight_function
from .errors import ConfigurationError
from .rng import uniform01
from .sampler import SamplerKind


@weight_function
def unit_weight(G, P, path, plen, state, v, e):
    return 1.0


@weight_function
def edge_weight(G, P, path, plen, state, v, e):
    return G[2][e]


@update_function
def length_reached(G, P, path, plen, state, e, rng, q):
    return plen >= P[1][0]


# ---------------------------------------------------------------------- PPR

@update_function
def ppr_update(G, P, path, plen, state, e, rng, q):
    return uniform01(rng, q) < P[0][0]


def ppr_program(termination_prob=0.2, sampler=None):
    """Unbiased walk that stops after each move with ``termination_prob``.

    Expected steps per walk are ``1 / termination_prob``.
    """
    if not 0.0 < termination_prob <= 1.0:
        raise ValueError(f"termination probability must be in (0, 1], got {termination_prob}")
    return WalkProgram(unit_weight, ppr_update, WalkerType.UNBIASED, sampler,
                       max_weight=lambda g: 1.0, fparams=[termination_prob], name="ppr")


# ----------------------------------------------------------------- DeepWalk

def deepwalk_program(target_length=80, weighted=False, sampler=None):
    """Static walk of ``target_length`` vertices; transition weight is w_e or 1."""
    if target_length < 1:
        raise ValueError("target length must be at least 1")
    if weighted:
        return WalkProgram(edge_weight, length_reached, WalkerType.STATIC, sampler,
                           max_weight=lambda g: g.max_weight, iparams=[target_length, 1],
                           max_length=target_length, check_graph=_needs_weights,
                           name="deepwalk")
    return WalkProgram(unit_weight, length_reached, WalkerType.STATIC, sampler,
                       max_weight=lambda g: 1.0, iparams=[target_length, 0],
                       max_length=target_length, name="deepwalk")


def uniform_program(target_length=80, sampler=None):
    """Unbiased fixed-length walk (the ``custom-uniform`` CLI algorithm)."""
    if target_length < 1:
        raise ValueError("target length must be at least 1")
    return WalkProgram(unit_weight, length_reached, WalkerType.UNBIASED, sampler,
                       max_weight=lambda g: 1.0, iparams=[target_length],
                       max_length=target_length, name="custom-uniform")


def _needs_weights(g):
    if g.weights is None:
        raise ConfigurationError("weighted program on a graph without edge weights")


# ----------------------------------------------------------------- Node2Vec

@dataclass(frozen=True)
class Node2VecParams:
    a: float = 2.0
    b: float = 0.5
    target_length: int = 80

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0 and np.isfinite(self.b) and self.b > 0):
            raise ValueError("Node2Vec a and b must be finite and positive")
        if self.target_length < 1:
            raise ValueError("target length must be at least 1")

    @property
    def bound(self):
        return max(1.0 / self.a, 1.0, 1.0 / self.b)


@njit(cache=True)
def is_neighbor(offsets, neighbors, u, x):
    """Binary search for ``x`` among the sorted out-neighbors of ``u``."""
    lo = offsets[u]
    hi = offsets[u + 1]
    while lo < hi:
        mid = (lo + hi) >> 1
        if neighbors[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < offsets[u + 1] and neighbors[lo] == x


@weight_function
def node2vec_weight(G, P, path, plen, state, v, e):
    inv_a = P[0][0]
    inv_b = P[0][1]
    if plen < 2:
        x = P[0][2]
    else:
        prev = path[plen - 2]
        dst = G[1][e]
        if dst == prev:
            x = inv_a
        elif is_neighbor(G[0], G[1], prev, dst):
            x = 1.0
        else:
            x = inv_b
    if P[1][1]:
        x *= G[2][e]
    return x


def node2vec_program(params=Node2VecParams(), weighted=False, sampler=None):
    """Second-order walk: 1/a back to the previous vertex, 1 to its neighbors, 1/b elsewhere.

    Runs under O_REJ unless another sampler is given. The first move has no
    previous vertex and uses the constant bound ``max(1/a, 1, 1/b)`` for
    every edge. Neighborhood tests look at the previous vertex's out-edges.
    """
    bound = params.bound
    if sampler is None:
        sampler = SamplerKind.O_REJ
    scale = (lambda g: g.max_weight) if weighted else (lambda g: 1.0)
    return WalkProgram(node2vec_weight, length_reached, WalkerType.DYNAMIC, sampler,
                       max_weight=lambda g: bound * scale(g),
                       fparams=[1.0 / params.a, 1.0 / params.b, bound],
                       iparams=[params.target_length, int(weighted)],
                       max_length=params.target_length,
                       check_graph=_needs_weights if weighted else None, name="node2vec")


# ----------------------------------------------------------------- MetaPath

@dataclass(frozen=True)
class MetaPathSchema:
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))
        if not self.labels:
            raise ValueError("meta-path schema must not be empty")
        if min(self.labels) < 0:
            raise ValueError("schema labels must be non-negative")

    def __len__(self):
        return len(self.labels)

    @classmethod
    def random(cls, label_set, length=5, seed=0):
        rng = np.random.default_rng(seed)
        return cls(tuple(rng.choice(sorted(label_set), size=length)))


@weight_function
def metapath_weight(G, P, path, plen, state, v, e):
    # edge number plen-1 of the walk must carry schema[plen-1]
    if plen < 1:
        return 1.0
    return 1.0 if G[3][e] == P[1][plen - 1] else 0.0


@update_function
def metapath_update(G, P, path, plen, state, e, rng, q):
    return plen > P[1].size


def metapath_program(schema, sampler=None):
    """Walk whose i-th edge must carry label ``schema[i]``; stops when the schema ends."""
    if not isinstance(schema, MetaPathSchema):
        schema = MetaPathSchema(tuple(schema))

    def check(g):
        if g.labels is None:
            raise ConfigurationError("MetaPath needs an edge-labeled graph")
        missing = set(schema.labels) - g.label_set
        if missing:
            raise ConfigurationError(f"schema labels {sorted(missing)} not present in graph")

    return WalkProgram(metapath_weight, metapath_update, WalkerType.DYNAMIC, sampler,
                       max_weight=lambda g: 1.0, iparams=list(schema.labels),
                       max_length=len(schema) + 1, check_graph=check, name="metapath")
