"""SplitMix64 random streams.

Every walker owns one SplitMix64 stream. The whole generator state is a
single ``uint64``, so a batch of streams is just a ``uint64`` array and the
jitted kernels advance ``states[i]`` in place. Stream ``i`` of a run seeded
with ``seed`` starts at ``stream_seed(seed, i)``; this keeps a walk's
randomness independent of which worker, ring slot, or execution mode
handles it.

Draw primitives (each consumes exactly one 64-bit output):

* ``uniform01``      -- top 53 bits scaled to [0, 1)
* ``uniform_real``   -- ``uniform01() * b``, in [0, b)
* ``uniform_int``    -- ``floor(uniform01() * n)`` clamped to n - 1, in [0, n)
"""
import numpy as np
from numba import njit

from .errors import EmptyDomainError

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

# multiplicative inverse of GAMMA mod 2**64, used to count consumed draws
_GAMMA_INV = pow(int(GAMMA), -1, 1 << 64)


@njit(inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(inline="always")
def next_u64(states, i):
    s = states[i] + GAMMA
    states[i] = s
    return mix64(s)


@njit(inline="always")
def uniform01(states, i):
    return np.float64(next_u64(states, i) >> _S11) * _INV53


@njit(inline="always")
def uniform_real(states, i, b):
    return uniform01(states, i) * b


@njit(inline="always")
def uniform_int(states, i, n):
    x = np.int64(uniform01(states, i) * n)
    if x >= n:
        x = n - 1
    return x


@njit(cache=True)
def stream_seed(seed, stream_id):
    s = mix64(np.uint64(seed) + GAMMA)
    return mix64(s ^ ((np.uint64(stream_id) + _ONE) * GAMMA))


@njit(cache=True)
def seed_streams(seed, first_id, count):
    """Initial states for streams ``first_id .. first_id + count - 1``."""
    out = np.empty(count, dtype=np.uint64)
    for j in range(count):
        out[j] = stream_seed(seed, first_id + j)
    return out


@njit(cache=True)
def _draw_u64(states):
    return next_u64(states, 0)


@njit(cache=True)
def _draw_real(states, b):
    return uniform_real(states, 0, b)


@njit(cache=True)
def _draw_int(states, n):
    return uniform_int(states, 0, n)


def draws_between(start, end):
    """Number of draws that advance a stream from state ``start`` to ``end``."""
    delta = (int(end) - int(start)) % (1 << 64)
    return (delta * _GAMMA_INV) % (1 << 64)


class RngStream:
    """A single-owner SplitMix64 stream.

    ``state`` is a one-element ``uint64`` array so it can be handed to the
    jitted samplers, which advance it in place.
    """

    algorithm = "splitmix64"

    def __init__(self, state):
        self.state = np.array([state], dtype=np.uint64)
        self._origin = int(self.state[0])

    @classmethod
    def from_seed(cls, seed, stream_id=0):
        return cls(stream_seed(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), stream_id))

    @property
    def draws(self):
        """Draws consumed since construction."""
        return draws_between(self._origin, self.state[0])

    def next_u64(self):
        return int(_draw_u64(self.state))

    def uniform(self, b=1.0):
        return float(_draw_real(self.state, float(b)))

    def integers(self, n):
        if n <= 0:
            raise EmptyDomainError("uniform integer over an empty range")
        return int(_draw_int(self.state, int(n)))

    def copy(self):
        other = RngStream(self.state[0])
        other._origin = self._origin
        return other

    def __repr__(self):
        return f"RngStream(state=0x{int(self.state[0]):016x}, draws={self.draws})"
