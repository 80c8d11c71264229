"""Counter-based random streams.

Every random number used by the solvers is a pure function of the tuple
``(seed, particle_id, step_index, draw_counter)``.  The tuple is fed through
the Philox4x32-10 bijection: the 64-bit seed is the key, and the 128-bit
counter is ``(draw_lo, draw_hi, particle_id, step_index)``.  One Philox block
yields four 32-bit words, i.e. two 53-bit uniforms, so uniform number ``k`` of
a stream lives in block ``k // 2``, half ``k % 2``.

Because nothing is sequential, any subset of draws for any subset of
particles can be generated in any order and by any number of workers with
bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_ROUNDS = 10
_SHIFT32 = np.uint64(32)

_TWO_POW_M53 = 1.0 / 9007199254740992.0


def philox4x32(counter, key):
    """Philox4x32-10 on broadcastable arrays.

    ``counter`` is a 4-tuple and ``key`` a 2-tuple of integer arrays holding
    32-bit values.  Returns four ``uint64`` arrays holding 32-bit words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) & _MASK32 for k in key)
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ k0,
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ k1,
            p0 & _MASK32,
        )
    return c0, c1, c2, c3


def _split_seed(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def _words_to_uniform(hi, lo) -> np.ndarray:
    return ((hi >> np.uint64(5)) * np.uint64(67108864) + (lo >> np.uint64(6))).astype(
        np.float64
    ) * _TWO_POW_M53


def uniform_slots(seed: int, particle_ids, step_index: int, slots) -> np.ndarray:
    """Uniforms on [0, 1) for every (particle, slot) combination.

    ``particle_ids`` and ``slots`` are 1-d integer arrays; the result has shape
    ``(len(particle_ids), len(slots))``.  Slot ``k`` is draw number ``k`` of the
    stream ``derive_stream(seed, particle_id, step_index)``.
    """
    k0, k1 = _split_seed(seed)
    pid = np.asarray(particle_ids, dtype=np.uint64).reshape(-1, 1)
    slots = np.asarray(slots, dtype=np.uint64).reshape(1, -1)
    # only the blocks actually touched are evaluated
    blocks, inverse = np.unique(slots >> np.uint64(1), return_inverse=True)
    blocks = blocks.reshape(1, -1)
    w0, w1, w2, w3 = philox4x32(
        (blocks & _MASK32, blocks >> _SHIFT32, pid, np.uint64(step_index)), (k0, k1)
    )
    first = _words_to_uniform(w0, w1)
    second = _words_to_uniform(w2, w3)
    inverse = inverse.reshape(-1)
    odd = (slots.reshape(-1) & np.uint64(1)).astype(bool)
    return np.where(odd, second[:, inverse], first[:, inverse])


def open_uniform(u: np.ndarray) -> np.ndarray:
    """Shift [0, 1) uniforms on the 2^-53 grid to the open interval (0, 1)."""
    return u + 0.5 * _TWO_POW_M53


def normal_from_uniform(u: np.ndarray) -> np.ndarray:
    """Standard normals by inverse CDF, one uniform per normal."""
    return ndtri(open_uniform(u))


def sphere_from_uniforms(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Uniform points on the unit sphere S^2 (Archimedes' projection)."""
    z = 2.0 * u1 - 1.0
    phi = 2.0 * np.pi * u2
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    e = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    return e / np.linalg.norm(e, axis=-1, keepdims=True)


@dataclass(frozen=True)
class StreamKey:
    seed: int
    particle_id: int
    step_index: int
    draw_counter: int = 0


class RandomStream:
    """A stream of uniforms addressed by a :class:`StreamKey`.

    The stream is a cursor over the counter space; copying it (``fork``)
    copies the cursor, so it behaves like a value.
    """

    __slots__ = ("seed", "particle_id", "step_index", "position")

    def __init__(self, seed: int, particle_id: int, step_index: int, position: int = 0):
        _split_seed(seed)
        if particle_id < 0 or step_index < 0:
            raise ValueError("particle_id and step_index must be nonnegative")
        if particle_id >= 2**32 or step_index >= 2**32:
            raise ValueError("particle_id and step_index must fit in 32 bits")
        self.seed = int(seed)
        self.particle_id = int(particle_id)
        self.step_index = int(step_index)
        self.position = int(position)

    @property
    def key(self) -> StreamKey:
        return StreamKey(self.seed, self.particle_id, self.step_index, self.position)

    def fork(self) -> RandomStream:
        return RandomStream(self.seed, self.particle_id, self.step_index, self.position)

    def skip(self, count: int) -> None:
        self.position += int(count)

    def uniform(self, size: int | None = None):
        """Next uniform(s) on [0, 1); ``size=None`` returns a float."""
        n = 1 if size is None else int(size)
        slots = np.arange(self.position, self.position + n, dtype=np.uint64)
        self.position += n
        out = uniform_slots(self.seed, [self.particle_id], self.step_index, slots)[0]
        return float(out[0]) if size is None else out

    def normal(self, size: int | None = None):
        u = self.uniform(1 if size is None else size)
        z = normal_from_uniform(u)
        return float(z[0]) if size is None else z

    def __repr__(self) -> str:
        return (
            f"RandomStream(seed={self.seed}, particle_id={self.particle_id}, "
            f"step_index={self.step_index}, position={self.position})"
        )


def derive_stream(seed: int, particle_id: int, step_index: int) -> RandomStream:
    """Deterministic stream for one particle at one step (``particle_id=0`` is
    reserved for ensemble-level draws)."""
    return RandomStream(seed, particle_id, step_index)


def sample_bernoulli(stream: RandomStream, p: float, size: int | None = None):
    """1 with probability ``p``; one uniform per draw."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Bernoulli probability must lie in [0, 1], got {p}")
    u = stream.uniform(1 if size is None else size)
    bits = (u < p).astype(np.int64)
    return int(bits[0]) if size is None else bits


def partner_from_uniform(u, n: int):
    """Map uniforms to ``(alpha, j)`` with ``alpha = u*n`` and ``j = floor(alpha) + 1``."""
    alpha = np.asarray(u, dtype=np.float64) * n
    # u*n can round up to n for u close to 1
    j = np.minimum(np.floor(alpha).astype(np.int64) + 1, n)
    return alpha, j


def sample_partner(stream: RandomStream, n: int, size: int | None = None):
    """Uniform partner selection; returns ``(alpha, j)`` with 1-based ``j``.

    Self-selection is allowed: nothing excludes the caller's own index.
    """
    if n < 1:
        raise ValueError("need at least one particle")
    alpha, j = partner_from_uniform(stream.uniform(1 if size is None else size), n)
    if size is None:
        return float(alpha[0]), int(j[0])
    return alpha, j


def sample_unit_sphere(stream: RandomStream, size: int | None = None) -> np.ndarray:
    """Uniform unit vector(s) in R^3; two uniforms per vector."""
    n = 1 if size is None else int(size)
    u = stream.uniform(2 * n).reshape(n, 2)
    e = sphere_from_uniforms(u[:, 0], u[:, 1])
    return e[0] if size is None else e


def child_seed(master_seed: int, *path: int) -> int:
    """64-bit seed derived from ``master_seed`` and an integer path."""
    entropy = [int(master_seed)] + [int(p) for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
