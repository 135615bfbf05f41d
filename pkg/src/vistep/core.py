"""Dense vectors, deterministic random streams, and prox operators.

The constraint structures supported are free space (prox is the identity)
and products of probability simplices (prox is a blockwise Euclidean
projection, independent of the prox scale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Iterates, operator values and estimates are plain 1-d float arrays.
Vector = np.ndarray


@dataclass(frozen=True)
class ProxSpec:
    """Constraint structure consumed by :func:`prox_eval`.

    ``blocks is None`` means unconstrained (h = 0).  Otherwise ``blocks``
    lists simplex lengths that partition the dimension exactly, and the
    prox projects each block onto the unit probability simplex.
    """

    blocks: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.blocks is not None:
            blocks = tuple(int(b) for b in self.blocks)
            if len(blocks) == 0 or any(b < 1 for b in blocks):
                raise ValueError("simplex block lengths must be positive integers")
            object.__setattr__(self, "blocks", blocks)

    @property
    def free(self) -> bool:
        return self.blocks is None

    @property
    def dim(self) -> int | None:
        """Total dimension, or None when the spec is free (any length fits)."""
        return None if self.blocks is None else int(sum(self.blocks))


FREE = ProxSpec()


def project_simplex(v: Vector) -> Vector:
    """Euclidean projection of ``v`` onto the unit probability simplex.

    Sort-based threshold rule: with u the entries sorted in decreasing
    order, the support is the largest j such that u_j > (u_1+...+u_j - 1)/j,
    and the projection clips every entry at that threshold.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty 1-d vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    j = np.arange(1, v.size + 1)
    rho = np.nonzero(u * j > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def prox_eval(spec: ProxSpec, gamma: float, v: Vector) -> Vector:
    """prox_{gamma*h}(v) for the indicator-style h encoded by ``spec``.

    Free specs return v unchanged; simplex specs project blockwise.  The
    result does not depend on gamma (indicator functions scale trivially),
    but gamma must still be a valid step size.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    v = np.asarray(v, dtype=float)
    if spec.free:
        return v.copy()
    if v.size != spec.dim:
        raise ValueError(f"vector length {v.size} does not match spec dimension {spec.dim}")
    out = np.empty_like(v)
    start = 0
    for b in spec.blocks:
        out[start : start + b] = project_simplex(v[start : start + b])
        start += b
    return out


class RngStream:
    """Deterministic random stream addressed by (seed, stream_id).

    Identical (seed, stream_id) pairs reproduce the same draw sequence on
    any platform; distinct stream_ids give independent streams.  All draws
    are derived from uniforms on [0, 1): integers by scaling, normals by
    the Box-Muller transform, so the whole artifact depends on a single
    generator contract.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def uniform(self, size=None):
        """Uniform on [0, 1); scalar float when size is None."""
        if size is None:
            return float(self._gen.random())
        return self._gen.random(size)

    def integer(self, n: int) -> int:
        """Uniform draw from {0, ..., n-1} via one uniform."""
        if n < 1:
            raise ValueError("need n >= 1")
        # min() guards the measure-zero u*n == n rounding edge
        return min(int(self.uniform() * n), n - 1)

    def integers(self, n: int, size) -> np.ndarray:
        if n < 1:
            raise ValueError("need n >= 1")
        u = self._gen.random(size)
        return np.minimum((u * n).astype(np.int64), n - 1)

    def normal(self, size=None):
        """Standard normal draws via Box-Muller on uniform pairs."""
        count = 1 if size is None else int(np.prod(size))
        half = (count + 1) // 2
        u1 = self._gen.random(half)
        u2 = self._gen.random(half)
        # 1 - u1 lies in (0, 1], so the log never sees zero
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:count]
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def subset(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from {0..n-1}, uniform over subsets.

        Argsort of n fresh uniforms, first k positions: every permutation is
        equally likely, hence every k-subset is.  Batched callers can apply
        the same rule rowwise and get the identical per-draw mapping.
        """
        if not 1 <= k <= n:
            raise ValueError("need 1 <= k <= n")
        u = self._gen.random(n)
        return np.argsort(u, kind="stable")[:k]

    def subsets(self, n: int, k: int, rows: int) -> np.ndarray:
        """rows independent k-subsets, one per row; same rule as subset()."""
        if not 1 <= k <= n:
            raise ValueError("need 1 <= k <= n")
        u = self._gen.random((rows, n))
        return np.argsort(u, axis=1, kind="stable")[:, :k]


def rng_stream(seed: int, stream_id: int = 0) -> RngStream:
    """Factory for RngStream; the (seed, stream_id) pair is the identity."""
    return RngStream(seed, stream_id)
