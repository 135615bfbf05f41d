"""Problem instances: bilinear matrix games on simplices, strongly monotone
quadratic operators, and federated-mixing compositions.

Every instance exposes a full operator oracle, per-component oracles for
finite sums, and the constants (L, D, mu, per-component L_m) that the step
size rules and the verification suite consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import FREE, ProxSpec, Vector, prox_eval, rng_stream


@dataclass
class VIProblem:
    """A variational inequality instance: find z* with
    <F(z*), z - z*> + h(z) - h(z*) >= 0 for all feasible z.

    ``payload`` carries the operator data (one of the classes below); the
    surrounding fields are the constants the solver and verifiers need.
    ``L_m``/``D_m`` are per-component constants for finite sums.  ``meta``
    records the generator name and parameters so an instance can be
    rebuilt deterministically from a text snapshot.
    """

    d: int
    prox: ProxSpec
    M: int
    payload: object
    L: float
    D: float = 0.0
    mu_F: float = 0.0
    mu_h: float = 0.0
    noise_sigma: float = 0.0
    L_m: np.ndarray | None = None
    D_m: np.ndarray | None = None
    known_solution: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


@dataclass
class BilinearGame:
    """Matrix game payload: z = (x, y) on a product of two simplices with
    F(x, y) = (A^T y, -A x) for the averaged matrix A = mean_k A^(k)."""

    n: int
    mats: np.ndarray  # (M, n^2, n^2) component matrices
    avg: np.ndarray

    @property
    def half(self) -> int:
        return self.avg.shape[0]

    def _apply(self, mat: np.ndarray, z: Vector) -> Vector:
        x, y = z[: self.half], z[self.half :]
        return np.concatenate([mat.T @ y, -(mat @ x)])

    def full(self, z: Vector) -> Vector:
        return self._apply(self.avg, z)

    def component(self, m: int, z: Vector) -> Vector:
        return self._apply(self.mats[m], z)

    # the operator is linear; these drive the spectral-norm estimator
    def linear(self, v: Vector) -> Vector:
        return self._apply(self.avg, v)

    def linear_t(self, v: Vector) -> Vector:
        u, w = v[: self.half], v[self.half :]
        return np.concatenate([-(self.avg.T @ w), self.avg @ u])


@dataclass
class QuadraticOperator:
    """Affine payload F(z) = mat @ (z - center) with known solution center."""

    mat: np.ndarray
    center: np.ndarray

    def full(self, z: Vector) -> Vector:
        return self.mat @ (z - self.center)

    def component(self, m: int, z: Vector) -> Vector:
        return self.full(z)

    def linear(self, v: Vector) -> Vector:
        return self.mat @ v

    def linear_t(self, v: Vector) -> Vector:
        return self.mat.T @ v


@dataclass
class MixingVI:
    """Federated-mixing payload over the stacked variable Z in R^{workers*d}:
    F(Z) = Phi(Z) + lam * (Z - Z_avg), where Phi stacks the per-worker
    operators and Z_avg repeats the blockwise average.

    The two pieces are exposed separately (phi / consensus) because the
    local estimator samples between them; as a finite sum the problem is
    published with a single component (the split is not an average).
    """

    base: tuple
    lam: float
    d_base: int

    @property
    def workers(self) -> int:
        return len(self.base)

    @property
    def l_phi(self) -> float:
        return max(p.L for p in self.base)

    def _blocks(self, Z: Vector) -> np.ndarray:
        return Z.reshape(self.workers, self.d_base)

    def phi(self, Z: Vector) -> Vector:
        out = np.empty_like(Z)
        for m, p in enumerate(self.base):
            blk = slice(m * self.d_base, (m + 1) * self.d_base)
            out[blk] = p.payload.full(Z[blk])
        return out

    def consensus(self, Z: Vector) -> Vector:
        blocks = self._blocks(Z)
        return (self.lam * (blocks - blocks.mean(axis=0))).ravel()

    def full(self, Z: Vector) -> Vector:
        return self.phi(Z) + self.consensus(Z)

    def component(self, m: int, Z: Vector) -> Vector:
        return self.full(Z)

    def linear(self, v: Vector) -> Vector:
        out = np.empty_like(v)
        for m, p in enumerate(self.base):
            blk = slice(m * self.d_base, (m + 1) * self.d_base)
            out[blk] = p.payload.linear(v[blk])
        return out + self.consensus(v)

    def linear_t(self, v: Vector) -> Vector:
        out = np.empty_like(v)
        for m, p in enumerate(self.base):
            blk = slice(m * self.d_base, (m + 1) * self.d_base)
            out[blk] = p.payload.linear_t(v[blk])
        # lam*(I - averaging projector) is symmetric
        return out + self.consensus(v)


def wealth_base(n: int) -> Vector:
    """Pyramid wealth profile on the flattened n x n grid:
    w_i = 1 - (2/n) * min{|floor(i/n) - n/2|, |i mod n - n/2|}."""
    if n < 1:
        raise ValueError("need n >= 1")
    i = np.arange(n * n)
    row = i // n
    col = i % n
    half = n / 2.0
    return 1.0 - (2.0 / n) * np.minimum(np.abs(row - half), np.abs(col - half))


def cell_distance(i: int, j: int, n: int) -> float:
    """Euclidean distance between cells i and j of the flattened n x n grid."""
    if not (0 <= i < n * n and 0 <= j < n * n):
        raise IndexError(f"cell index out of range for side {n}")
    return math.hypot(i // n - j // n, i % n - j % n)


def _pairwise_distances(n: int) -> np.ndarray:
    i = np.arange(n * n)
    rows = i // n
    cols = i % n
    dr = rows[:, None] - rows[None, :]
    dc = cols[:, None] - cols[None, :]
    return np.sqrt(dr * dr + dc * dc)


def gen_policeman_burglar(n: int, theta: float = 0.6, sigma_w: float = 3.0, seed: int = 0) -> VIProblem:
    """Bilinear matrix game on Delta(n^2) x Delta(n^2).

    Component matrices A^(k)_{ij} = w_i^(k) * (1 - exp(-theta*d(i,j))) with
    wealth w^(k) = w * (1 + xi^(k)), one scalar xi^(k) ~ U(0, sigma_w) per
    component.  The play is min over x, max over y of (1/n) sum_k y^T A^(k) x,
    so the monotone operator is F(x, y) = (A^T y, -A x) for the averaged A.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if theta <= 0:
        raise ValueError("need theta > 0")
    if sigma_w < 0:
        raise ValueError("need sigma_w >= 0")
    rng = rng_stream(seed, 0)
    w = wealth_base(n)
    shape = 1.0 - np.exp(-theta * _pairwise_distances(n))
    base = w[:, None] * shape
    xi = sigma_w * np.atleast_1d(rng.uniform(n))
    mats = (1.0 + xi)[:, None, None] * base[None, :, :]
    payload = BilinearGame(n=n, mats=mats, avg=mats.mean(axis=0))

    L = _matrix_spectral_norm(payload.avg, tol=1e-12)
    L_m = np.array([_matrix_spectral_norm(mats[k], tol=1e-12) for k in range(n)])
    return VIProblem(
        d=2 * n * n,
        prox=ProxSpec((n * n, n * n)),
        M=n,
        payload=payload,
        L=L,
        L_m=L_m,
        D_m=np.zeros(n),
        meta={"kind": "pvb", "n": n, "theta": theta, "sigma_w": sigma_w, "seed": seed},
    )


def gen_quadratic_vi(d: int, mu: float, L: float, seed: int = 0) -> VIProblem:
    """Strongly monotone affine instance F(z) = M(z - z*) on free space.

    M = mu*I + alpha*(S + P) with S random skew-symmetric and P symmetric
    PSD, alpha calibrated so the spectral norm of M equals L exactly; the
    symmetric part is mu*I + alpha*P >= mu*I, so the strong monotonicity
    constant is mu by construction.
    """
    if not 0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    rng = rng_stream(seed, 0)
    R = rng.normal((d, d))
    S = (R - R.T) / 2.0
    B = rng.normal((d, d))
    P = (B @ B.T) / d
    z_star = rng.normal(d)

    eye = np.eye(d)
    if L == mu:
        mat = mu * eye
    else:
        N = S + P

        def excess(a):
            return np.linalg.norm(mu * eye + a * N, 2) - L

        hi = 1.0
        while excess(hi) < 0:
            hi *= 2.0
        alpha = brentq(excess, 0.0, hi, xtol=1e-13, rtol=8.9e-16)
        mat = mu * eye + alpha * N

    payload = QuadraticOperator(mat=mat, center=z_star)
    return VIProblem(
        d=d,
        prox=FREE,
        M=1,
        payload=payload,
        L=L,
        mu_F=mu,
        L_m=np.array([L]),
        D_m=np.zeros(1),
        known_solution=z_star.copy(),
        meta={"kind": "quadratic", "d": d, "mu": mu, "L": L, "seed": seed},
    )


def gen_mixing_vi(base: list[VIProblem], lam: float) -> VIProblem:
    """Stack M worker problems and couple them through lam * (Z - Z_avg).

    All base problems must share one dimension and a free prox.  The full
    operator is Phi(Z) + lam*(Z - Z_avg); its pieces keep Lipschitz
    constants max_m L_m and lam respectively.
    """
    if lam <= 0:
        raise ValueError("need lam > 0")
    if not base:
        raise ValueError("need at least one base problem")
    d_base = base[0].d
    for p in base:
        if p.d != d_base:
            raise ValueError("base problems must share one dimension")
        if not p.prox.free:
            raise ValueError("base problems must have a free prox")
    payload = MixingVI(base=tuple(base), lam=lam, d_base=d_base)
    workers = payload.workers
    L = payload.l_phi + lam
    mu_F = min(p.mu_F for p in base)

    known = None
    if all(p.known_solution is not None for p in base):
        stacked = np.concatenate([p.known_solution for p in base])
        if np.linalg.norm(payload.full(stacked)) <= 1e-8:
            known = stacked
    return VIProblem(
        d=workers * d_base,
        prox=FREE,
        M=1,
        payload=payload,
        L=L,
        mu_F=mu_F,
        L_m=np.array([L]),
        D_m=np.zeros(1),
        known_solution=known,
        meta={"kind": "mixing", "workers": workers, "d": d_base, "lambda": lam},
    )


def eval_full(p: VIProblem, z: Vector) -> Vector:
    """Exact F(z).  Pure: no cost counters live here."""
    z = np.asarray(z, dtype=float)
    if z.size != p.d:
        raise ValueError(f"vector length {z.size} does not match problem dimension {p.d}")
    return p.payload.full(z)


def eval_component(p: VIProblem, m: int, z: Vector) -> Vector:
    """Exact F_m(z), 0-based; the component average reproduces eval_full."""
    if not 0 <= m < p.M:
        raise IndexError(f"component {m} out of range for M={p.M}")
    z = np.asarray(z, dtype=float)
    if z.size != p.d:
        raise ValueError(f"vector length {z.size} does not match problem dimension {p.d}")
    return p.payload.component(m, z)


def _power_norm(matvec, rmatvec, dim: int, tol: float, max_iter: int = 20000) -> float:
    """Largest singular value of the linear map via power iteration on A^T A."""
    rng = rng_stream(0x5EED, 7)
    q = rng.normal(dim)
    q /= np.linalg.norm(q)
    val = 0.0
    for it in range(max_iter):
        aq = matvec(q)
        new = float(np.linalg.norm(aq))
        if new == 0.0:
            return 0.0
        bq = rmatvec(aq)
        nb = float(np.linalg.norm(bq))
        if nb == 0.0:
            return new
        q = bq / nb
        if it >= 4 and abs(new - val) <= tol * max(new, 1e-300):
            return new
        val = new
    return val


def _matrix_spectral_norm(mat: np.ndarray, tol: float) -> float:
    return _power_norm(lambda v: mat @ v, lambda v: mat.T @ v, mat.shape[1], tol)


def estimate_lipschitz(p: VIProblem, tol: float = 1e-9) -> float:
    """Spectral norm of the linear part of an affine operator.

    Power iteration on A^T A with a fixed internal seed, stopped when the
    singular-value estimate moves by at most tol relatively.  Raises for
    payloads that do not expose their linear part.
    """
    payload = p.payload
    if not hasattr(payload, "linear") or not hasattr(payload, "linear_t"):
        raise TypeError("operator does not expose an affine linear part")
    return _power_norm(payload.linear, payload.linear_t, p.d, tol)


def initial_point(p: VIProblem, seed: int) -> Vector:
    """Canonical z^0: simplex block centers for constrained problems,
    known solution (or origin) plus a unit-norm seeded offset otherwise."""
    if p.prox.free:
        center = p.known_solution if p.known_solution is not None else np.zeros(p.d)
        e = rng_stream(seed, 2).normal(p.d)
        return center + e / np.linalg.norm(e)
    z0 = np.empty(p.d)
    start = 0
    for b in p.prox.blocks:
        z0[start : start + b] = 1.0 / b
        start += b
    return z0


def random_feasible(p: VIProblem, rng) -> Vector:
    """A generic feasible point: a projected standard normal draw."""
    return prox_eval(p.prox, 1.0, rng.normal(p.d))
