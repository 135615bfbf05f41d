"""Progress metrics and the verification suite.

Gaps: for bilinear games on simplex products the restricted merit value
max_u <F(u), z - u> has separable best responses and a closed form; a
brute-force vertex enumeration and a ball-restricted variant double-check
it on small instances.

Verifiers: every estimation strategy promises unbiasedness of g^{k+1/2}
and a second-moment contract with its table constants.  For strategies
with finitely many outcomes both are checked exactly by enumerating the
outcome atoms; otherwise by Monte Carlo with a slack that scales like
1/sqrt(n).  Oracle-noise terms enter the checks analytically, never by
sampling the noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import brentq

from .core import Vector, prox_eval, rng_stream
from .estimators import (
    EstimatorKind,
    constants_for_problem,
    est_pair,
    half_atoms,
    init_estimator,
    sample_half_batch,
    snapshot_update,
)
from .problems import BilinearGame, VIProblem, eval_component, eval_full, random_feasible


@dataclass(frozen=True)
class GapReport:
    """Restricted merit value max_u <F(u), z - u> with the maximizing u."""

    value: float
    maximizer: Vector
    n_candidates: int


@dataclass(frozen=True)
class CheckRow:
    """One verified inequality: lhs <= rhs up to the stated slack."""

    lemma: str
    variant: str
    lhs: float
    rhs: float
    slack: float
    n: int
    passed: bool


@dataclass
class VerificationReport:
    rows: list

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        self.rows.extend(other.rows)
        return self


def _row(lemma: str, variant: str, lhs: float, rhs: float, n: int, tol: float) -> CheckRow:
    if rhs > 0:
        slack = lhs / rhs
    else:
        slack = 0.0 if lhs <= 0 else math.inf
    return CheckRow(lemma, variant, float(lhs), float(rhs), float(slack), int(n), bool(lhs <= rhs * (1.0 + tol) + 1e-300))


def duality_gap_bilinear(game: BilinearGame, z: Vector) -> float:
    """max_i (A x)_i - min_j (A^T y)_j for the averaged matrix A: the sum
    of both players' best-response improvements, zero exactly at saddles."""
    h = game.half
    x, y = z[:h], z[h:]
    return float(np.max(game.avg @ x) - np.min(game.avg.T @ y))


def _simplex_vertices(blocks) -> list[np.ndarray]:
    d = sum(blocks)
    verts = []
    for combo in product(*(range(b) for b in blocks)):
        v = np.zeros(d)
        start = 0
        for b, i in zip(blocks, combo):
            v[start + i] = 1.0
            start += b
        verts.append(v)
    return verts


def restricted_gap_bruteforce(p: VIProblem, z: Vector) -> GapReport:
    """max_u <F(u), z - u> over the feasible set by vertex enumeration.

    Valid because <F(u), z - u> is linear in u for a bilinear skew
    operator, so the maximum sits at a vertex of the simplex product.
    """
    if not isinstance(p.payload, BilinearGame):
        raise TypeError("brute-force gap needs a bilinear payload")
    if p.prox.free:
        raise ValueError("brute-force gap needs a bounded feasible set")
    best = -math.inf
    best_u = None
    verts = _simplex_vertices(p.prox.blocks)
    for u in verts:
        val = float(np.dot(eval_full(p, u), z - u))
        if val > best:
            best = val
            best_u = u
    return GapReport(value=best, maximizer=best_u, n_candidates=len(verts))


def restricted_gap_ball(p: VIProblem, z: Vector, radius: float, center: Vector | None = None) -> GapReport:
    """max_u <F(u), z - u> over the ball |u - center| <= radius, for affine
    F(u) = M(u - z0): a concave quadratic, solved through the eigenbasis of
    the symmetric part (interior stationary point, else the boundary
    multiplier from a scalar root find)."""
    payload = p.payload
    if not hasattr(payload, "linear") or not hasattr(payload, "linear_t"):
        raise TypeError("ball gap needs an affine operator")
    if radius <= 0:
        raise ValueError("need radius > 0")
    c = np.zeros(p.d) if center is None else np.asarray(center, dtype=float)
    mat = np.stack([payload.linear(e) for e in np.eye(p.d)], axis=1)
    S = (mat + mat.T) / 2.0
    # q(c + v) = q(c) + g.v - v.S v  with  g = grad q at c
    g = payload.linear_t(z - c) - eval_full(p, c)
    lam_s, Q = np.linalg.eigh(S)
    gh = Q.T @ g

    def vnorm_sq(lam: float) -> float:
        return float(np.sum((gh / (2.0 * lam_s + 2.0 * lam)) ** 2))

    interior = np.all(lam_s > 0) and vnorm_sq(0.0) <= radius * radius
    if np.all(gh == 0.0):
        v = np.zeros(p.d)
    elif interior:
        v = Q @ (gh / (2.0 * lam_s))
    else:
        hi = float(np.linalg.norm(g)) / (2.0 * radius)
        lo = max(0.0, -float(lam_s.min())) + 1e-300
        if vnorm_sq(lo) <= radius * radius:
            v = Q @ (gh / (2.0 * lam_s + 2.0 * lo))
        else:
            while vnorm_sq(hi) > radius * radius:
                hi *= 2.0
            lam = brentq(lambda t: vnorm_sq(t) - radius * radius, lo, max(hi, lo * 2), xtol=1e-14, rtol=8.9e-16)
            v = Q @ (gh / (2.0 * lam_s + 2.0 * lam))
    u = c + v
    return GapReport(value=float(np.dot(eval_full(p, u), z - u)), maximizer=u, n_candidates=0)


def distance_to_solution(p: VIProblem, z: Vector) -> float:
    if p.known_solution is None:
        raise ValueError("problem has no known solution")
    return float(np.linalg.norm(np.asarray(z, dtype=float) - p.known_solution))


# ---------------------------------------------------------------------------
# Verification of the estimator contracts.


def _snapshot_mean(kind: EstimatorKind, p: VIProblem, w: Vector) -> Vector:
    """F(w) computed the way the running cache computes it."""
    if kind.name in ("vr", "is", "qvr"):
        return np.mean([eval_component(p, m, w) for m in range(p.M)], axis=0)
    return eval_full(p, w)


def _test_states(p: VIProblem, n_points: int, seed: int):
    rng = rng_stream(seed, 5)
    return [(random_feasible(p, rng), random_feasible(p, rng)) for _ in range(n_points)]


def verify_unbiasedness(
    kind: EstimatorKind,
    p: VIProblem,
    n_points: int = 5,
    n_samples: int = 0,
    seed: int = 0,
    sampler=None,
) -> VerificationReport:
    """Check E[g^{k+1/2}] = F(z^{k+1/2}) at random state pairs.

    n_samples = 0 enumerates the outcome atoms (exact, tolerance at float
    precision); n_samples > 0 averages Monte Carlo draws against a bound
    of four standard errors.  ``sampler`` replaces the draw routine, which
    lets a deliberately broken estimator serve as a negative control.
    """
    rows = []
    rng = rng_stream(seed, 6)
    worst = None
    for z_half, w in _test_states(p, n_points, seed):
        fw = _snapshot_mean(kind, p, w)
        target = eval_full(p, z_half)
        scale = 1.0 + float(np.linalg.norm(target))
        if n_samples == 0 and sampler is None:
            atoms = half_atoms(kind, p, z_half, w, fw)
            mean = sum(prob * val for prob, val in atoms)
            lhs = float(np.linalg.norm(mean - target))
            rhs = 1e-9 * scale
            n = len(atoms)
        else:
            if n_samples <= 1:
                raise ValueError("Monte Carlo mode needs n_samples > 1")
            if sampler is not None:
                batch = sampler(p, z_half, w, fw, rng, n_samples)
            else:
                batch = sample_half_batch(kind, p, z_half, w, fw, rng, n_samples)
            mean = batch.mean(axis=0)
            lhs = float(np.linalg.norm(mean - target))
            trace_cov = float(np.sum(batch.var(axis=0))) / n_samples
            rhs = 4.0 * math.sqrt(trace_cov) + 1e-12 * scale
            n = n_samples
        row = _row("unbiased", kind.name, lhs, rhs, n, 0.0)
        if worst is None or (row.slack > worst.slack) or (not row.passed):
            worst = row
    rows.append(worst)
    return VerificationReport(rows)


def _second_moment_rows_static(
    kind: EstimatorKind,
    p: VIProblem,
    n_points: int,
    n_samples: int,
    seed: int,
) -> list:
    c = constants_for_problem(kind, p)
    rng = rng_stream(seed, 6)
    tol = 1e-9 if n_samples == 0 else 5.0 / math.sqrt(n_samples)
    worst = {}

    def keep(key, row):
        if key not in worst or row.slack > worst[key].slack or not row.passed:
            worst[key] = row

    for z_half, w in _test_states(p, n_points, seed):
        gap_sq = float(np.sum((z_half - w) ** 2))
        target = eval_full(p, z_half)
        if kind.name in ("fulldet", "noisy"):
            # tau = 0 for these, so the anchor w is the current iterate
            s2 = kind.sigma**2
            diff_lhs = float(np.sum((target - eval_full(p, w)) ** 2)) + 2.0 * s2
            keep("diff", _row("diff-second-moment", kind.name, diff_lhs, c.A * gap_sq + c.D1, 0, 1e-9))
            keep("res", _row("residual-second-moment", kind.name, s2, c.E * gap_sq + c.D3, 0, 1e-9))
            continue
        fw = _snapshot_mean(kind, p, w)
        if n_samples == 0:
            atoms = half_atoms(kind, p, z_half, w, fw)
            diff_lhs = sum(prob * float(np.sum((val - fw) ** 2)) for prob, val in atoms)
            res_lhs = sum(prob * float(np.sum((val - target) ** 2)) for prob, val in atoms)
            n = len(atoms)
        else:
            batch = sample_half_batch(kind, p, z_half, w, fw, rng, n_samples)
            diff_lhs = float(np.mean(np.sum((batch - fw) ** 2, axis=1)))
            res_lhs = float(np.mean(np.sum((batch - target) ** 2, axis=1)))
            n = n_samples
        keep("diff", _row("diff-second-moment", kind.name, diff_lhs, c.A * gap_sq + c.D1, n, tol))
        keep("res", _row("residual-second-moment", kind.name, res_lhs, c.E * gap_sq + c.D3, n, tol))
    return [worst["diff"], worst["res"]]


def _second_moment_rows_past(kind: EstimatorKind, p: VIProblem, n_points: int, seed: int) -> list:
    """Realized-trajectory checks for the stored-half-step strategy.

    With sigma_k^2 = |F(z^{k-1/2}) - F(z^{k+1/2})|^2 the contract holds
    pointwise along any trajectory run with gamma <= 1/(3L); the noise
    contributions enter both sides analytically.  The memory recursion is
    only a pointwise statement for a noise-free oracle, so that row is
    emitted when sigma = 0.
    """
    c = constants_for_problem(kind, p)
    s2 = kind.sigma**2
    gamma = 1.0 / (3.0 * p.L)
    rng = rng_stream(seed, 6)
    coin = rng_stream(seed, 7)
    z = random_feasible(p, rng)
    state = init_estimator(kind, p, z, rng)

    halves = []
    ws = []
    rows = []
    worst = {}

    def keep(key, row):
        if key not in worst or row.slack > worst[key].slack or not row.passed:
            worst[key] = row

    sigma_prev = None
    for _ in range(n_points + 2):
        ws.append(z.copy())
        g_k, g_half, z_half = est_pair(state, p, z, z, p.prox, gamma, rng)
        halves.append(z_half)
        z = prox_eval(p.prox, gamma, z - gamma * g_half)
        snapshot_update(state, z, 0.0, coin, p)
        if len(halves) >= 2:
            f_prev = eval_full(p, halves[-2])
            f_curr = eval_full(p, halves[-1])
            sigma_sq = float(np.sum((f_prev - f_curr) ** 2))
            diff_lhs = sigma_sq + 2.0 * s2
            keep("diff", _row("diff-second-moment", kind.name, diff_lhs, c.B * sigma_sq + c.D1, 0, 1e-9))
            if s2 == 0.0 and sigma_prev is not None:
                w_k = ws[-1]
                move_sq = float(np.sum((halves[-1] - w_k) ** 2))
                rhs = (1.0 - c.rho) * sigma_prev + c.C * move_sq + c.D2
                keep("recur", _row("sigma-recursion", kind.name, sigma_sq, rhs, 0, 1e-9))
            sigma_prev = sigma_sq
    rows.append(worst["diff"])
    if "recur" in worst:
        rows.append(worst["recur"])
    rows.append(_row("residual-second-moment", kind.name, s2, c.D3, 0, 1e-9))
    return rows


def verify_assumption2(
    kind: EstimatorKind,
    p: VIProblem,
    n_points: int = 5,
    n_samples: int = 0,
    seed: int = 0,
) -> VerificationReport:
    """Check the second-moment contract against the strategy's constants.

    Emits the worst-case row per inequality: the anchored-difference bound
    (A, B, D1), the residual bound (E, D3), and for the stored-half-step
    strategy the memory recursion (rho, C, D2).
    """
    if kind.name == "past":
        return VerificationReport(_second_moment_rows_past(kind, p, n_points, seed))
    return VerificationReport(_second_moment_rows_static(kind, p, n_points, n_samples, seed))
