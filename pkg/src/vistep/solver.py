"""Extra-step solver with snapshot momentum.

One iteration from (z^k, w^k):

    z_bar     = tau * z^k + (1 - tau) * w^k
    z^{k+1/2} = prox_{gamma h}(z_bar - gamma * g^k)
    z^{k+1}   = prox_{gamma h}(z_bar - gamma * g^{k+1/2})
    w^{k+1}   = z^{k+1} with probability 1 - tau, else w^k

where (g^k, g^{k+1/2}) come from the configured estimation strategy.
tau = 0 is the classic extra-step method: z_bar = z^k and w tracks z.

Step sizes follow the per-strategy theory bounds; progress is tracked by
the Lyapunov weight tau*|z - z*|^2 + |w - z*|^2 + T*gamma^2*sigma_k^2 in
the strongly monotone regime and by the duality gap of the averaged half
iterate in the monotone regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RngStream, Vector, prox_eval, rng_stream
from .estimators import (
    AssumptionConstants,
    EstimatorKind,
    EstimatorState,
    constants_for_problem,
    est_pair,
    init_estimator,
    snapshot_update,
)
from .metrics import duality_gap_bilinear
from .problems import BilinearGame, VIProblem, initial_point

REGIMES = ("mono", "sm")

COST_COLUMNS = ("full_calls", "comp_calls", "coords", "bits", "comms", "local_steps")


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.  gamma=None takes the theory bound for the regime,
    tau=None the strategy's recommended momentum.  Gap columns are filled
    every gap_every rows (and at the last row) when the problem supports a
    closed-form gap."""

    kind: EstimatorKind
    K: int
    seed: int = 0
    regime: str = "mono"
    gamma: float | None = None
    tau: float | None = None
    gap_every: int = 1

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("need K >= 0")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.tau is not None and not 0.0 <= self.tau < 1.0:
            raise ValueError("need 0 <= tau < 1")
        if self.gap_every < 1:
            raise ValueError("need gap_every >= 1")


@dataclass
class RunTrace:
    """Per-iteration record, rows k = 0..K.  Cost columns are cumulative;
    dist_sq/lyapunov are NaN without a known solution, gap columns NaN off
    the gap_every schedule or without a closed-form gap."""

    k: np.ndarray
    full_calls: np.ndarray
    comp_calls: np.ndarray
    coords: np.ndarray
    bits: np.ndarray
    comms: np.ndarray
    local_steps: np.ndarray
    dist_sq: np.ndarray
    lyapunov: np.ndarray
    gap_last: np.ndarray
    gap_avg: np.ndarray
    z_final: Vector
    w_final: Vector
    z_avg: Vector | None
    gamma: float
    tau: float
    T: float


def _safe_div(num: float, den: float) -> float:
    return np.inf if den == 0.0 else num / den


def step_size_bound(
    kind: EstimatorKind,
    regime: str,
    constants: AssumptionConstants,
    mu_F: float = 0.0,
    mu_h: float = 0.0,
    tau: float = 0.0,
) -> tuple[float, float]:
    """Largest step size the convergence theory allows, and the Lyapunov
    sigma-weight T that goes with it.

    Strongly monotone: gamma <= min{sqrt(1-tau)/(2*sqrt(2A+TC)),
    (1-tau)/(4(mu_F+mu_h))} with T = 4B/rho; monotone: gamma <=
    sqrt(1-tau)/(2*sqrt(2A+TC+E)) with T = 2B/rho.  The direct-oracle
    strategies use their sharper dedicated bounds (recovering L from the
    constants table): 1/(6L) and 1/(3L) for fulldet/noisy, and the stored
    half-step rule min{1/(12*sqrt(2)*L), 1/(3L)} for past.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if not 0.0 <= tau < 1.0:
        raise ValueError("need 0 <= tau < 1")
    c = constants
    name = kind.name
    mu = mu_F + mu_h

    if regime == "sm":
        if mu <= 0:
            raise ValueError("strongly monotone regime needs mu_F + mu_h > 0")
        T = 4.0 * c.B / c.rho if c.B > 0 else 0.0
        if name in ("fulldet", "noisy"):
            L = math.sqrt(c.A / 3.0)
            gamma = min(_safe_div(1.0, 6.0 * L), 1.0 / (4.0 * mu))
        elif name == "past":
            L = math.sqrt(c.C / 2.0)
            gamma = min(
                _safe_div(1.0, 12.0 * math.sqrt(2.0) * L),
                1.0 / (4.0 * mu),
                _safe_div(1.0, 3.0 * L),
            )
        else:
            gamma = min(
                _safe_div(math.sqrt(1.0 - tau), 2.0 * math.sqrt(2.0 * c.A + T * c.C)),
                (1.0 - tau) / (4.0 * mu),
            )
        return gamma, T

    T = 2.0 * c.B / c.rho if c.B > 0 else 0.0
    if name in ("fulldet", "noisy"):
        L = math.sqrt(c.A / 3.0)
        gamma = _safe_div(1.0, 3.0 * L)
    elif name == "past":
        L = math.sqrt(c.C / 2.0)
        gamma = min(_safe_div(1.0, 12.0 * math.sqrt(2.0) * L), _safe_div(1.0, 3.0 * L))
    else:
        gamma = _safe_div(math.sqrt(1.0 - tau), 2.0 * math.sqrt(2.0 * c.A + T * c.C + c.E))
    return gamma, T


def iterate_once(
    state: EstimatorState,
    p: VIProblem,
    z: Vector,
    tau: float,
    gamma: float,
    est_rng: RngStream,
    coin_rng: RngStream,
) -> tuple[Vector, Vector]:
    """One full iteration; returns (z^{k+1}, z^{k+1/2}).  Moves state.w."""
    z_bar = tau * z + (1.0 - tau) * state.w
    g_k, g_half, z_half = est_pair(state, p, z_bar, z, p.prox, gamma, est_rng)
    z_next = prox_eval(p.prox, gamma, z_bar - gamma * g_half)
    snapshot_update(state, z_next, tau, coin_rng, p)
    return z_next, z_half


def lyapunov_value(
    z: Vector,
    w: Vector,
    sigma_sq: float,
    z_star: Vector,
    tau: float,
    gamma: float,
    T: float,
) -> float:
    """tau*|z - z*|^2 + |w - z*|^2 + T*gamma^2*sigma_sq."""
    dz = float(np.sum((z - z_star) ** 2))
    dw = float(np.sum((w - z_star) ** 2))
    return tau * dz + dw + T * gamma * gamma * sigma_sq


def averaged_iterate(z_halves) -> Vector:
    """Mean of the recorded half iterates (rows of a 2d array, or a list)."""
    arr = np.asarray(z_halves, dtype=float)
    if arr.ndim == 1:
        return arr.copy()
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("need at least one iterate")
    return arr.mean(axis=0)


def _gap_supported(p: VIProblem) -> bool:
    return isinstance(p.payload, BilinearGame) and not p.prox.free


def run_solver(p: VIProblem, config: SolverConfig, z0: Vector | None = None) -> RunTrace:
    """Run K iterations from z^0 = w^0 and record the trace.

    Streams: seed/0 feeds the estimator, seed/1 the snapshot coin, seed/2
    the initial point, so strategies consuming different numbers of draws
    per iteration still share coins and starting point at equal seeds.
    """
    kind = config.kind
    consts = constants_for_problem(kind, p)
    tau = consts.tau_star if config.tau is None else float(config.tau)
    gamma_max, T = step_size_bound(kind, config.regime, consts, p.mu_F, p.mu_h, tau)
    gamma = float(config.gamma) if config.gamma is not None else gamma_max
    if not math.isfinite(gamma) or gamma <= 0:
        raise ValueError("no finite step size for this instance; pass gamma explicitly")

    est_rng = rng_stream(config.seed, 0)
    coin_rng = rng_stream(config.seed, 1)
    if z0 is None:
        z = initial_point(p, config.seed)
    else:
        z = np.asarray(z0, dtype=float).copy()
        if z.size != p.d:
            raise ValueError(f"z0 length {z.size} does not match problem dimension {p.d}")
    state = init_estimator(kind, p, z, est_rng)

    K = config.K
    rows = K + 1
    cost = {name: np.zeros(rows, dtype=np.int64) for name in COST_COLUMNS}
    dist_sq = np.full(rows, np.nan)
    lyap = np.full(rows, np.nan)
    gap_last = np.full(rows, np.nan)
    gap_avg = np.full(rows, np.nan)

    z_star = p.known_solution
    with_gap = _gap_supported(p)
    half_sum = np.zeros(p.d)
    half_count = 0
    last_half: Vector | None = None

    def record(row: int) -> None:
        for name in COST_COLUMNS:
            cost[name][row] = getattr(state.costs, name)
        if z_star is not None:
            dist_sq[row] = float(np.sum((z - z_star) ** 2))
            lyap[row] = lyapunov_value(z, state.w, state.sigma_sq, z_star, tau, gamma, T)
        on_schedule = row % config.gap_every == 0 or row == K
        if with_gap and half_count > 0 and on_schedule:
            gap_last[row] = duality_gap_bilinear(p.payload, last_half)
            gap_avg[row] = duality_gap_bilinear(p.payload, half_sum / half_count)

    record(0)
    for k in range(1, rows):
        z, z_half = iterate_once(state, p, z, tau, gamma, est_rng, coin_rng)
        half_sum += z_half
        half_count += 1
        last_half = z_half
        record(k)

    return RunTrace(
        k=np.arange(rows, dtype=np.int64),
        full_calls=cost["full_calls"],
        comp_calls=cost["comp_calls"],
        coords=cost["coords"],
        bits=cost["bits"],
        comms=cost["comms"],
        local_steps=cost["local_steps"],
        dist_sq=dist_sq,
        lyapunov=lyap,
        gap_last=gap_last,
        gap_avg=gap_avg,
        z_final=z,
        w_final=state.w.copy(),
        z_avg=half_sum / half_count if half_count else None,
        gamma=gamma,
        tau=tau,
        T=T,
    )
