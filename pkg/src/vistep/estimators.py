"""Gradient-estimation strategies for the extra-step loop.

Each strategy produces the pair (g^k, g^{k+1/2}) consumed by one iteration:
g^k drives the look-ahead half step, g^{k+1/2} the corrected full step.
Snapshot strategies (vr, coord, quant, qvr, is, local) anchor g^k at a
cached F(w) and build g^{k+1/2} as an unbiased correction around it;
fulldet/noisy call the oracle directly and past reuses the previous half
step's oracle value.

Every strategy carries the constants (A, B, C, E, D1, D2, D3, rho) of its
second-moment contract, the recommended momentum tau*, and a cost ledger
(oracle calls, coordinates, bits, communications).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import ProxSpec, RngStream, Vector, prox_eval
from .problems import MixingVI, VIProblem, eval_component, eval_full

KINDS = ("fulldet", "noisy", "past", "vr", "coord", "quant", "qvr", "is", "local")

# strategies whose g^k is the cached F(w)
SNAPSHOT_KINDS = ("vr", "coord", "quant", "qvr", "is", "local")


@dataclass(frozen=True)
class Quantizer:
    """Unbiased random compression Q with E[Q(x)] = x, E|Q(x)|^2 = omega|x|^2.

    identity: Q(x) = x, omega = 1.
    randk:    keep k of d coordinates (uniform subset), scale kept entries
              by d/k, zero the rest; omega = d/k.
    """

    kind: str
    k: int = 0
    d: int = 0

    def __post_init__(self):
        if self.kind not in ("identity", "randk"):
            raise ValueError(f"unknown quantizer kind {self.kind!r}")
        if self.kind == "randk" and not 1 <= self.k <= self.d:
            raise ValueError("randk needs 1 <= k <= d")

    @property
    def omega(self) -> float:
        if self.kind == "identity":
            return 1.0
        return self.d / self.k


def quantize(q: Quantizer, x: Vector, rng: RngStream) -> Vector:
    """One draw of Q(x)."""
    if q.kind == "identity":
        return np.asarray(x, dtype=float).copy()
    x = np.asarray(x, dtype=float)
    if x.size != q.d:
        raise ValueError(f"vector length {x.size} does not match quantizer dimension {q.d}")
    idx = rng.subset(q.d, q.k)
    out = np.zeros_like(x)
    out[idx] = x[idx] * (q.d / q.k)
    return out


@dataclass(frozen=True)
class EstimatorKind:
    """Strategy tag plus its variant-specific parameters.

    sigma     oracle noise level for noisy/past (E|noise|^2 = sigma^2),
    quantizer required by quant/qvr,
    weights   component probabilities for is (positive, summing to 1),
    tau_split branch probability of the local strategy's Phi part.
    """

    name: str
    sigma: float = 0.0
    quantizer: Quantizer | None = None
    weights: tuple[float, ...] | None = None
    tau_split: float = 0.0

    def __post_init__(self):
        if self.name not in KINDS:
            raise ValueError(f"unknown estimator kind {self.name!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.name in ("quant", "qvr") and self.quantizer is None:
            raise ValueError(f"{self.name} requires a quantizer")
        if self.name == "is":
            if self.weights is None or len(self.weights) == 0:
                raise ValueError("is requires component weights")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("is weights must be positive and sum to 1")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if self.name == "local" and not 0.0 < self.tau_split < 1.0:
            raise ValueError("local requires 0 < tau_split < 1")


def fulldet() -> EstimatorKind:
    return EstimatorKind("fulldet")


def noisy(sigma: float) -> EstimatorKind:
    return EstimatorKind("noisy", sigma=sigma)


def past(sigma: float = 0.0) -> EstimatorKind:
    return EstimatorKind("past", sigma=sigma)


def vr() -> EstimatorKind:
    return EstimatorKind("vr")


def coord() -> EstimatorKind:
    return EstimatorKind("coord")


def quant(quantizer: Quantizer) -> EstimatorKind:
    return EstimatorKind("quant", quantizer=quantizer)


def qvr(quantizer: Quantizer) -> EstimatorKind:
    return EstimatorKind("qvr", quantizer=quantizer)


def importance(weights) -> EstimatorKind:
    return EstimatorKind("is", weights=tuple(float(w) for w in weights))


def local(tau_split: float) -> EstimatorKind:
    return EstimatorKind("local", tau_split=tau_split)


@dataclass
class CostLedger:
    """Monotone counters of everything a run consumes or transmits."""

    full_calls: int = 0
    comp_calls: int = 0
    coords: int = 0
    bits: int = 0
    comms: int = 0
    local_steps: int = 0


def _dense_bits(d: int) -> int:
    return 64 * d


def _coord_bits(d: int) -> int:
    return 64 + math.ceil(math.log2(d)) if d > 1 else 64


def _payload_bits(q: Quantizer, d: int) -> int:
    if q.kind == "identity":
        return _dense_bits(d)
    return q.k * _coord_bits(d)


@dataclass
class EstimatorState:
    """Mutable per-run state: snapshot anchor w, the cached F(w), the past
    strategy's stored half-step value and sigma memory, and the ledger."""

    kind: EstimatorKind
    w: Vector
    fw: Vector | None = None
    past_g: Vector | None = None
    pending_half: Vector | None = None
    sigma_sq: float = 0.0
    costs: CostLedger = field(default_factory=CostLedger)
    cum_p: np.ndarray | None = None


def _noisy_full(p: VIProblem, z: Vector, sigma: float, rng: RngStream, costs: CostLedger) -> Vector:
    """Full oracle call, optionally with isotropic noise of total variance
    sigma^2; counts one full call and one dense transmission."""
    costs.full_calls += 1
    costs.bits += _dense_bits(p.d)
    v = eval_full(p, z)
    if sigma > 0:
        v = v + (sigma / math.sqrt(p.d)) * rng.normal(p.d)
    return v


def _refresh_cache(state: EstimatorState, p: VIProblem) -> None:
    """Recompute the F(w) cache after w moved, paying the refresh cost."""
    name = state.kind.name
    if name in ("vr", "is", "qvr"):
        comps = [eval_component(p, m, state.w) for m in range(p.M)]
        state.fw = np.mean(comps, axis=0)
        state.costs.comp_calls += p.M
        state.costs.bits += _dense_bits(p.d)
    elif name in ("coord", "quant"):
        state.fw = eval_full(p, state.w)
        state.costs.full_calls += 1
        state.costs.bits += _dense_bits(p.d)
    elif name == "local":
        state.fw = eval_full(p, state.w)
        state.costs.full_calls += 1
        state.costs.comms += 1
        state.costs.bits += _dense_bits(p.d)


def init_estimator(kind: EstimatorKind, p: VIProblem, z0: Vector, rng: RngStream) -> EstimatorState:
    """Set up the state at z^0 = w^0, paying any cache-fill cost."""
    if kind.name == "local" and not isinstance(p.payload, MixingVI):
        raise TypeError("local estimator requires a mixing problem")
    if kind.name == "is" and len(kind.weights) != p.M:
        raise ValueError(f"is weights have length {len(kind.weights)}, problem has M={p.M}")
    state = EstimatorState(kind=kind, w=np.asarray(z0, dtype=float).copy())
    if kind.name == "past":
        state.past_g = _noisy_full(p, state.w, kind.sigma, rng, state.costs)
    elif kind.name in SNAPSHOT_KINDS:
        _refresh_cache(state, p)
    if kind.name == "is":
        state.cum_p = np.cumsum(np.asarray(kind.weights, dtype=float))
    return state


def _draw_component(state: EstimatorState, M: int, rng: RngStream) -> int:
    if state.kind.name == "is":
        u = rng.uniform()
        return min(int(np.searchsorted(state.cum_p, u, side="right")), M - 1)
    return rng.integer(M)


def est_pair(
    state: EstimatorState,
    p: VIProblem,
    z_bar: Vector,
    z_k: Vector,
    prox: ProxSpec,
    gamma: float,
    rng: RngStream,
) -> tuple[Vector, Vector, Vector]:
    """One iteration's estimates: returns (g^k, g^{k+1/2}, z^{k+1/2}) where
    z^{k+1/2} = prox(z_bar - gamma*g^k) and E[g^{k+1/2} | z^{k+1/2}] equals
    F(z^{k+1/2}).  Updates the cost ledger as a side effect."""
    kind = state.kind
    name = kind.name
    costs = state.costs
    d = p.d

    if name in ("fulldet", "noisy"):
        g_k = _noisy_full(p, z_k, kind.sigma, rng, costs)
        z_half = prox_eval(prox, gamma, z_bar - gamma * g_k)
        g_half = _noisy_full(p, z_half, kind.sigma, rng, costs)
        return g_k, g_half, z_half

    if name == "past":
        if state.past_g is None:
            raise RuntimeError("past estimator used before initialization")
        g_k = state.past_g
        z_half = prox_eval(prox, gamma, z_bar - gamma * g_k)
        g_half = _noisy_full(p, z_half, kind.sigma, rng, costs)
        state.sigma_sq = float(np.sum((g_half - g_k) ** 2))
        state.pending_half = g_half
        return g_k, g_half, z_half

    if state.fw is None:
        raise RuntimeError("snapshot estimator used before initialization")
    g_k = state.fw
    z_half = prox_eval(prox, gamma, z_bar - gamma * g_k)

    if name == "vr":
        m = _draw_component(state, p.M, rng)
        a = eval_component(p, m, z_half)
        b = eval_component(p, m, state.w)
        costs.comp_calls += 2
        costs.bits += _dense_bits(d)
        g_half = (a - b) + state.fw
    elif name == "coord":
        i = rng.integer(d)
        fz = eval_full(p, z_half)
        costs.coords += 1
        costs.bits += _coord_bits(d)
        g_half = state.fw.copy()
        g_half[i] += d * (fz[i] - state.fw[i])
    elif name == "quant":
        fz = eval_full(p, z_half)
        costs.full_calls += 1
        costs.bits += _payload_bits(kind.quantizer, d)
        g_half = quantize(kind.quantizer, fz - state.fw, rng) + state.fw
    elif name == "qvr":
        m = _draw_component(state, p.M, rng)
        a = eval_component(p, m, z_half)
        b = eval_component(p, m, state.w)
        costs.comp_calls += 2
        costs.bits += _payload_bits(kind.quantizer, d)
        g_half = quantize(kind.quantizer, a - b, rng) + state.fw
    elif name == "is":
        m = _draw_component(state, p.M, rng)
        a = eval_component(p, m, z_half)
        b = eval_component(p, m, state.w)
        costs.comp_calls += 2
        costs.bits += _dense_bits(d)
        scale = 1.0 / (p.M * kind.weights[m])
        g_half = scale * (a - b) + state.fw
    elif name == "local":
        mix: MixingVI = p.payload
        u = rng.uniform()
        if u < kind.tau_split:
            diff = (mix.phi(z_half) - mix.phi(state.w)) / kind.tau_split
            costs.local_steps += 1
        else:
            diff = (mix.consensus(z_half) - mix.consensus(state.w)) / (1.0 - kind.tau_split)
            costs.comms += 1
            costs.bits += _dense_bits(d)
        g_half = diff + state.fw
    else:  # pragma: no cover
        raise ValueError(f"unknown estimator kind {name!r}")
    return g_k, g_half, z_half


def snapshot_update(state: EstimatorState, z_next: Vector, tau: float, rng: RngStream, p: VIProblem) -> bool:
    """End-of-iteration update: with probability 1 - tau (one uniform draw)
    move w to z_next and refresh the F(w) cache; the past strategy commits
    its stored half-step value regardless.  Returns whether w moved."""
    if not 0.0 <= tau < 1.0:
        raise ValueError("need 0 <= tau < 1")
    refreshed = rng.uniform() < 1.0 - tau
    if refreshed:
        state.w = np.asarray(z_next, dtype=float).copy()
        _refresh_cache(state, p)
    if state.kind.name == "past" and state.pending_half is not None:
        state.past_g = state.pending_half
        state.pending_half = None
    return refreshed


@dataclass(frozen=True)
class AssumptionConstants:
    """The second-moment contract constants of one strategy:

    E|g^{k+1/2} - g^k|^2      <= A*E|z^{k+1/2}-w^k|^2 + B*E[sigma_k^2] + D1
    E[sigma_{k+1}^2]          <= (1-rho)*E[sigma_k^2]
                                 + C*E|z^{k+1/2}-w^k|^2 + D2
    E|g^{k+1/2}-F(z^{k+1/2})|^2 <= E_*E|z^{k+1/2}-w^k|^2 + D3

    tau_star is the recommended momentum, T the strongly monotone Lyapunov
    weight 4B/rho (0 when the strategy carries no sigma memory).
    """

    A: float
    B: float
    C: float
    E: float
    D1: float
    D2: float
    D3: float
    rho: float
    tau_star: float
    T: float


def optimal_tau(
    kind: EstimatorKind,
    M: int | None = None,
    d: int | None = None,
    L: float | None = None,
    lam: float | None = None,
) -> float:
    """Recommended momentum: balances per-iteration cost against the
    snapshot refresh cost (refresh happens with probability 1 - tau)."""
    name = kind.name
    if name in ("fulldet", "noisy", "past"):
        return 0.0
    if name in ("vr", "is"):
        if M is None:
            raise ValueError("need M for the finite-sum tau rule")
        return M / (M + 1.0)
    if name == "coord":
        if d is None:
            raise ValueError("need d for the coordinate tau rule")
        return d / (d + 1.0)
    if name in ("quant", "qvr"):
        omega = kind.quantizer.omega
        return omega / (omega + 1.0)
    if name == "local":
        if L is None or lam is None:
            raise ValueError("need L and lam for the local tau rule")
        return L / (L + lam)
    raise ValueError(f"unknown estimator kind {name!r}")  # pragma: no cover


def assumption_constants(
    kind: EstimatorKind,
    L: float,
    D: float = 0.0,
    d: int | None = None,
    M: int | None = None,
    L_m=None,
    D_m=None,
    lam: float | None = None,
) -> AssumptionConstants:
    """The exact constants table of the strategy.

    L and D are the full-operator bounded-Lipschitz constants (for vr/qvr,
    the common bound over every component and the full operator).  For the
    is strategy the per-component L_m/D_m refer to components of the
    (1/M)-averaged sum and are rescaled internally by 1/M so that the sum
    of the rescaled components is the full operator.  For local, L is the
    stacked worker operator's constant and lam the consensus strength.
    """
    name = kind.name
    A = B = C = E = D1 = D2 = D3 = 0.0
    rho = 1.0
    tau_star = 0.0

    if name in ("fulldet", "noisy"):
        s = kind.sigma
        A = 3.0 * L * L
        D1 = 3.0 * D * D + 6.0 * s * s
        D3 = s * s
    elif name == "past":
        s = kind.sigma
        rho = 1.0 / 3.0
        B = 3.0
        C = 2.0 * L * L
        D1 = 6.0 * s * s
        D2 = 4.0 * D * D + 12.0 * s * s
        D3 = s * s
    elif name == "vr":
        A = L * L
        D1 = D * D
        E = 4.0 * L * L
        D3 = 4.0 * D * D
        if M is not None:
            tau_star = optimal_tau(kind, M=M)
    elif name == "coord":
        if d is None:
            raise ValueError("coord constants need the dimension d")
        A = d * L * L
        D1 = d * D * D
        E = 2.0 * (d + 1) * L * L
        D3 = 2.0 * (d + 1) * D * D
        tau_star = optimal_tau(kind, d=d)
    elif name in ("quant", "qvr"):
        omega = kind.quantizer.omega
        A = omega * L * L
        D1 = omega * D * D
        E = 2.0 * (omega + 1.0) * L * L
        D3 = 2.0 * (omega + 1.0) * D * D
        tau_star = optimal_tau(kind)
    elif name == "is":
        if L_m is None or M is None:
            raise ValueError("is constants need per-component L_m and M")
        Lt = np.asarray(L_m, dtype=float) / M
        Dt = (np.asarray(D_m, dtype=float) if D_m is not None else np.zeros(M)) / M
        pw = np.asarray(kind.weights, dtype=float)
        if len(pw) != len(Lt):
            raise ValueError("is weights and L_m lengths differ")
        S = float(np.sum(Lt * Lt / pw))
        SD = float(np.sum(Dt * Dt / pw))
        A = S
        D1 = SD
        E = 2.0 * (S + L * L)
        D3 = 2.0 * (SD + D * D)
        tau_star = optimal_tau(kind, M=M)
    elif name == "local":
        if lam is None:
            raise ValueError("local constants need the consensus strength lam")
        t = kind.tau_split
        A = L * L / t + lam * lam / (1.0 - t)
        L_full = L + lam
        E = 2.0 * (A + L_full * L_full)
        D3 = 2.0 * D * D
        tau_star = optimal_tau(kind, L=L, lam=lam)
    else:  # pragma: no cover
        raise ValueError(f"unknown estimator kind {name!r}")

    T = 4.0 * B / rho if B > 0 else 0.0
    return AssumptionConstants(A=A, B=B, C=C, E=E, D1=D1, D2=D2, D3=D3, rho=rho, tau_star=tau_star, T=T)


def importance_weights(L_m) -> np.ndarray:
    """Optimal component probabilities p_m proportional to L_m."""
    L_m = np.asarray(L_m, dtype=float)
    if L_m.ndim != 1 or L_m.size == 0 or np.any(L_m <= 0):
        raise ValueError("need a nonempty list of positive constants")
    return L_m / L_m.sum()


def constants_for_problem(kind: EstimatorKind, p: VIProblem) -> AssumptionConstants:
    """Constants table with L/D taken from the problem, per-kind convention."""
    name = kind.name
    if name in ("vr", "qvr"):
        L = max(float(p.L), float(np.max(p.L_m)) if p.L_m is not None else 0.0)
        D = max(float(p.D), float(np.max(p.D_m)) if p.D_m is not None else 0.0)
        return assumption_constants(kind, L, D, M=p.M)
    if name == "is":
        return assumption_constants(kind, p.L, p.D, M=p.M, L_m=p.L_m, D_m=p.D_m)
    if name == "coord":
        return assumption_constants(kind, p.L, p.D, d=p.d)
    if name == "local":
        mix: MixingVI = p.payload
        return assumption_constants(kind, mix.l_phi, p.D, lam=mix.lam)
    return assumption_constants(kind, p.L, p.D, M=p.M)


# ---------------------------------------------------------------------------
# Sampling views of the half-step estimate, shared with the verification
# suite: the same correction formulas as est_pair, exposed as exhaustive
# atoms (for exact expectations) and as batched draws (for Monte Carlo).


def _component_diffs(p: VIProblem, z_half: Vector, w: Vector) -> np.ndarray:
    return np.stack([eval_component(p, m, z_half) - eval_component(p, m, w) for m in range(p.M)])


def half_atoms(kind: EstimatorKind, p: VIProblem, z_half: Vector, w: Vector, fw: Vector):
    """All possible g^{k+1/2} values with their probabilities, for kinds
    whose randomness is finite and enumerable.  Returns [(prob, value)]."""
    name = kind.name
    d = p.d
    if name == "fulldet":
        return [(1.0, eval_full(p, z_half))]
    if name == "vr":
        diffs = _component_diffs(p, z_half, w)
        return [(1.0 / p.M, diffs[m] + fw) for m in range(p.M)]
    if name == "is":
        diffs = _component_diffs(p, z_half, w)
        return [
            (kind.weights[m], diffs[m] / (p.M * kind.weights[m]) + fw)
            for m in range(p.M)
        ]
    if name == "coord":
        fz = eval_full(p, z_half)
        atoms = []
        for i in range(d):
            v = fw.copy()
            v[i] += d * (fz[i] - fw[i])
            atoms.append((1.0 / d, v))
        return atoms
    if name == "quant":
        return [(prob, qv + fw) for prob, qv in _quantizer_atoms(kind.quantizer, eval_full(p, z_half) - fw)]
    if name == "qvr":
        diffs = _component_diffs(p, z_half, w)
        atoms = []
        for m in range(p.M):
            for prob, qv in _quantizer_atoms(kind.quantizer, diffs[m]):
                atoms.append((prob / p.M, qv + fw))
        return atoms
    if name == "local":
        mix: MixingVI = p.payload
        t = kind.tau_split
        phi_d = (mix.phi(z_half) - mix.phi(w)) / t
        con_d = (mix.consensus(z_half) - mix.consensus(w)) / (1.0 - t)
        return [(t, phi_d + fw), (1.0 - t, con_d + fw)]
    raise ValueError(f"estimator kind {name!r} is not enumerable")


def _quantizer_atoms(q: Quantizer, x: Vector):
    if q.kind == "identity":
        return [(1.0, np.asarray(x, dtype=float).copy())]
    total = math.comb(q.d, q.k)
    atoms = []
    for sub in combinations(range(q.d), q.k):
        v = np.zeros(q.d)
        idx = list(sub)
        v[idx] = np.asarray(x, dtype=float)[idx] * (q.d / q.k)
        atoms.append((1.0 / total, v))
    return atoms


def sample_half_batch(
    kind: EstimatorKind,
    p: VIProblem,
    z_half: Vector,
    w: Vector,
    fw: Vector | None,
    rng: RngStream,
    n: int,
):
    """n independent draws of g^{k+1/2} as an (n, d) array.

    Index and subset draws use the same uniform-to-index mapping as the
    scalar path in est_pair; gaussian oracle noise is drawn blockwise and
    is therefore distribution-equal (not stream-equal) to per-call draws.
    """
    name = kind.name
    d = p.d
    if name == "fulldet":
        return np.tile(eval_full(p, z_half), (n, 1))
    if name in ("noisy", "past"):
        s = kind.sigma
        base = eval_full(p, z_half)
        return base + (s / math.sqrt(d)) * rng.normal((n, d))
    if name in ("vr", "is"):
        diffs = _component_diffs(p, z_half, w)
        if name == "vr":
            idx = rng.integers(p.M, n)
            return diffs[idx] + fw
        cum = np.cumsum(np.asarray(kind.weights, dtype=float))
        u = np.atleast_1d(rng.uniform(n))
        idx = np.minimum(np.searchsorted(cum, u, side="right"), p.M - 1)
        scales = 1.0 / (p.M * np.asarray(kind.weights, dtype=float))
        return diffs[idx] * scales[idx][:, None] + fw
    if name == "coord":
        fz = eval_full(p, z_half)
        idx = rng.integers(d, n)
        out = np.tile(fw, (n, 1))
        out[np.arange(n), idx] += d * (fz[idx] - fw[idx])
        return out
    if name in ("quant", "qvr"):
        q = kind.quantizer
        if name == "quant":
            diffs = (eval_full(p, z_half) - fw)[None, :]
            rows = np.zeros(n, dtype=np.int64)
        else:
            diffs = _component_diffs(p, z_half, w)
            rows = rng.integers(p.M, n)
        if q.kind == "identity":
            return diffs[rows] + fw
        subs = rng.subsets(d, q.k, n)
        out = np.tile(fw, (n, 1))
        rsel = np.arange(n)[:, None]
        out[rsel, subs] += (q.d / q.k) * diffs[rows[:, None], subs]
        return out
    if name == "local":
        mix: MixingVI = p.payload
        t = kind.tau_split
        phi_d = (mix.phi(z_half) - mix.phi(w)) / t
        con_d = (mix.consensus(z_half) - mix.consensus(w)) / (1.0 - t)
        u = np.atleast_1d(rng.uniform(n))
        return np.where((u < t)[:, None], phi_d[None, :], con_d[None, :]) + fw
    raise ValueError(f"cannot sample estimator kind {name!r}")
