"""Monte Carlo closed loop: true mode trajectory, transmission outcomes,
ACK-driven holding time, belief recursion, policy execution, and discounted
cost statistics.

The plant itself is never sampled: the stage cost depends only on the holding
time, so an episode is fully described by (mode, action, outcome, tau,
belief). Within a step the draws are ordered mode transition first, then the
success Bernoulli (success probability is read at the post-transition mode,
matching the kernel factorization), and the belief then updates on the
observed next holding time.

Replications use independent seed streams derived from the base seed by
SplitMix64 (state = seed + (k+1) * golden gamma, mixed), so a (seed, config)
pair fixes every run bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from .belief_mdp import Solution, belief_update
from .channel import ChannelModel
from .stochastic_orders import ZeroLikelihoodError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(seed: int, k: int) -> int:
    """Output of the SplitMix64 stream seeded at ``seed`` after k+1 advances,
    used as the seed of replication k."""
    z = (seed + (k + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


# --- policies: callables (tau, belief) -> action ---

def never_stop(tau: int, b: float) -> int:
    return 0


def stop_immediately(tau: int, b: float) -> int:
    return 1


class FixedThresholdPolicy:
    """Stop as soon as the belief reaches a fixed level (ties stop)."""

    def __init__(self, threshold: float):
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        self.threshold = threshold

    def __call__(self, tau: int, b: float) -> int:
        return 1 if b >= self.threshold else 0


class LatticePolicy:
    """Policy table on the (tau, belief-grid) lattice; off-grid beliefs act
    by nearest-grid-point lookup and holding times clamp to the lattice."""

    def __init__(self, policy: np.ndarray, grid_n: int, tau_max: int):
        policy = np.asarray(policy)
        if policy.shape != (tau_max + 1, grid_n + 1):
            raise ValueError(f"policy must have shape {(tau_max + 1, grid_n + 1)}, "
                             f"got {policy.shape}")
        self.policy = policy.astype(np.int64)
        self.grid_n = grid_n
        self.tau_max = tau_max

    @classmethod
    def from_solution(cls, sol: Solution) -> "LatticePolicy":
        return cls(sol.policy, sol.grid_n, sol.tau_max)

    def __call__(self, tau: int, b: float) -> int:
        i = int(round(b * self.grid_n))
        i = min(max(i, 0), self.grid_n)
        return int(self.policy[min(tau, self.tau_max), i])


@dataclass(frozen=True)
class SimConfig:
    """Batch settings: episode length, replication count, base seed."""

    horizon: int
    n_runs: int
    seed: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class SimTrace:
    """Per-step record of one episode.

    ``success`` in row t is the outcome of the transmission initiated at step
    t (-1 on the stop row, where nothing is transmitted); ``theta_next`` is
    the mode that governed that outcome. ``stage_cost`` is the undiscounted
    cost incurred at the step (the stopping fee on the stop row).
    """

    t: np.ndarray
    theta: np.ndarray
    action: np.ndarray
    success: np.ndarray
    tau: np.ndarray
    belief: np.ndarray
    stage_cost: np.ndarray
    theta_next: np.ndarray
    stopped: bool
    stop_time: int | None
    discounted_cost: float

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class SimStats:
    """Aggregates over a batch of independent episodes."""

    mean_discounted_cost: float
    stderr: float
    n_runs: int
    horizon: int
    stop_time_histogram: dict
    mode_occupancy: tuple
    success_rate_per_mode: tuple
    attempts_per_mode: tuple
    truncation_bias_bound: float


def run_episode(ch: ChannelModel, holding_costs: np.ndarray, c_stop: float,
                gamma: float, policy, horizon: int,
                rng: np.random.Generator) -> SimTrace:
    """Simulate one episode of at most ``horizon`` steps.

    The initial state is tau = 0, mode drawn from the channel's initial mode
    law, belief equal to the initial unfavorable-mode probability. The
    uniform variates for the whole horizon are drawn up front (one for the
    initial mode, two per step), so the stream consumed is fixed regardless
    of early stopping.
    """
    holding = np.asarray(holding_costs, dtype=float)
    if len(holding) < horizon:
        raise ValueError(f"holding cost table must cover tau < horizon "
                         f"({horizon}), got length {len(holding)}")
    p00 = float(ch.mode_kernel[0, 0, 0])
    p10 = float(ch.mode_kernel[0, 1, 0])
    p01 = float(ch.mode_kernel[0, 0, 1])
    p11 = float(ch.mode_kernel[0, 1, 1])
    lam0 = float(ch.lam[0, 0])
    lam1 = float(ch.lam[1, 0])
    u = rng.random(2 * horizon + 1).tolist()
    theta = 0 if u[0] < ch.initial_mode_dist[0] else 1
    tau = 0
    b = ch.initial_belief
    rec_t, rec_theta, rec_a, rec_succ = [], [], [], []
    rec_tau, rec_b, rec_cost, rec_theta_next = [], [], [], []
    J = 0.0
    disc = 1.0
    stopped = False
    stop_time = None
    for t in range(horizon):
        a = policy(tau, b)
        rec_t.append(t)
        rec_theta.append(theta)
        rec_a.append(a)
        rec_tau.append(tau)
        rec_b.append(b)
        if a == 1:
            rec_succ.append(-1)
            rec_theta_next.append(-1)
            rec_cost.append(c_stop)
            J += disc * c_stop
            stopped = True
            stop_time = t
            break
        if a != 0:
            raise ValueError(f"policy returned unknown action {a}")
        cost_t = holding[tau]
        rec_cost.append(cost_t)
        J += disc * cost_t
        theta = 0 if u[2 * t + 1] < (p00 if theta == 0 else p10) else 1
        success = u[2 * t + 2] < (lam0 if theta == 0 else lam1)
        rec_succ.append(1 if success else 0)
        rec_theta_next.append(theta)
        tau = 0 if success else tau + 1
        # posterior on the observed next holding time, exact (no grid);
        # operation order mirrors belief_update so the logged beliefs match
        # a recomputation bit for bit
        bhat = min(max(p01 * (1.0 - b) + p11 * b, 0.0), 1.0)
        p_succ = lam0 * (1.0 - bhat) + lam1 * bhat
        if success:
            num, den = lam1 * bhat, p_succ
        else:
            num, den = (1.0 - lam1) * bhat, 1.0 - p_succ
        if den <= 0.0:
            raise ZeroLikelihoodError("observed a zero-probability branch; "
                                      "channel tables are inconsistent")
        b = min(max(num / den, 0.0), 1.0)
        disc *= gamma
    return SimTrace(t=np.array(rec_t, dtype=np.int64),
                    theta=np.array(rec_theta, dtype=np.int8),
                    action=np.array(rec_a, dtype=np.int8),
                    success=np.array(rec_succ, dtype=np.int8),
                    tau=np.array(rec_tau, dtype=np.int64),
                    belief=np.array(rec_b, dtype=float),
                    stage_cost=np.array(rec_cost, dtype=float),
                    theta_next=np.array(rec_theta_next, dtype=np.int8),
                    stopped=stopped, stop_time=stop_time, discounted_cost=J)


def run_batch(ch: ChannelModel, holding_costs: np.ndarray, c_stop: float,
              gamma: float, policy, simcfg: SimConfig,
              collect_traces: bool = False):
    """Run ``n_runs`` independent episodes and aggregate their statistics.

    Returns SimStats, or (SimStats, traces) when collect_traces is set. Means
    use numpy's pairwise summation; the standard error is the sample standard
    deviation over sqrt(n_runs).
    """
    costs = np.empty(simcfg.n_runs)
    stop_hist: dict[int, int] = {}
    occupancy = np.zeros(2, dtype=np.int64)
    attempts = np.zeros(2, dtype=np.int64)
    successes = np.zeros(2, dtype=np.int64)
    traces = []
    for k in range(simcfg.n_runs):
        rng = np.random.default_rng(splitmix64(simcfg.seed, k))
        tr = run_episode(ch, holding_costs, c_stop, gamma, policy,
                         simcfg.horizon, rng)
        costs[k] = tr.discounted_cost
        if tr.stopped:
            stop_hist[tr.stop_time] = stop_hist.get(tr.stop_time, 0) + 1
        occupancy += np.bincount(tr.theta[tr.theta >= 0], minlength=2)[:2]
        live = tr.theta_next >= 0
        attempts += np.bincount(tr.theta_next[live], minlength=2)[:2]
        successes += np.bincount(tr.theta_next[live],
                                 weights=tr.success[live],
                                 minlength=2)[:2].astype(np.int64)
        if collect_traces:
            traces.append(tr)
    total_steps = int(occupancy.sum())
    occ = tuple((occupancy / total_steps).tolist()) if total_steps else (0.0, 0.0)
    rates = tuple(float(successes[m] / attempts[m]) if attempts[m] else float("nan")
                  for m in range(2))
    max_stage = float(max(np.max(holding_costs[:simcfg.horizon]), c_stop))
    bias = gamma**simcfg.horizon * max_stage / (1.0 - gamma)
    stats = SimStats(
        mean_discounted_cost=float(np.mean(costs)),
        stderr=float(np.std(costs, ddof=1) / np.sqrt(simcfg.n_runs))
        if simcfg.n_runs > 1 else 0.0,
        n_runs=simcfg.n_runs, horizon=simcfg.horizon,
        stop_time_histogram=dict(sorted(stop_hist.items())),
        mode_occupancy=occ, success_rate_per_mode=rates,
        attempts_per_mode=tuple(int(x) for x in attempts),
        truncation_bias_bound=float(bias))
    return (stats, traces) if collect_traces else stats


def validate_belief_consistency(trace: SimTrace, ch: ChannelModel) -> bool:
    """Recompute the belief sequence from (tau, action, outcome) and compare
    bitwise against the logged beliefs."""
    b = ch.initial_belief
    for i in range(len(trace)):
        if trace.belief[i] != b:
            return False
        if trace.action[i] == 1:
            return True
        y = 0 if trace.success[i] == 1 else int(trace.tau[i]) + 1
        b = belief_update(ch, int(trace.tau[i]), b, y, 0)
    return True
