"""Belief MDP over (holding time, unfavorable-mode belief).

State is the pair (tau, b): tau counts steps since the last delivered packet
and b is the posterior probability of the unfavorable channel mode given the
acknowledgement history. A step under action a observes the next holding time
y, which is 0 (success) or tau+1 (failure); the belief update and observation
likelihood follow from the channel's success table and mode kernel.

The solver discretizes b on a uniform grid and runs value iteration with the
Bellman operator; continuation values off the grid are read by piecewise
linear interpolation, and next holding times beyond the truncation level are
clamped to it (self-loop at the boundary; for a stable plant the holding cost
converges, so the truncation error is bounded). Convergence is measured in a
weighted sup-norm whose weight grows along tau only when the plant is
unstable, which is what keeps the operator an m-stage contraction despite
unbounded costs.
"""

from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel
from .lti_estimation import ConvergenceError, HoldingCostTable, LtiSystem
from .stochastic_orders import FiniteDist, ZeroLikelihoodError, fsd_dominates


def _frozen(a):
    a = np.array(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BeliefPoint:
    """Augmented state: holding time and belief of the unfavorable mode."""

    tau: int
    b: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("belief must lie in [0, 1]")


def predictive_belief(ch: ChannelModel, b: float, a: int = 0) -> float:
    """One-step-ahead probability of the unfavorable mode before observing
    the transmission outcome."""
    Pc = ch.mode_kernel[a]
    out = Pc[0, 1] * (1.0 - b) + Pc[1, 1] * b
    return min(max(out, 0.0), 1.0)


def observation_likelihood(ch: ChannelModel, tau: int, b: float, y: int,
                           a: int = 0) -> float:
    """Probability of observing next holding time y from (tau, b, a).

    Supported on {0, tau+1}: the success probability mixes the per-mode
    success rates by the predictive belief, and the two branches sum to 1.
    """
    bhat = predictive_belief(ch, b, a)
    lam0, lam1 = ch.lam[0, a], ch.lam[1, a]
    p_succ = lam0 * (1.0 - bhat) + lam1 * bhat
    if y == 0:
        return float(p_succ)
    if y == tau + 1:
        return float(1.0 - p_succ)
    return 0.0


def belief_update(ch: ChannelModel, tau: int, b: float, y: int, a: int = 0) -> float:
    """Posterior unfavorable-mode belief after observing y from (tau, b, a).

    Success conditions on the per-mode success rates, failure on their
    complements. Raises ZeroLikelihoodError when y is off the two-point
    support or the observed branch has probability 0.
    """
    bhat = predictive_belief(ch, b, a)
    lam0, lam1 = ch.lam[0, a], ch.lam[1, a]
    p_succ = lam0 * (1.0 - bhat) + lam1 * bhat
    if y == 0:
        num, den = lam1 * bhat, p_succ
    elif y == tau + 1:
        num, den = (1.0 - lam1) * bhat, 1.0 - p_succ
    else:
        raise ZeroLikelihoodError(f"y={y} is outside the support {{0, {tau + 1}}}")
    if den <= 0.0:
        raise ZeroLikelihoodError(f"observation y={y} has zero likelihood")
    return min(max(num / den, 0.0), 1.0)


@dataclass(frozen=True)
class StageCost:
    """Per-step cost: holding cost of the current tau plus the action fee."""

    holding: HoldingCostTable
    action_costs: np.ndarray

    def __post_init__(self):
        ca = np.asarray(self.action_costs, dtype=float)
        if ca.ndim != 1 or ca.size < 1:
            raise ValueError("action_costs must be a nonempty 1-D array")
        object.__setattr__(self, "action_costs", _frozen(ca))

    @property
    def n_actions(self) -> int:
        return self.action_costs.size

    @property
    def spectral_radius(self) -> float:
        return self.holding.spectral_radius


def stage_cost(cost: StageCost, tau: int, b: float, a: int) -> float:
    """Expected instantaneous cost at (tau, b, a). The belief does not enter:
    the holding cost is mode-independent, so averaging over modes cancels."""
    return float(cost.holding.costs[tau] + cost.action_costs[a])


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the belief-grid value iteration."""

    gamma: float
    tau_max: int = 60
    grid_n: int = 200
    vi_tol: float = 1e-9
    max_sweeps: int = 2000
    weight_eps: float = 0.01
    tie_break: str = "low"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.tau_max < 1:
            raise ValueError("tau_max must be >= 1")
        if self.grid_n < 2:
            raise ValueError("grid_n must be >= 2")
        if self.vi_tol <= 0:
            raise ValueError("vi_tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.weight_eps <= 0:
            raise ValueError("weight_eps must be positive")
        if self.tie_break not in ("low", "high"):
            raise ValueError("tie_break must be 'low' or 'high'")

    def belief_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_n + 1)


def weight_profile(spectral_radius: float, eps: float, tau_max: int) -> np.ndarray:
    """Weights s(tau) = base^(2 tau) with base = max(rho + eps, 1).

    The weight grows only for an unstable plant: that is the regime where the
    holding cost is unbounded and the plain sup-norm fails. For a stable plant
    the base clamps to 1 and the norm degenerates to the ordinary sup-norm.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = max(spectral_radius + eps, 1.0)
    return base ** (2.0 * np.arange(tau_max + 1))


def weighted_norm(f, spectral_radius: float, eps: float) -> float:
    """Sup over the lattice of |f| / s(tau); axis 0 of f indexes tau."""
    f = np.asarray(f, dtype=float)
    s = weight_profile(spectral_radius, eps, f.shape[0] - 1)
    flat = np.abs(f).reshape(f.shape[0], -1)
    return float(np.max(flat.max(axis=1) / s)) if flat.size else 0.0


def _action_tables(ch: ChannelModel, grid: np.ndarray, a: int):
    """Per-action grid tables: success likelihood and the two posterior
    branches (tau-independent)."""
    Pc = ch.mode_kernel[a]
    lam0, lam1 = ch.lam[0, a], ch.lam[1, a]
    bhat = np.clip(Pc[0, 1] * (1.0 - grid) + Pc[1, 1] * grid, 0.0, 1.0)
    p_succ = lam0 * (1.0 - bhat) + lam1 * bhat
    with np.errstate(divide="ignore", invalid="ignore"):
        t_succ = np.where(p_succ > 0.0, lam1 * bhat / np.where(p_succ > 0, p_succ, 1.0), 0.0)
        p_fail = 1.0 - p_succ
        t_fail = np.where(p_fail > 0.0, (1.0 - lam1) * bhat / np.where(p_fail > 0, p_fail, 1.0), 1.0)
    return p_succ, np.clip(t_succ, 0.0, 1.0), np.clip(t_fail, 0.0, 1.0)


def _sweep(Q, tables, cs, ca, gamma, grid):
    """One Jacobi sweep of the Bellman operator over the whole lattice."""
    tau_max = Q.shape[0] - 1
    Vmin = Q.min(axis=2)
    out = np.empty_like(Q)
    for a, (p_succ, t_succ, t_fail) in enumerate(tables):
        w_succ = np.interp(t_succ, grid, Vmin[0])
        w_fail_rows = np.zeros((tau_max + 1, grid.size))
        for r in range(1, tau_max + 1):  # row 0 unused: a failure always advances tau
            w_fail_rows[r] = np.interp(t_fail, grid, Vmin[r])
        cont = p_succ * w_succ
        for tau in range(tau_max + 1):
            nxt = min(tau + 1, tau_max)
            out[tau, :, a] = (cs[tau] + ca[a]
                              + gamma * (cont + (1.0 - p_succ) * w_fail_rows[nxt]))
    return out


def bellman_apply(ch: ChannelModel, cost: StageCost, cfg: SolverConfig,
                  Q: np.ndarray) -> np.ndarray:
    """One application of the Bellman operator on the (tau, grid, action)
    lattice.

    The observation sum runs over the two-point support; the continuation
    value at the updated belief is read from min over actions of Q by
    piecewise-linear interpolation, and a failure at tau = tau_max is clamped
    back to tau_max. Pure Jacobi update: every output entry depends only on
    the input Q.
    """
    Q = np.asarray(Q, dtype=float)
    expected = (cfg.tau_max + 1, cfg.grid_n + 1, cost.n_actions)
    if Q.shape != expected:
        raise ValueError(f"Q must have shape {expected}, got {Q.shape}")
    if cost.n_actions != ch.n_actions:
        raise ValueError("cost and channel disagree on the number of actions")
    if cost.holding.tau_max < cfg.tau_max:
        raise ValueError("holding cost table is shorter than cfg.tau_max")
    grid = cfg.belief_grid()
    tables = [_action_tables(ch, grid, a) for a in range(ch.n_actions)]
    return _sweep(Q, tables, cost.holding.costs, cost.action_costs, cfg.gamma, grid)


@dataclass(frozen=True)
class Solution:
    """Converged Q-function, value function, and greedy policy on the lattice."""

    Qfun: np.ndarray
    V: np.ndarray
    policy: np.ndarray
    belief_grid: np.ndarray
    sweeps_used: int
    final_residual: float
    residual_history: tuple = ()

    def __post_init__(self):
        for name in ("Qfun", "V", "policy", "belief_grid"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def tau_max(self) -> int:
        return self.Qfun.shape[0] - 1

    @property
    def grid_n(self) -> int:
        return self.Qfun.shape[1] - 1

    @property
    def n_actions(self) -> int:
        return self.Qfun.shape[2]


def greedy_policy(Q: np.ndarray, tie_break: str = "low") -> np.ndarray:
    """Argmin over actions; ties go to the smallest index ('low') or the
    largest ('high')."""
    if tie_break == "low":
        return np.argmin(Q, axis=2).astype(np.int64)
    return (Q.shape[2] - 1) - np.argmin(Q[:, :, ::-1], axis=2).astype(np.int64)


def _require_margin(ch: ChannelModel, cost: StageCost, cfg: SolverConfig | None = None):
    rho = cost.spectral_radius
    if rho < 1.0:
        return
    lam_min = ch.min_success_prob()
    bound = 1.0 - 1.0 / rho**2
    if not lam_min > bound:
        raise ValueError(
            f"success margin violated: min success prob {lam_min} <= "
            f"1 - 1/rho(A)^2 = {bound}; the discounted cost need not be finite")
    if cfg is not None:
        # the weighted-norm convergence argument needs the per-step weighted
        # mass to shrink; a too-large eps can break it even under the margin
        growth = (1.0 - lam_min) * (rho + cfg.weight_eps) ** 2
        if growth >= 1.0:
            raise ValueError(
                f"contraction parameters invalid: (1-lam_min)*(rho+eps)^2 = "
                f"{growth} >= 1; decrease weight_eps")


def value_iterate(ch: ChannelModel, cost: StageCost, cfg: SolverConfig) -> Solution:
    """Value iteration from Q = 0 until the weighted-norm residual of one
    sweep drops below cfg.vi_tol.

    Raises ConvergenceError (with the residual history) if max_sweeps is
    exhausted, and ValueError if the channel's worst success probability is
    too small for the plant's spectral radius.
    """
    _require_margin(ch, cost, cfg)
    if cost.n_actions != ch.n_actions:
        raise ValueError("cost and channel disagree on the number of actions")
    if cost.holding.tau_max < cfg.tau_max:
        raise ValueError("holding cost table is shorter than cfg.tau_max")
    grid = cfg.belief_grid()
    tables = [_action_tables(ch, grid, a) for a in range(ch.n_actions)]
    s = weight_profile(cost.spectral_radius, cfg.weight_eps, cfg.tau_max)
    Q = np.zeros((cfg.tau_max + 1, cfg.grid_n + 1, ch.n_actions))
    history = []
    for sweep in range(1, cfg.max_sweeps + 1):
        Qn = _sweep(Q, tables, cost.holding.costs, cost.action_costs, cfg.gamma, grid)
        residual = float(np.max(np.abs(Qn - Q).reshape(cfg.tau_max + 1, -1).max(axis=1) / s))
        history.append(residual)
        Q = Qn
        if residual < cfg.vi_tol:
            return Solution(Qfun=Q, V=Q.min(axis=2),
                            policy=greedy_policy(Q, cfg.tie_break),
                            belief_grid=grid, sweeps_used=sweep,
                            final_residual=residual,
                            residual_history=tuple(history))
    raise ConvergenceError(
        f"value iteration did not reach tol {cfg.vi_tol} in {cfg.max_sweeps} sweeps "
        f"(last residual {history[-1]:.3e})", residual=history[-1], history=history)


@dataclass(frozen=True)
class UpdateMonotonicityReport:
    """Grid-sweep verdicts on the belief update and observation likelihood.

    The belief update must be nondecreasing separately in tau, b, and y; the
    observation likelihood must move up in first-order stochastic dominance
    as (tau, b) increase.
    """

    ok: bool
    update_violations: tuple
    fsd_violations: tuple
    n_update_checks: int
    n_fsd_checks: int

    def __bool__(self) -> bool:
        return self.ok


def _sigma_dist(ch, tau, b, a, union_support):
    pmf = [observation_likelihood(ch, tau, b, y, a) for y in union_support]
    return FiniteDist(np.asarray(pmf), support=np.asarray(union_support, dtype=float))


def verify_update_monotonicity(ch: ChannelModel, tau_max: int = 60,
                               grid_n: int = 200, n_samples: int = 10_000,
                               seed: int = 20260811, tol: float = 1e-12,
                               max_witnesses: int = 20) -> UpdateMonotonicityReport:
    """Sweep the belief grid checking monotonicity of the posterior update in
    each coordinate, and sample state pairs checking the stochastic-dominance
    ordering of the observation likelihood.

    Monotonicity in tau is constancy here (the update depends on tau only
    through the support label), so that clause is checked on sampled tau
    pairs; b and y run over the full grid.
    """
    grid = np.linspace(0.0, 1.0, grid_n + 1)
    update_viol = []
    n_update = 0
    for a in range(ch.n_actions):
        p_succ, t_succ, t_fail = _action_tables(ch, grid, a)
        for name, t in (("b:success", t_succ), ("b:failure", t_fail)):
            n_update += grid_n
            drops = np.nonzero(np.diff(t) < -tol)[0]
            for i in drops[:max_witnesses]:
                update_viol.append((name, a, float(grid[i]), float(t[i + 1] - t[i])))
        n_update += grid_n + 1
        gaps = np.nonzero(t_succ - t_fail > tol)[0]
        for i in gaps[:max_witnesses]:
            update_viol.append(("y", a, float(grid[i]), float(t_succ[i] - t_fail[i])))
    rng = np.random.default_rng(seed)
    for a in range(ch.n_actions):
        taus = np.sort(rng.integers(0, tau_max + 1, size=(n_samples // 4, 2)), axis=1)
        bs = rng.random(n_samples // 4)
        ys = rng.integers(0, 2, size=n_samples // 4)
        for (t1, t2), b, ybr in zip(taus, bs, ys):
            n_update += 1
            u1 = belief_update(ch, int(t1), float(b), 0 if ybr == 0 else int(t1) + 1, a)
            u2 = belief_update(ch, int(t2), float(b), 0 if ybr == 0 else int(t2) + 1, a)
            if u2 - u1 < -tol and len(update_viol) < max_witnesses:
                update_viol.append(("tau", a, (int(t1), int(t2), float(b)), float(u2 - u1)))
    fsd_viol = []
    n_fsd = 0
    for a in range(ch.n_actions):
        taus = np.sort(rng.integers(0, tau_max + 1, size=(n_samples, 2)), axis=1)
        idx = np.sort(rng.integers(0, grid_n + 1, size=(n_samples, 2)), axis=1)
        for (t1, t2), (i1, i2) in zip(taus, idx):
            n_fsd += 1
            union = sorted({0, int(t1) + 1, int(t2) + 1})
            d1 = _sigma_dist(ch, int(t1), float(grid[i1]), a, union)
            d2 = _sigma_dist(ch, int(t2), float(grid[i2]), a, union)
            res = fsd_dominates(d1, d2)
            if not res and len(fsd_viol) < max_witnesses:
                fsd_viol.append((a, int(t1), float(grid[i1]), int(t2), float(grid[i2]),
                                 res.witness, res.value))
    return UpdateMonotonicityReport(ok=not update_viol and not fsd_viol,
                                    update_violations=tuple(update_viol),
                                    fsd_violations=tuple(fsd_viol),
                                    n_update_checks=n_update, n_fsd_checks=n_fsd)


@dataclass(frozen=True)
class ValueMonotonicityReport:
    """Lattice monotonicity verdict for a converged solution."""

    ok: bool
    n_violations: int
    worst_drop: float
    witness: tuple | None

    def __bool__(self) -> bool:
        return self.ok


def verify_value_monotonicity(sol: Solution, tol: float = 1e-8) -> ValueMonotonicityReport:
    """Check that V and every action slice of Q are nondecreasing in both the
    holding time and the belief coordinate."""
    n_viol = 0
    worst = 0.0
    witness = None
    surfaces = [("V", sol.V)] + [(f"Q[a={a}]", sol.Qfun[:, :, a])
                                 for a in range(sol.n_actions)]
    for name, F in surfaces:
        for axis, label in ((0, "tau"), (1, "b")):
            d = np.diff(F, axis=axis)
            bad = d < -tol
            n_viol += int(bad.sum())
            if bad.any():
                drop = float(d.min())
                if drop < worst:
                    worst = drop
                    ij = np.unravel_index(int(np.argmin(d)), d.shape)
                    witness = (name, label, int(ij[0]), int(ij[1]), drop)
    return ValueMonotonicityReport(ok=(n_viol == 0), n_violations=n_viol,
                                   worst_drop=worst, witness=witness)


@dataclass(frozen=True)
class ContractionReport:
    """Analytic m-stage contraction certificate plus an empirical check."""

    m: int
    certified_bound: float
    alpha: float
    weight_base: float
    empirical_max_ratio: float
    trials: int

    @property
    def ok(self) -> bool:
        return self.certified_bound < 1.0 and self.empirical_max_ratio < 1.0

    def __bool__(self) -> bool:
        return self.ok


def _mass_ratio_bound(tau: int, m: int, lam_min: float, base: float) -> float:
    """Worst-case E[s(tau_m)] / s(tau) over all outcome distributions
    consistent with the per-state probability caps.

    After m steps the holding time is either tau+m (m straight failures,
    probability at most (1-lam_min)^m) or some y < m (last success at step
    m-y, probability at most (1-lam_min)^y). Those caps alone sum to more
    than 1, so the bound maximizes the weighted mass over probability vectors
    that respect both the caps and total mass 1: fill from the largest weight
    ratio down (the weights are nondecreasing, so tau+m first, then y = m-1
    down to 0).
    """
    atoms = [(base ** (2.0 * m), (1.0 - lam_min) ** m)]
    for y in range(m - 1, -1, -1):
        atoms.append((base ** (2.0 * (y - tau)), (1.0 - lam_min) ** y))
    atoms.sort(key=lambda t: -t[0])
    budget = 1.0
    total = 0.0
    for ratio, cap in atoms:
        take = min(cap, budget)
        total += take * ratio
        budget -= take
        if budget <= 0.0:
            break
    return total


def check_contraction(ch: ChannelModel, sys: LtiSystem, cost: StageCost,
                      cfg: SolverConfig, trials: int = 100, seed: int = 20260811,
                      m_max: int = 500) -> ContractionReport:
    """Certify the m-stage contraction of the Bellman operator in the
    weighted sup-norm and measure it empirically.

    Analytic part: the smallest m with gamma^m * sup over the truncated tau
    range of the worst-case weighted outcome mass below 1. Empirical part:
    the max over seeded random bounded Q pairs of the ratio
    ||T^m Q1 - T^m Q2|| / ||Q1 - Q2|| in the same norm. Raises ValueError
    when (1 - lam_min) * (rho(A)^2 + eps) >= 1, the hypothesis under which
    the certificate exists.
    """
    lam_min = ch.min_success_prob()
    rho = sys.spectral_radius()
    eps = cfg.weight_eps
    alpha = (1.0 - lam_min) * (rho**2 + eps)
    if alpha >= 1.0:
        raise ValueError(f"contraction hypothesis violated: "
                         f"alpha = (1-lam_min)*(rho^2+eps) = {alpha} >= 1")
    base = max(rho + eps, 1.0)
    if (1.0 - lam_min) * base**2 >= 1.0:
        raise ValueError(
            f"weighted mass diverges: (1-lam_min)*base^2 = "
            f"{(1.0 - lam_min) * base**2} >= 1; decrease weight_eps")
    m_found = None
    bound_found = np.inf
    for m in range(1, m_max + 1):
        worst = max(_mass_ratio_bound(tau, m, lam_min, base)
                    for tau in range(cfg.tau_max + 1))
        value = cfg.gamma**m * worst
        if value < 1.0:
            m_found, bound_found = m, value
            break
    if m_found is None:
        raise ConvergenceError(f"no contraction stage found up to m={m_max}")
    rng = np.random.default_rng(seed)
    shape = (cfg.tau_max + 1, cfg.grid_n + 1, ch.n_actions)
    grid = cfg.belief_grid()
    tables = [_action_tables(ch, grid, a) for a in range(ch.n_actions)]
    s = weight_profile(rho, eps, cfg.tau_max)

    def wnorm(f):
        return float(np.max(np.abs(f).reshape(cfg.tau_max + 1, -1).max(axis=1) / s))

    worst_ratio = 0.0
    for _ in range(trials):
        Q1 = rng.uniform(0.0, 10.0, size=shape)
        Q2 = rng.uniform(0.0, 10.0, size=shape)
        denom = wnorm(Q1 - Q2)
        A, B = Q1, Q2
        for _ in range(m_found):
            A = _sweep(A, tables, cost.holding.costs, cost.action_costs, cfg.gamma, grid)
            B = _sweep(B, tables, cost.holding.costs, cost.action_costs, cfg.gamma, grid)
        ratio = wnorm(A - B) / denom if denom > 0 else 0.0
        worst_ratio = max(worst_ratio, ratio)
    return ContractionReport(m=m_found, certified_bound=bound_found, alpha=alpha,
                             weight_base=base, empirical_max_ratio=worst_ratio,
                             trials=trials)
