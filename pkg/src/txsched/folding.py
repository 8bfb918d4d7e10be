"""Holding-time kernels, their outcome-folded counterparts, and order checks.

The holding-time kernel moves tau to 0 on success and to tau+1 on failure, so
for any success probability strictly between 0 and 1 it is not TP2 in
(tau, tau'): the two-branch support puts a forced zero where a positive entry
would be needed. Re-indexing the successor by the binary transmission outcome
(0 success, 1 failure) collapses the off-support states; the folded outcome
kernel and the deterministic outcome-to-observation map are TP2 in every
variable pair, and composing them reproduces the original composite kernel
exactly.

Kernels are represented as closures over the channel's success table and
materialized into matrices only inside the verification routines; the solver
itself only ever touches the two-point support.
"""

from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel
from .stochastic_orders import CheckResult, is_tp2


def holding_prob(ch: ChannelModel, tau: int, tau_next: int, theta: int, a: int) -> float:
    """Unfolded holding-time transition probability: success resets to 0,
    failure advances to tau+1."""
    lam = float(ch.lam[theta, a])
    if tau_next == 0:
        return lam
    if tau_next == tau + 1:
        return 1.0 - lam
    return 0.0


def folded_outcome_prob(ch: ChannelModel, delta: int, theta: int, a: int) -> float:
    """Folded transition kernel over the outcome {0 success, 1 failure};
    independent of the current holding time."""
    lam = float(ch.lam[theta, a])
    return lam if delta == 0 else 1.0 - lam


def folded_observation(delta: int, tau: int, y: int) -> float:
    """Deterministic map from (outcome, holding time) to the observed next
    holding time: success -> 0, failure -> tau+1."""
    if delta == 0:
        return 1.0 if y == 0 else 0.0
    return 1.0 if y == tau + 1 else 0.0


def composite_kernel(ch: ChannelModel, tau: int, theta: int, y: int, a: int) -> float:
    """Probability of observing next holding time y from (tau, theta, a),
    assembled through the unfolded route."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return holding_prob(ch, tau, y, theta, a)


def composite_kernel_folded(ch: ChannelModel, tau: int, theta: int, y: int, a: int) -> float:
    """Same probability assembled through the folded route: marginalize the
    binary outcome against the deterministic observation map."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    total = 0.0
    for delta in (0, 1):
        w = folded_observation(delta, tau, y)
        if w:
            total += w * folded_outcome_prob(ch, delta, theta, a)
    return total


@dataclass(frozen=True)
class FoldEquivalenceReport:
    """Exhaustive comparison of the two kernel assemblies."""

    identical: bool
    max_abs_diff: float
    witness: tuple | None = None

    def __bool__(self) -> bool:
        return self.identical


def verify_fold_equivalence(ch: ChannelModel, tau_max: int = 60) -> FoldEquivalenceReport:
    """Compare the unfolded and folded composite kernels pointwise over
    tau in 0..tau_max, both modes, y in 0..tau_max+1, and all actions.

    Both assemblies read the same success-probability entries, so equality is
    required to be exact (max diff 0.0), not within a tolerance.
    """
    worst = 0.0
    witness = None
    for a in range(ch.n_actions):
        for theta in (0, 1):
            for tau in range(tau_max + 1):
                for y in range(tau_max + 2):
                    d = abs(composite_kernel(ch, tau, theta, y, a)
                            - composite_kernel_folded(ch, tau, theta, y, a))
                    if d > worst:
                        worst = d
                        witness = (tau, theta, y, a)
    return FoldEquivalenceReport(identical=(worst == 0.0), max_abs_diff=worst,
                                 witness=witness)


def unfolded_tp2_counterexample(lam: float) -> CheckResult:
    """Materialize the unfolded holding kernel on rows tau in {0, 2} and
    columns tau' in {0, 1} and return its single 2x2 minor.

    For lam strictly inside (0, 1) the minor equals -(1-lam)*lam < 0 with
    witness ((0,0), (2,1)), so the unfolded kernel is never TP2; for the
    degenerate lam in {0, 1} the minor is 0 and there is no witness.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    # rows: tau 0 and 2; cols: tau' 0 and 1.  Row tau=0 supports {0, 1},
    # row tau=2 supports {0, 3}, hence the forced zero at (2, 1).
    m00, m01 = lam, 1.0 - lam
    m20, m21 = lam, 0.0
    minor = m00 * m21 - m01 * m20
    if minor == 0.0:
        return CheckResult(True, witness=None, value=0.0)
    return CheckResult(False, witness=((0, 0), (2, 1)), value=minor)


@dataclass(frozen=True)
class PairCheck:
    """TP2 verdict for one (kernel, variable pair) combination."""

    kernel: str
    variables: str
    result: CheckResult
    min_minor: float

    def __bool__(self) -> bool:
        return bool(self.result)


@dataclass(frozen=True)
class FoldedTP2Report:
    """Per-pair TP2 results for the folded kernels and the composite."""

    checks: tuple

    def __bool__(self) -> bool:
        return all(bool(c) for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c]

    def min_minor(self, kernel: str, variables: str) -> float:
        vals = [c.min_minor for c in self.checks
                if c.kernel == kernel and c.variables == variables]
        if not vals:
            raise KeyError(f"no check for ({kernel}, {variables})")
        return min(vals)


def _min_minor(M) -> float:
    M = np.asarray(M, dtype=float)
    n, m = M.shape
    y1, y2 = np.triu_indices(m, k=1)
    best = np.inf
    for i in range(n - 1):
        for j in range(i + 1, n):
            vals = M[i, y1] * M[j, y2] - M[i, y2] * M[j, y1]
            best = min(best, float(np.min(vals)))
    return best if np.isfinite(best) else 0.0


def _check_matrix(kernel: str, variables: str, M) -> PairCheck:
    return PairCheck(kernel=kernel, variables=variables, result=is_tp2(np.asarray(M)),
                     min_minor=_min_minor(M))


def verify_folded_tp2(ch: ChannelModel, tau_check: int = 6) -> FoldedTP2Report:
    """Materialize the folded kernels and run TP2 checks for every variable
    pair they are claimed ordered in.

    Checked pairs: the folded outcome kernel in (tau, theta), (tau, delta),
    (theta, delta); the observation map in (theta, y) and (delta, y); the
    composite kernel in (tau, theta) and (theta, y). tau ranges over
    0..tau_check in the materialized slices (the folded outcome kernel is
    tau-independent, so any range is representative). The minimum 2x2 minor
    seen for each pair is reported; the (theta, delta) pair's minor is
    lam[0,a] - lam[1,a], the quantity that makes the folded construction work.
    """
    checks = []
    taus = range(tau_check + 1)
    for a in range(ch.n_actions):
        # folded outcome kernel, (tau, theta) with delta fixed
        for delta in (0, 1):
            M = [[folded_outcome_prob(ch, delta, th, a) for th in (0, 1)] for _ in taus]
            checks.append(_check_matrix("folded_outcome", "(tau,theta)", M))
        # folded outcome kernel, (tau, delta) with theta fixed
        for theta in (0, 1):
            M = [[folded_outcome_prob(ch, d, theta, a) for d in (0, 1)] for _ in taus]
            checks.append(_check_matrix("folded_outcome", "(tau,delta)", M))
        # folded outcome kernel, (theta, delta) for each tau (tau-independent)
        M = [[folded_outcome_prob(ch, d, th, a) for d in (0, 1)] for th in (0, 1)]
        checks.append(_check_matrix("folded_outcome", "(theta,delta)", M))
        # composite kernel, (tau, theta) with y fixed
        for y in range(tau_check + 2):
            M = [[composite_kernel(ch, t, th, y, a) for th in (0, 1)] for t in taus]
            checks.append(_check_matrix("composite", "(tau,theta)", M))
        # composite kernel, (theta, y) with tau fixed
        for tau in taus:
            M = [[composite_kernel(ch, tau, th, y, a) for y in range(tau + 2)]
                 for th in (0, 1)]
            checks.append(_check_matrix("composite", "(theta,y)", M))
    # observation map, (theta, y) with (delta, tau) fixed
    for delta in (0, 1):
        for tau in taus:
            M = [[folded_observation(delta, tau, y) for y in range(tau + 2)]
                 for _ in (0, 1)]
            checks.append(_check_matrix("folded_observation", "(theta,y)", M))
    # observation map, (delta, y) with tau fixed
    for tau in taus:
        M = [[folded_observation(d, tau, y) for y in range(tau + 2)] for d in (0, 1)]
        checks.append(_check_matrix("folded_observation", "(delta,y)", M))
    return FoldedTP2Report(checks=tuple(checks))
