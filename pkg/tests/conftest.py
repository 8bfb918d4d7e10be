import numpy as np
import pytest

import txsched as tx

# reference configuration used across the suite
A, C, Q, R = 0.85, 1.0, 0.3, 0.3
LAM_GOOD, LAM_BAD = 0.9, 0.2
P00, P11 = 0.9, 1.0
GAMMA = 0.95
C_STOP = 10.0
TAU_MAX = 60
GRID_N = 200


@pytest.fixture(scope="session")
def plant():
    return tx.LtiSystem(A=A, C=C, Q=Q, R=R)


@pytest.fixture(scope="session")
def steady(plant):
    return tx.steady_state_covariance(plant)


@pytest.fixture(scope="session")
def cost_table(plant, steady):
    return tx.holding_cost_table(plant, steady, TAU_MAX)


@pytest.fixture(scope="session")
def ge_channel():
    return tx.make_gilbert_elliott(p00=P00, p11=P11, lam_good=LAM_GOOD,
                                   lam_bad=LAM_BAD, b0=0.0)


@pytest.fixture(scope="session")
def solver_cfg():
    return tx.SolverConfig(gamma=GAMMA, tau_max=TAU_MAX, grid_n=GRID_N,
                           vi_tol=1e-9, max_sweeps=2000)


@pytest.fixture(scope="session")
def stopping_solution(ge_channel, cost_table, solver_cfg):
    prob = tx.StoppingProblem(channel=ge_channel, holding=cost_table,
                              cfg=solver_cfg, c_stop=C_STOP)
    return tx.solve_stopping(prob)


def fixed_point_oracle(a, c, q, r, tol=1e-12, max_iter=100_000):
    """Independent scalar covariance fixed point: straight-line iteration of
    the measurement update composed with the time update, from 0."""
    x = 0.0
    for _ in range(max_iter):
        pred = a * x * a + q
        upd = pred - pred * c * (c * pred * c + r) ** -1 * c * pred
        if abs(upd - x) < tol:
            return upd
        x = upd
    raise AssertionError("oracle did not converge")


def bayes_enumeration_oracle(ch, tau, b, y, a=0):
    """Brute-force posterior: enumerate the joint law of (next mode, next
    holding time) explicitly and condition on y. Independent of the library's
    likelihood shortcuts."""
    joint = {}
    for theta_next in (0, 1):
        p_theta = (ch.mode_kernel[a, 0, theta_next] * (1.0 - b)
                   + ch.mode_kernel[a, 1, theta_next] * b)
        lam = ch.lam[theta_next, a]
        for y_val, p_y in ((0, lam), (tau + 1, 1.0 - lam)):
            joint[(theta_next, y_val)] = joint.get((theta_next, y_val), 0.0) \
                + p_theta * p_y
    evidence = joint.get((0, y), 0.0) + joint.get((1, y), 0.0)
    if evidence <= 0.0:
        return None
    return joint.get((1, y), 0.0) / evidence


def random_channel(rng, force_tp2=False):
    """Random single-action channel with lam_good >= lam_bad; force_tp2 also
    enforces p00 + p11 >= 1 so the mode kernel is TP2."""
    lam = np.sort(rng.random(2))[::-1]
    p00, p11 = rng.random(2)
    if force_tp2 and p00 + p11 < 1.0:
        p00, p11 = 1.0 - p00, 1.0 - p11
    b0 = rng.random()
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return tx.make_gilbert_elliott(p00=float(p00), p11=float(p11),
                                       lam_good=float(lam[0]),
                                       lam_bad=float(lam[1]), b0=float(b0))
