"""Executable checks of the optimizer's theory on desk-scale fixtures.

Four families:

* exact-penalty equivalence on toy constrained problems with analytic
  KKT multipliers (the rectified penalty recovers the constrained
  optimum once the factor clears the largest multiplier, and provably
  fails below it);
* an occupancy-measure LP oracle giving ground-truth optimal policies
  and multipliers for tabular CMDPs;
* the performance-difference identity, evaluated exactly on both sides;
* the visitation-shift error bound for surrogate objectives.

Everything here is exact arithmetic (matrix solves, LP) plus plain
first-order descent; no training code is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import exact
from .envs.tabular import TabularCmdp
from .simplex import LpInfeasibleError, solve_lp

Array = np.ndarray


# ---------------------------------------------------------------- toy problems


@dataclass
class ToyConstrainedProblem:
    """min f(x) s.t. g_i(x) <= 0 over a search box, with known KKT data."""

    name: str
    f: Callable[[Array], float]
    grad_f: Callable[[Array], Array]
    constraints: list[tuple[Callable[[Array], float], Callable[[Array], Array]]]
    kkt_point: Array
    multipliers: Array
    box: tuple[Array, Array]
    active: bool  # some constraint binds at the optimum

    @property
    def dim(self) -> int:
        return self.kkt_point.size


def toy_fixtures() -> list[ToyConstrainedProblem]:
    """Hand-derived KKT fixtures (stationarity grad f + sum lambda grad g = 0)."""
    fixtures = [
        ToyConstrainedProblem(
            name="parabola_halfline",  # min x^2 s.t. x >= 1; 2x = lambda at x=1
            f=lambda x: float(x[0] ** 2),
            grad_f=lambda x: np.array([2.0 * x[0]]),
            constraints=[(lambda x: 1.0 - x[0], lambda x: np.array([-1.0]))],
            kkt_point=np.array([1.0]),
            multipliers=np.array([2.0]),
            box=(np.array([-2.0]), np.array([3.0])),
            active=True,
        ),
        ToyConstrainedProblem(
            name="shifted_parabola",  # min (x-3)^2 s.t. x <= 1; lambda = 4
            f=lambda x: float((x[0] - 3.0) ** 2),
            grad_f=lambda x: np.array([2.0 * (x[0] - 3.0)]),
            constraints=[(lambda x: x[0] - 1.0, lambda x: np.array([1.0]))],
            kkt_point=np.array([1.0]),
            multipliers=np.array([4.0]),
            box=(np.array([-2.0]), np.array([4.0])),
            active=True,
        ),
        ToyConstrainedProblem(
            name="sum_squares_plane",  # min x^2+y^2 s.t. x+y >= 2; lambda = 2
            f=lambda x: float(x @ x),
            grad_f=lambda x: 2.0 * x,
            constraints=[(lambda x: 2.0 - x[0] - x[1], lambda x: np.array([-1.0, -1.0]))],
            kkt_point=np.array([1.0, 1.0]),
            multipliers=np.array([2.0]),
            box=(np.array([-2.0, -2.0]), np.array([3.0, 3.0])),
            active=True,
        ),
        ToyConstrainedProblem(
            name="linear_disc",  # min -x-y s.t. ||x|| <= 1; lambda = 1/sqrt(2)
            f=lambda x: float(-x[0] - x[1]),
            grad_f=lambda x: np.array([-1.0, -1.0]),
            constraints=[(lambda x: float(x @ x) - 1.0, lambda x: 2.0 * x)],
            kkt_point=np.array([np.sqrt(0.5), np.sqrt(0.5)]),
            multipliers=np.array([np.sqrt(0.5)]),
            box=(np.array([-2.0, -2.0]), np.array([2.0, 2.0])),
            active=True,
        ),
        ToyConstrainedProblem(
            name="corner_box",  # min (x-2)^2+(y-2)^2 s.t. x<=1, y<=1; lambda=(2,2)
            f=lambda x: float((x[0] - 2.0) ** 2 + (x[1] - 2.0) ** 2),
            grad_f=lambda x: np.array([2.0 * (x[0] - 2.0), 2.0 * (x[1] - 2.0)]),
            constraints=[
                (lambda x: x[0] - 1.0, lambda x: np.array([1.0, 0.0])),
                (lambda x: x[1] - 1.0, lambda x: np.array([0.0, 1.0])),
            ],
            kkt_point=np.array([1.0, 1.0]),
            multipliers=np.array([2.0, 2.0]),
            box=(np.array([-1.0, -1.0]), np.array([3.0, 3.0])),
            active=True,
        ),
        ToyConstrainedProblem(
            name="inactive_constraint",  # optimum interior; lambda = 0
            f=lambda x: float((x[0] - 0.2) ** 2),
            grad_f=lambda x: np.array([2.0 * (x[0] - 0.2)]),
            constraints=[(lambda x: x[0] - 1.0, lambda x: np.array([1.0]))],
            kkt_point=np.array([0.2]),
            multipliers=np.array([0.0]),
            box=(np.array([-2.0]), np.array([2.0])),
            active=False,
        ),
    ]
    return fixtures


@dataclass
class PenaltyResult:
    x: Array
    value: float
    converged: bool
    n_evals: int


def _halton(index: int, base: int) -> float:
    result, f = 0.0, 1.0
    while index > 0:
        f /= base
        result += f * (index % base)
        index //= base
    return result


def halton_starts(box: tuple[Array, Array], n: int) -> Array:
    """Low-discrepancy start points covering the search box."""
    lo, hi = box
    dim = lo.size
    bases = [2, 3, 5, 7][:dim]
    pts = np.empty((n, dim))
    for i in range(n):
        for d in range(dim):
            pts[i, d] = _halton(i + 1, bases[d])
    return lo + pts * (hi - lo)


def penalized_value(problem: ToyConstrainedProblem, kappa: float, x: Array) -> float:
    return problem.f(x) + kappa * sum(max(0.0, g(x)) for g, _ in problem.constraints)


def penalized_subgrad(problem: ToyConstrainedProblem, kappa: float, x: Array) -> Array:
    # subgradient 0 at the kink: a constraint sitting exactly at 0 contributes nothing
    g = problem.grad_f(x).astype(np.float64).copy()
    for gi, grad_gi in problem.constraints:
        if gi(x) > 0.0:
            g += kappa * grad_gi(x)
    return g


def relu_penalty_minimize(
    problem: ToyConstrainedProblem,
    kappa: float,
    n_starts: int = 16,
    max_iters: int = 600,
) -> PenaltyResult:
    """Multi-start first-order descent of f + kappa * sum max(0, g_i).

    Backtracking keeps every accepted step a strict descent; around the
    rectifier kink the step budget shrinks geometrically, which converges
    bisection-style onto the nonsmooth minimizer.
    """
    lo, hi = problem.box
    best_x, best_val, best_settled = None, np.inf, False
    evals = 0
    for x0 in halton_starts(problem.box, n_starts):
        x = x0.copy()
        fx = penalized_value(problem, kappa, x)
        evals += 1
        base_step = 1.0
        settled = False
        for _ in range(max_iters):
            g = penalized_subgrad(problem, kappa, x)
            gn = float(np.linalg.norm(g))
            if gn < 1e-13 or base_step < 1e-15:
                settled = True  # stationary or step budget fully contracted
                break
            t = base_step
            moved = False
            while t >= 1e-16:
                cand = np.clip(x - t * g, lo, hi)
                fc = penalized_value(problem, kappa, cand)
                evals += 1
                if fc < fx - 1e-4 * t * gn * gn:
                    x, fx = cand, fc
                    base_step = min(2.0 * t, 4.0)
                    moved = True
                    break
                t *= 0.5
            if not moved:
                base_step *= 0.25  # stuck at a kink; tighten the trust step
        if fx < best_val:
            best_x, best_val, best_settled = x, fx, settled
    return PenaltyResult(x=best_x, value=best_val, converged=best_settled, n_evals=evals)


def is_feasible(problem: ToyConstrainedProblem, x: Array, tol: float = 1e-7) -> bool:
    return all(g(x) <= tol for g, _ in problem.constraints)


# ---------------------------------------------------------------- LP oracle


class InfeasibleCmdpError(ValueError):
    def __init__(self, residual: float, certificate: Array) -> None:
        super().__init__(
            f"no feasible policy: minimal constraint violation {residual:.3e}"
        )
        self.residual = residual
        self.certificate = certificate


@dataclass
class OracleSolution:
    """Ground truth for a constrained tabular problem."""

    policy: Array  # (S, A)
    occupancy: Array  # (S, A), sums to 1
    value: float  # J_R at the optimum
    cost_returns: Array  # J_Ci at the optimum
    multipliers: Array  # KKT multipliers of J_Ci <= d_i
    feasibility_residual: float
    complementary_slackness: float


def constrained_oracle_lp(cmdp: TabularCmdp, limits) -> OracleSolution:
    """Exact solve of max J_R s.t. J_Ci <= d_i over occupancy measures."""
    S, A, m = cmdp.n_states, cmdp.n_actions, cmdp.n_costs
    if S * A > 10_000:
        raise ValueError("oracle is for desk-scale instances (S*A <= 10000)")
    limits = np.asarray(limits, dtype=np.float64)
    if limits.shape != (m,):
        raise ValueError("one limit per cost channel")
    gamma = cmdp.gamma
    n = S * A

    # flow rows: sum_a rho(s,a) - gamma sum_{s',a'} P(s|s',a') rho(s',a') = (1-g) mu
    A_eq = np.zeros((S, n))
    for s in range(S):
        for a in range(A):
            A_eq[s, s * A + a] += 1.0
    A_eq -= gamma * cmdp.P.reshape(n, S).T
    b_eq = (1.0 - gamma) * cmdp.mu
    A_ub = cmdp.C.reshape(m, n).copy()
    b_ub = (1.0 - gamma) * limits
    c = -cmdp.R.reshape(n)

    try:
        sol = solve_lp(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
    except LpInfeasibleError as err:
        raise InfeasibleCmdpError(err.residual, err.certificate) from err

    rho = np.maximum(sol.x.reshape(S, A), 0.0)
    mass = rho.sum(axis=1, keepdims=True)
    policy = np.where(mass > 1e-12, rho / np.maximum(mass, 1e-300), 1.0 / A)
    policy /= policy.sum(axis=1, keepdims=True)
    cost_returns = cmdp.C.reshape(m, n) @ sol.x / (1.0 - gamma)
    feas = max(
        float(np.max(np.abs(A_eq @ sol.x - b_eq))),
        float(np.max(A_ub @ sol.x - b_ub, initial=0.0)),
        float(np.max(-sol.x, initial=0.0)),
    )
    slack = A_ub @ sol.x - b_ub
    comp = float(np.max(np.abs(sol.duals_ub * slack), initial=0.0))
    return OracleSolution(
        policy=policy,
        occupancy=rho / rho.sum(),
        value=float(-sol.objective / (1.0 - gamma)),
        cost_returns=cost_returns,
        multipliers=sol.duals_ub,
        feasibility_residual=feas,
        complementary_slackness=comp,
    )


# ---------------------------------------------------------------- identities


def perf_diff_check(cmdp: TabularCmdp, pi: Array, pi_prime: Array, table: Array) -> float:
    """|J_f(pi') - J_f(pi) - (1/(1-g)) E_{d^pi', pi'}[A_f^pi]|, all exact."""
    gamma = cmdp.gamma
    lhs = exact.policy_return(cmdp, pi_prime, table) - exact.policy_return(cmdp, pi, table)
    adv = exact.advantages(cmdp, pi, table)
    d_prime = exact.visitation(cmdp, pi_prime)
    rhs = float(d_prime @ (pi_prime * adv).sum(axis=1)) / (1.0 - gamma)
    return abs(lhs - rhs)


def _surrogate_terms(cmdp: TabularCmdp, pi_k: Array, pi: Array, d_state: Array, limits):
    """Reward and cost surrogate losses under a given state distribution."""
    gamma = cmdp.gamma
    adv_r = exact.advantages(cmdp, pi_k, cmdp.R)
    l_r = -float(d_state @ (pi * adv_r).sum(axis=1))
    l_cs = []
    for i in range(cmdp.n_costs):
        adv_c = exact.advantages(cmdp, pi_k, cmdp.C[i])
        jc_k = exact.policy_return(cmdp, pi_k, cmdp.C[i])
        l_cs.append(
            float(d_state @ (pi * adv_c).sum(axis=1)) + (1.0 - gamma) * (jc_k - limits[i])
        )
    return l_r, l_cs


def approx_error_check(
    cmdp: TabularCmdp, pi_k: Array, pi: Array, kappa: float, limits
) -> tuple[float, float]:
    """Exact |objective-with-d^pi - objective-with-d^pi_k| and its bound.

    bound = (1 + kappa*m) * gamma * max_f eps_f * sqrt(2 delta) / (1-gamma),
    with eps_f = max_s |E_{a~pi} A_f^{pi_k}(s,a)| over reward and cost
    channels, and delta the mean KL(pi || pi_k) under d^{pi_k}.
    """
    gamma = cmdp.gamma
    d_pi = exact.visitation(cmdp, pi)
    d_k = exact.visitation(cmdp, pi_k)
    l_r_pi, l_c_pi = _surrogate_terms(cmdp, pi_k, pi, d_pi, limits)
    l_r_k, l_c_k = _surrogate_terms(cmdp, pi_k, pi, d_k, limits)
    obj_pi = l_r_pi + kappa * sum(max(0.0, t) for t in l_c_pi)
    obj_k = l_r_k + kappa * sum(max(0.0, t) for t in l_c_k)
    lhs = abs(obj_pi - obj_k)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(pi > 0, np.log(np.where(pi > 0, pi, 1.0) / pi_k), 0.0)
    kl_per_state = (pi * log_ratio).sum(axis=1)
    delta = float(d_k @ kl_per_state)

    eps = 0.0
    for table in [cmdp.R] + [cmdp.C[i] for i in range(cmdp.n_costs)]:
        adv = exact.advantages(cmdp, pi_k, table)
        eps = max(eps, float(np.max(np.abs((pi * adv).sum(axis=1)))))
    m = cmdp.n_costs
    bound = (1.0 + kappa * m) * gamma * eps * np.sqrt(2.0 * delta) / (1.0 - gamma)
    return lhs, float(bound)


@dataclass
class Proposition1Report:
    feasible: bool
    pi_next: Array | None
    return_before: float
    return_after: float | None
    cost_after: Array | None
    improved: bool
    constraints_satisfied: bool


def proposition1_check(
    cmdp: TabularCmdp, pi_k: Array, limits, grid_points: int = 41
) -> Proposition1Report:
    """Solve the exact one-step surrogate over a policy grid and verify
    monotone improvement plus hard constraint satisfaction.

    Exhaustive over deterministic-mixture grids, so restricted to 2-action
    CMDPs with a handful of states.
    """
    if cmdp.n_actions != 2 or cmdp.n_states > 3:
        raise ValueError("exhaustive surrogate search supports <=3 states, 2 actions")
    gamma = cmdp.gamma
    limits = np.asarray(limits, dtype=np.float64)
    adv_r = exact.advantages(cmdp, pi_k, cmdp.R)
    adv_c = [exact.advantages(cmdp, pi_k, cmdp.C[i]) for i in range(cmdp.n_costs)]
    jc_k = np.array([exact.policy_return(cmdp, pi_k, cmdp.C[i]) for i in range(cmdp.n_costs)])

    grid = np.linspace(0.0, 1.0, grid_points)
    best_obj, best_pi = -np.inf, None
    S = cmdp.n_states
    import itertools

    for probs in itertools.product(grid, repeat=S):
        pi = np.column_stack([np.asarray(probs), 1.0 - np.asarray(probs)])
        d = exact.visitation(cmdp, pi)
        constraint_ok = True
        for i in range(cmdp.n_costs):
            lhs = jc_k[i] + float(d @ (pi * adv_c[i]).sum(axis=1)) / (1.0 - gamma)
            if lhs > limits[i] + 1e-10:
                constraint_ok = False
                break
        if not constraint_ok:
            continue
        obj = float(d @ (pi * adv_r).sum(axis=1))
        if obj > best_obj:
            best_obj, best_pi = obj, pi

    j_before = exact.policy_return(cmdp, pi_k, cmdp.R)
    if best_pi is None:
        return Proposition1Report(False, None, j_before, None, None, False, False)
    j_after = exact.policy_return(cmdp, best_pi, cmdp.R)
    c_after = np.array(
        [exact.policy_return(cmdp, best_pi, cmdp.C[i]) for i in range(cmdp.n_costs)]
    )
    return Proposition1Report(
        feasible=True,
        pi_next=best_pi,
        return_before=j_before,
        return_after=j_after,
        cost_after=c_after,
        improved=j_after >= j_before - 1e-9,
        constraints_satisfied=bool(np.all(c_after <= limits + 1e-8)),
    )


# ---------------------------------------------------------------- fixtures


def random_tabular(
    rng: np.random.Generator,
    n_states: int = 3,
    n_actions: int = 2,
    n_costs: int = 1,
    gamma: float | None = None,
) -> TabularCmdp:
    if gamma is None:
        gamma = float(rng.uniform(0.5, 0.95))
    return TabularCmdp(
        P=rng.dirichlet(np.ones(n_states), size=(n_states, n_actions)),
        R=rng.uniform(-1.0, 1.0, size=(n_states, n_actions)),
        C=rng.uniform(0.0, 1.0, size=(n_costs, n_states, n_actions)),
        mu=rng.dirichlet(np.ones(n_states)),
        gamma=gamma,
    )


def random_policy(rng: np.random.Generator, n_states: int, n_actions: int) -> Array:
    return rng.dirichlet(np.ones(n_actions), size=n_states)


def three_state_fixture() -> tuple[TabularCmdp, float]:
    """Uniform-transition 3-state CMDP with an analytic constrained optimum.

    All rows of P are uniform, so the discounted visitation is exactly
    uniform whatever the policy; with risky-action rewards (1.0, 0.6, 0.3),
    unit risky cost and budget d = 5 the optimum takes the risky action
    with probabilities (1, 0.5, 0): J_R* = 13/3, J_C* = 5, multiplier 0.6.
    """
    S, A = 3, 2
    P = np.full((S, A, S), 1.0 / S)
    R = np.zeros((S, A))
    R[:, 1] = [1.0, 0.6, 0.3]
    C = np.zeros((1, S, A))
    C[0, :, 1] = 1.0
    mu = np.full(S, 1.0 / S)
    cmdp = TabularCmdp(P=P, R=R, C=C, mu=mu, gamma=0.9)
    return cmdp, 5.0


def two_state_fixture() -> tuple[TabularCmdp, float]:
    """2-state CMDP whose reward favors the costly action under a tight budget.

    The safe action leads to state 0, the risky one to state 1; risky pays
    more reward everywhere but a unit cost.  The LP oracle mixes actions at
    the optimum (exact values frozen in the test suite).
    """
    P = np.zeros((2, 2, 2))
    P[:, 0, 0] = 1.0  # safe -> state 0
    P[:, 1, 1] = 1.0  # risky -> state 1
    R = np.array([[0.2, 1.0], [0.0, 0.8]])
    C = np.zeros((1, 2, 2))
    C[0, :, 1] = 1.0
    mu = np.array([1.0, 0.0])
    cmdp = TabularCmdp(P=P, R=R, C=C, mu=mu, gamma=0.9)
    return cmdp, 4.0


# ---------------------------------------------------------------- full report


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def run_verification(seed: int = 0) -> list[CheckResult]:
    """The full theory suite; one result row per check family."""
    results: list[CheckResult] = []
    rng = np.random.default_rng(seed)

    # exact penalty: above-threshold recovery at several margins + sharpness
    worst_gap = 0.0
    ok = True
    for problem in toy_fixtures():
        lam = float(np.max(problem.multipliers))
        for margin in (0.1, 1.0, 10.0):
            kappa = max(lam * (1.0 + margin), 1e-6)
            res = relu_penalty_minimize(problem, kappa)
            gap = float(np.max(np.abs(res.x - problem.kkt_point)))
            worst_gap = max(worst_gap, gap)
            ok &= gap <= 1e-6
    results.append(
        CheckResult("exact_penalty_recovery", ok, f"worst |x - x*| = {worst_gap:.2e}")
    )
    ok = True
    for problem in toy_fixtures():
        if not problem.active:
            continue
        res = relu_penalty_minimize(problem, 0.5 * float(np.max(problem.multipliers)))
        ok &= not is_feasible(problem, res.x)
    results.append(
        CheckResult("exact_penalty_sharpness", ok, "below-threshold minimizers infeasible")
    )

    # performance difference identity
    worst = 0.0
    for _ in range(100):
        cmdp = random_tabular(rng, n_states=int(rng.integers(2, 6)), n_actions=int(rng.integers(2, 4)))
        pi = random_policy(rng, cmdp.n_states, cmdp.n_actions)
        pi2 = random_policy(rng, cmdp.n_states, cmdp.n_actions)
        table = cmdp.R if rng.random() < 0.5 else cmdp.C[0]
        worst = max(worst, perf_diff_check(cmdp, pi, pi2, table))
    results.append(
        CheckResult("performance_difference", worst <= 1e-10, f"max residual {worst:.2e}")
    )

    # surrogate error bound
    violations = 0
    for _ in range(1000):
        cmdp = random_tabular(rng, n_states=int(rng.integers(2, 6)), n_actions=int(rng.integers(2, 4)),
                              n_costs=int(rng.integers(1, 3)))
        pi_k = random_policy(rng, cmdp.n_states, cmdp.n_actions)
        pi = random_policy(rng, cmdp.n_states, cmdp.n_actions)
        kappa = float(rng.uniform(0.5, 40.0))
        limits = rng.uniform(0.1, 2.0, size=cmdp.n_costs) / (1 - cmdp.gamma)
        lhs, bound = approx_error_check(cmdp, pi_k, pi, kappa, limits)
        if lhs > bound + 1e-12:
            violations += 1
    results.append(
        CheckResult("surrogate_error_bound", violations == 0, f"{violations}/1000 violations")
    )

    # LP oracle self-consistency on the named fixtures
    ok = True
    details = []
    for cmdp, limit in (three_state_fixture(), two_state_fixture()):
        sol = constrained_oracle_lp(cmdp, [limit])
        ok &= sol.feasibility_residual <= 1e-9
        ok &= sol.complementary_slackness <= 1e-8
        details.append(
            f"feas {sol.feasibility_residual:.1e} compslack {sol.complementary_slackness:.1e}"
        )
    results.append(CheckResult("lp_oracle_consistency", ok, "; ".join(details)))

    # one-step surrogate: monotone improvement under the hard constraint
    cmdp, limit = two_state_fixture()
    pi_k = np.array([[0.8, 0.2], [0.8, 0.2]])  # feasible, suboptimal
    report = proposition1_check(cmdp, pi_k, [limit])
    results.append(
        CheckResult(
            "surrogate_monotone_improvement",
            report.feasible and report.improved and report.constraints_satisfied,
            f"J_R {report.return_before:.4f} -> "
            f"{report.return_after if report.return_after is not None else float('nan'):.4f}",
        )
    )
    return results
