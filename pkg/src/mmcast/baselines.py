"""Unicast-only and broadcast-only reference policies."""

from __future__ import annotations

import numpy as np

from .exact import BeamAction, ExactSolution, dump_table, option_table, solve_exact
from .errors import LookupFailure
from .scenario import Scenario


def _single_user_solution(scenario, epsilon, x_cap, p) -> ExactSolution:
    return solve_exact(
        1, scenario.m, scenario.r_max, epsilon, [(0,)], [p], scenario.tau, x_cap
    )


class UnicastPolicy:
    """One independent single-user optimum per user, each on its own narrow beam."""

    kind = "unicast"

    def __init__(self, scenario: Scenario, epsilon: float, x_cap: int):
        self.scenario = scenario
        self.epsilon = float(epsilon)
        self.x_cap = x_cap
        self.groups = [scenario.group((u.id,)) for u in scenario.users]
        self.per_user = [
            _single_user_solution(scenario, epsilon, x_cap, scenario.p_dec((u.id,)))
            for u in scenario.users
        ]
        self._xs, self._ks = option_table(x_cap, len(scenario.schemes))

    @property
    def user_J0(self) -> list[float]:
        return [s.J0 for s in self.per_user]

    @property
    def J0(self) -> float:
        return float(sum(self.user_J0))

    def execute(self, residuals, t: int) -> list[BeamAction]:
        if len(residuals) != len(self.per_user):
            raise LookupFailure(f"state {tuple(residuals)} has the wrong length")
        out = []
        for g, sol, r in zip(self.groups, self.per_user, residuals):
            opt = int(sol.actions[t, sol.state_index([r]), 0])
            x = int(self._xs[opt])
            if x:
                out.append(BeamAction(g, x, self.scenario.schemes[int(self._ks[opt])]))
        return out

    def dump(self) -> str:
        lines = [f"# policy={self.kind} epsilon={self.epsilon!r} J0={self.J0!r}"]
        n = self.scenario.n_users
        for i in range(n):
            lines.append(f"# user {i + 1}")
            for t in range(self.scenario.r_max + 1):
                for r in range(self.scenario.m + 1):
                    state = [0] * n
                    state[i] = r
                    acts = self.execute(state, t)
                    body = " ".join(str(a) for a in acts) if acts else "-"
                    lines.append(f"{t}\t({r})\t{body}")
        return "\n".join(lines) + "\n"


class BroadcastPolicy:
    """Single all-users beam driven by the worst residual."""

    kind = "broadcast"

    def __init__(self, scenario: Scenario, epsilon: float, x_cap: int):
        self.scenario = scenario
        self.epsilon = float(epsilon)
        self.x_cap = x_cap
        members = tuple(u.id for u in scenario.users)
        self.group = scenario.group(members)
        self.groups = [self.group]
        p = scenario.p_dec(members)
        # every user shares each draw, so residuals stay equal and the
        # penalty is N * epsilon whenever the common residual is positive
        self.solution = solve_exact(
            1,
            scenario.m,
            scenario.r_max,
            epsilon * scenario.n_users,
            [(0,)],
            [p],
            scenario.tau,
            x_cap,
        )
        self._xs, self._ks = option_table(x_cap, len(scenario.schemes))

    @property
    def J0(self) -> float:
        return self.solution.J0

    def execute(self, residuals, t: int) -> list[BeamAction]:
        r = int(np.max(residuals))
        opt = int(self.solution.actions[t, self.solution.state_index([r]), 0])
        x = int(self._xs[opt])
        if not x:
            return []
        return [BeamAction(self.group, x, self.scenario.schemes[int(self._ks[opt])])]

    def dump(self) -> str:
        n = self.scenario.n_users
        return dump_table(self, [(r,) * n for r in range(self.scenario.m + 1)])


def solve_unicast(scenario: Scenario, epsilon: float, x_cap: int | None = None) -> UnicastPolicy:
    return UnicastPolicy(scenario, epsilon, scenario.cap if x_cap is None else x_cap)


def solve_broadcast(scenario: Scenario, epsilon: float, x_cap: int | None = None) -> BroadcastPolicy:
    return BroadcastPolicy(scenario, epsilon, scenario.cap if x_cap is None else x_cap)
