"""Exact finite-horizon MDP over joint residual-demand states.

The state is the vector of packets each user still needs. Every candidate
beam group carries one option index per slot: 0 means "silent", otherwise
``1 + (x - 1) * K + k`` sends ``x`` packets with scheme ``k`` (K schemes),
so option order is lexicographic in (x, scheme). Ties in the Bellman
minimum go to the shortest airtime, then to the lexicographically smallest
option vector.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, LookupFailure, ValidationError
from .phy import BeamGroup, ModScheme
from .scenario import Scenario

STATE_CAP = 4096
ACTION_BUDGET = 30_000_000  # entries of the (actions x states) Q table
MAX_EXACT_USERS = 4
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class BeamAction:
    group: BeamGroup
    packets: int
    scheme: ModScheme

    def __str__(self):
        return f"{self.group.label()}:{self.packets}x{self.scheme.name}"


def enumerate_states(n_users: int, m: int, cap: int = STATE_CAP) -> list[tuple[int, ...]]:
    """All residual vectors in lexicographic order."""
    if n_users < 1 or m < 1:
        raise ValidationError("need n_users >= 1 and m >= 1")
    if (m + 1) ** n_users > cap:
        raise CapacityError(
            f"{(m + 1) ** n_users} joint states exceed the cap of {cap}; "
            "use the hierarchical solver for this scenario"
        )
    return list(itertools.product(range(m + 1), repeat=n_users))


def receive_pmf(x: int, p: float) -> np.ndarray:
    """Binomial(x, p) pmf over the number of packets received."""
    if x < 0 or not 0.0 <= p <= 1.0:
        raise ValidationError(f"invalid binomial parameters x={x}, p={p}")
    y = np.arange(x + 1)
    comb = np.array([math.comb(x, k) for k in range(x + 1)], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        pmf = comb * np.where(y > 0, p**y, 1.0) * np.where(x - y > 0, (1.0 - p) ** (x - y), 1.0)
    return pmf


def shift_matrix(m: int, pmf: np.ndarray) -> np.ndarray:
    """P(r' | r) on {0..m} when r' = max(0, r - y) and y ~ pmf."""
    out = np.zeros((m + 1, m + 1))
    for r in range(m + 1):
        for y, py in enumerate(pmf[:r]):
            out[r, r - y] = py
        out[r, 0] = float(np.sum(pmf[r:]))
    return out


def joint_transition(state: Sequence[int], beams) -> dict[tuple[int, ...], float]:
    """Next-state pmf after one slot.

    ``beams`` is a sequence of ``(members, x, p)``: ``members`` are 0-based
    user positions. A scalar ``p`` means one shared draw for the whole beam;
    a sequence (one entry per member) means independent draws per member.
    """
    state = tuple(int(r) for r in state)
    dist = np.zeros(tuple(r + 1 for r in state))
    dist[state] = 1.0
    for members, x, p in beams:
        if x == 0:
            continue
        if np.ndim(p) == 0:
            pmf = receive_pmf(x, float(p))
            new = np.zeros_like(dist)
            for y, py in enumerate(pmf):
                if py:
                    new += py * _shift(dist, members, y)
            dist = new
        else:
            for i, pi in zip(members, p):
                pmf = receive_pmf(x, float(pi))
                new = np.zeros_like(dist)
                for y, py in enumerate(pmf):
                    if py:
                        new += py * _shift(dist, (i,), y)
                dist = new
    return {idx: float(v) for idx, v in np.ndenumerate(dist) if v > 0.0}


def _shift(arr: np.ndarray, axes, y: int) -> np.ndarray:
    for ax in axes:
        a = np.moveaxis(arr, ax, 0)
        out = np.zeros_like(a)
        out[0] = a[: y + 1].sum(axis=0)
        if y + 1 < a.shape[0]:
            out[1 : a.shape[0] - y] = a[y + 1 :]
        arr = np.moveaxis(out, 0, ax)
    return arr


def option_table(x_cap: int, n_schemes: int) -> tuple[np.ndarray, np.ndarray]:
    """(packets, scheme index) per option; option 0 is silence (scheme -1)."""
    xs = [0] + [x for x in range(1, x_cap + 1) for _ in range(n_schemes)]
    ks = [-1] + [k for _ in range(1, x_cap + 1) for k in range(n_schemes)]
    return np.array(xs), np.array(ks)


def _kron_all(mats):
    out = mats[0]
    for mat in mats[1:]:
        out = np.kron(out, mat)
    return out


def beam_kernels(n_users, m, members, x_cap, p, mode="worst-user") -> np.ndarray:
    """Joint transition matrices of one beam, one per option: shape (O, S, S).

    ``p`` has shape (K,) in worst-user mode and (K, len(members)) in per-user mode.
    """
    p = np.asarray(p, dtype=float)
    n_schemes = p.shape[0]
    xs, ks = option_table(x_cap, n_schemes)
    eye = np.eye(m + 1)
    size = (m + 1) ** n_users
    out = np.empty((len(xs), size, size))
    out[0] = np.eye(size)
    for o in range(1, len(xs)):
        x, k = int(xs[o]), int(ks[o])
        if mode == "worst-user":
            pmf = receive_pmf(x, p[k])
            acc = np.zeros((size, size))
            for y, py in enumerate(pmf):
                if py == 0.0:
                    continue
                d = shift_matrix(m, np.eye(1, x + 1, y)[0])
                acc += py * _kron_all([d if i in members else eye for i in range(n_users)])
            out[o] = acc
        else:
            per = {i: shift_matrix(m, receive_pmf(x, p[k, j])) for j, i in enumerate(members)}
            out[o] = _kron_all([per.get(i, eye) for i in range(n_users)])
    return out


def _pick(q: np.ndarray, dur: np.ndarray):
    """Argmin over axis 0 of q (A, S) with airtime then index tie-breaks."""
    qmin = q.min(axis=0)
    cand = q <= qmin + TIE_RTOL * np.maximum(1.0, np.abs(qmin))
    d = np.where(cand, dur[:, None], np.inf)
    dmin = d.min(axis=0)
    cand &= d <= dmin + TIE_RTOL * np.maximum(dmin, 1e-300)
    idx = np.argmax(cand, axis=0)
    return idx, q[idx, np.arange(q.shape[1])]


@dataclass
class ExactSolution:
    """Raw backward-induction output on a flat joint state space."""

    n_users: int
    m: int
    r_max: int
    epsilon: float
    x_cap: int
    n_schemes: int
    actions: np.ndarray  # (r_max+1, S, G) option indices
    values: np.ndarray  # (r_max+2, S)

    def state_index(self, state) -> int:
        idx = 0
        for r in state:
            if not 0 <= r <= self.m:
                raise LookupFailure(f"state {tuple(state)} outside table")
            idx = idx * (self.m + 1) + int(r)
        return idx

    @property
    def J0(self) -> float:
        return float(self.values[0, self.state_index([self.m] * self.n_users)])


def solve_exact(
    n_users: int,
    m: int,
    r_max: int,
    epsilon: float,
    groups: Sequence[Sequence[int]],
    p,
    tau,
    x_cap: int,
    mode: str = "worst-user",
    *,
    state_cap: int = STATE_CAP,
    action_budget: int = ACTION_BUDGET,
) -> ExactSolution:
    """Backward value iteration with decode probabilities given directly.

    ``groups`` hold 0-based user positions; ``p[g]`` is (K,) for worst-user
    reception or (K, len(groups[g])) for per-user reception.
    """
    if epsilon < 0:
        raise ValidationError("epsilon must be non-negative")
    states = enumerate_states(n_users, m, state_cap)
    n_states = len(states)
    tau = np.asarray(tau, dtype=float)
    xs, ks = option_table(x_cap, len(tau))
    n_opt = len(xs)
    n_groups = len(groups)
    if n_opt**n_groups * n_states > action_budget:
        raise CapacityError(
            f"{n_opt}^{n_groups} joint actions x {n_states} states exceed the "
            f"enumeration budget of {action_budget}"
        )
    kernels = [beam_kernels(n_users, m, tuple(g), x_cap, p[i], mode) for i, g in enumerate(groups)]
    opt_dur = np.where(xs > 0, xs * tau[np.maximum(ks, 0)], 0.0)
    dur = np.zeros((n_opt,) * n_groups)
    for g in range(n_groups):
        shape = [1] * n_groups
        shape[g] = n_opt
        dur = dur + opt_dur.reshape(shape)
    dur = dur.ravel()

    values = np.empty((r_max + 2, n_states))
    values[-1] = epsilon * np.array([sum(r > 0 for r in s) for s in states])
    actions = np.empty((r_max + 1, n_states, n_groups), dtype=np.int64)
    for t in range(r_max, -1, -1):
        v = values[t + 1]
        for g in range(n_groups - 1, -1, -1):
            v = np.einsum("osk,...k->o...s", kernels[g], v)
        q = dur[:, None] + v.reshape(-1, n_states)
        idx, best = _pick(q, dur)
        values[t] = best
        actions[t] = np.stack(np.unravel_index(idx, (n_opt,) * n_groups), axis=-1)
    return ExactSolution(n_users, m, r_max, float(epsilon), x_cap, len(tau), actions, values)


class ExactPolicy:
    """Joint-state policy over an explicit list of beam groups."""

    kind = "exact"

    def __init__(self, scenario: Scenario, groups: Sequence[BeamGroup], solution: ExactSolution):
        self.scenario = scenario
        self.groups = list(groups)
        self.solution = solution
        self._xs, self._ks = option_table(solution.x_cap, solution.n_schemes)

    @property
    def epsilon(self) -> float:
        return self.solution.epsilon

    @property
    def J0(self) -> float:
        return self.solution.J0

    def value(self, t: int, state) -> float:
        return float(self.solution.values[t, self.solution.state_index(state)])

    def decode_option(self, opt: int) -> tuple[int, ModScheme | None]:
        x, k = int(self._xs[opt]), int(self._ks[opt])
        return x, (self.scenario.schemes[k] if x else None)

    def execute(self, residuals, t: int) -> list[BeamAction]:
        row = self.solution.actions[t, self.solution.state_index(residuals)]
        out = []
        for g, opt in zip(self.groups, row):
            x, scheme = self.decode_option(int(opt))
            if x:
                out.append(BeamAction(g, x, scheme))
        return out

    def dump(self) -> str:
        return dump_table(self, itertools.product(range(self.solution.m + 1), repeat=self.solution.n_users))


def dump_table(policy, states) -> str:
    """Text dump: one ``t<TAB>state<TAB>actions`` line per (slot, state)."""
    states = list(states)
    lines = [f"# policy={policy.kind} epsilon={policy.epsilon!r} J0={policy.J0!r}"]
    for t in range(policy.scenario.r_max + 1):
        for s in states:
            acts = policy.execute(s, t)
            body = " ".join(str(a) for a in acts) if acts else "-"
            lines.append(f"{t}\t({','.join(map(str, s))})\t{body}")
    return "\n".join(lines) + "\n"


def all_groups(n_users: int) -> list[tuple[int, ...]]:
    """Every non-empty ordered subset of 1..N, by size then lexicographically."""
    ids = range(1, n_users + 1)
    return [c for k in range(1, n_users + 1) for c in itertools.combinations(ids, k)]


def value_iteration(
    scenario: Scenario,
    epsilon: float,
    x_cap: int | None = None,
    *,
    groups: Sequence[Sequence[int]] | None = None,
    allow_large: bool = False,
    action_budget: int = ACTION_BUDGET,
) -> ExactPolicy:
    """Optimal policy over all 2^N - 1 beams (or the given subset of groups)."""
    n = scenario.n_users
    if n > MAX_EXACT_USERS and not allow_large:
        raise CapacityError(
            f"exact solver refuses N={n} > {MAX_EXACT_USERS}; use the hierarchical solver "
            "or pass allow_large"
        )
    cap = scenario.cap if x_cap is None else x_cap
    member_sets = [tuple(g) for g in (groups if groups is not None else all_groups(n))]
    beam_groups = [scenario.group(g) for g in member_sets]
    if scenario.reception_mode == "worst-user":
        probs = [scenario.p_dec(g) for g in member_sets]
    else:
        probs = [scenario.p_dec_members(g) for g in member_sets]
    sol = solve_exact(
        n,
        scenario.m,
        scenario.r_max,
        epsilon,
        [tuple(i - 1 for i in g) for g in member_sets],
        probs,
        scenario.tau,
        cap,
        scenario.reception_mode,
        state_cap=STATE_CAP if not allow_large else 10**7,
        action_budget=action_budget,
    )
    return ExactPolicy(scenario, beam_groups, sol)
