"""Hierarchical (tree) approximation of the multicast MDP.

Each tree node owns a beam and a one-dimensional "reduced" chain whose
state is the max residual over its subtree. Per slot a node picks a tuple
(one packet budget per child, its own packet count, its own scheme); the
budget caps every packet count chosen anywhere in that child's subtree for
the current slot. Nodes are solved leaves-first within a slot, slots
backwards from the horizon.

When computing a node's transition all children are assumed to sit at the
node's aggregate state (the worst case). Given the children's budget-
constrained kernels, the children's next states are independent; the
node's own beam is a single shared draw applied on top, so

    r' = max(0, max_l u_l - y),   u_l ~ child l kernel,  y ~ Bin(x, p_node).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, LookupFailure, ValidationError
from .exact import TIE_RTOL, BeamAction, option_table, receive_pmf, shift_matrix
from .phy import BeamGroup
from .scenario import BINARY_TREE, Scenario, validate_tree

TUPLE_BUDGET = 20_000_000  # entries of one node's (state x tuple) table


class SequencingError(RuntimeError):
    """A node was solved before its dependencies."""


@dataclass(eq=False)
class TreeNode:
    group: BeamGroup
    children: tuple["TreeNode", ...] = ()

    @property
    def members(self) -> tuple[int, ...]:
        return self.group.members

    @property
    def leaf_count(self) -> int:
        return len(self.group.members)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def postorder(self):
        for c in self.children:
            yield from c.postorder()
        yield self

    def __repr__(self):
        if self.is_leaf:
            return f"Leaf{self.group.label()}"
        return f"Node{self.group.label()}{list(self.children)}"


def _binary(ids: list[int]):
    if len(ids) == 1:
        return ids[0]
    half = (len(ids) + 1) // 2
    return (_binary(ids[:half]), _binary(ids[half:]))


def build_tree(scenario: Scenario, tree_spec=None) -> TreeNode:
    """Tree from ``"binary-index-order"`` or a nested list/tuple of user ids."""
    spec = scenario.tree if tree_spec is None else tree_spec
    if isinstance(spec, str):
        if spec != BINARY_TREE:
            raise ValidationError(f"unknown tree spec {spec!r}")
        spec = _binary([u.id for u in scenario.users])
    validate_tree(spec, scenario.n_users)

    def make(node) -> TreeNode:
        while isinstance(node, (list, tuple)) and len(node) == 1:
            node = node[0]
        if isinstance(node, int):
            return TreeNode(scenario.group((node,)))
        kids = tuple(make(c) for c in node)
        members = tuple(sorted(i for k in kids for i in k.members))
        return TreeNode(scenario.group(members), kids)

    return make(spec)


def aggregate(children_residuals: Sequence[int]) -> int:
    """Worst-case aggregate state of a node: the max over its children."""
    if len(children_residuals) == 0:
        raise ValidationError("aggregate of an empty list")
    return int(max(children_residuals))


@dataclass
class NodeTable:
    """Solved tables of one node; budget axis runs over 0..X_cap."""

    node: TreeNode
    values: np.ndarray  # (T+1, m+1) unconstrained cost-to-go, last row terminal
    choice: np.ndarray  # (T, A, m+1) flat tuple index
    kernel: np.ndarray  # (T, A, m+1, m+1)
    duration: np.ndarray  # (T, A, m+1)
    solved: list = field(default_factory=list)  # slots solved so far


class HierarchicalPolicy:
    kind = "hierarchical"

    def __init__(self, scenario: Scenario, root: TreeNode, epsilon: float, x_cap: int):
        self.scenario = scenario
        self.root = root
        self.epsilon = float(epsilon)
        self.x_cap = x_cap
        self.m = scenario.m
        self.xs, self.ks = option_table(x_cap, len(scenario.schemes))
        self.nodes = list(root.postorder())
        self.tables: dict[int, NodeTable] = {}
        horizon = scenario.r_max + 1
        a, m1 = x_cap + 1, scenario.m + 1
        for node in self.nodes:
            values = np.zeros((horizon + 1, m1))
            values[-1] = self.epsilon * node.leaf_count * (np.arange(m1) > 0)
            self.tables[id(node)] = NodeTable(
                node,
                values,
                np.zeros((horizon, a, m1), dtype=np.int64),
                np.zeros((horizon, a, m1, m1)),
                np.zeros((horizon, a, m1)),
            )

    @property
    def groups(self) -> list[BeamGroup]:
        return sorted((n.group for n in self.nodes), key=lambda g: (len(g.members), g.members))

    def table(self, node: TreeNode) -> NodeTable:
        return self.tables[id(node)]

    @property
    def J0(self) -> float:
        return float(self.table(self.root).values[0, self.m])

    def tuple_shape(self, node: TreeNode) -> tuple[int, ...]:
        return (self.x_cap + 1,) * len(node.children) + (len(self.xs),)

    def decode_tuple(self, node: TreeNode, flat: int):
        *budgets, opt = np.unravel_index(int(flat), self.tuple_shape(node))
        x, k = int(self.xs[opt]), int(self.ks[opt])
        scheme = self.scenario.schemes[k] if x else None
        return [int(b) for b in budgets], x, scheme

    def child_step(self, node: TreeNode, r: int, budget: int, t: int):
        """(pmf over r', expected slot airtime, (budgets, x, scheme)) for ``node``."""
        tab = self.table(node)
        if t not in tab.solved:
            raise SequencingError(f"node {node.group.label()} not solved for slot {t}")
        flat = tab.choice[t, budget, r]
        return tab.kernel[t, budget, r].copy(), float(tab.duration[t, budget, r]), self.decode_tuple(
            node, flat
        )

    # ------------------------------------------------------------ solving

    def _solve_node(self, node: TreeNode, t: int) -> None:
        tab = self.table(node)
        if t + 1 <= self.scenario.r_max and t + 1 not in tab.solved:
            raise SequencingError(f"node {node.group.label()}: slot {t + 1} unsolved")
        for c in node.children:
            if t not in self.table(c).solved:
                raise SequencingError(f"child {c.group.label()} unsolved at slot {t}")

        m1 = self.m + 1
        n_budget = self.x_cap + 1
        p_kids = len(node.children)
        n_opt = len(self.xs)
        n_tuples = n_budget**p_kids * n_opt
        if n_tuples * m1 > TUPLE_BUDGET:
            raise CapacityError(
                f"node {node.group.label()}: {n_tuples} action tuples exceed the budget"
            )

        # distribution of max_l u_l for every state and budget vector: (m1, B, m1)
        cdf = np.ones((m1,) + (1,) * p_kids + (m1,))
        for ell, c in enumerate(node.children):
            ck = np.cumsum(self.table(c).kernel[t], axis=-1)  # (A, r, u)
            ck = np.moveaxis(ck, 1, 0)  # (r, A, u)
            shape = [m1] + [1] * p_kids + [m1]
            shape[1 + ell] = n_budget
            cdf = cdf * ck.reshape(shape)
        if p_kids == 0:
            pmf_u = np.eye(m1)[:, None, :]
        else:
            cdf = np.minimum(cdf, 1.0)
            pmf_u = np.diff(cdf, axis=-1, prepend=0.0).reshape(m1, -1, m1)
            pmf_u = np.maximum(pmf_u, 0.0)
        n_b = pmf_u.shape[1]

        p_beam = self.scenario.p_dec(node.members)
        shifts = np.empty((n_opt, m1, m1))
        for o in range(n_opt):
            x, k = int(self.xs[o]), int(self.ks[o])
            shifts[o] = np.eye(m1) if x == 0 else shift_matrix(self.m, receive_pmf(x, p_beam[k]))
        own_dur = np.where(self.xs > 0, self.xs * self.scenario.tau[np.maximum(self.ks, 0)], 0.0)

        w = shifts @ tab.values[t + 1]  # (O, m1): expected next cost per pre-beam state
        q = np.einsum("rbu,ou->rbo", pmf_u, w)
        kid_dur = np.zeros((m1,) + (1,) * p_kids)
        for ell, c in enumerate(node.children):
            d = self.table(c).duration[t].T  # (r, A)
            shape = [m1] + [1] * p_kids
            shape[1 + ell] = n_budget
            kid_dur = kid_dur + d.reshape(shape)
        kid_dur = np.broadcast_to(kid_dur, (m1,) + (n_budget,) * p_kids).reshape(m1, n_b)
        dur = kid_dur[:, :, None] + own_dur[None, None, :]  # (r, B, O)
        q = (q + dur).reshape(m1, -1)
        dur = dur.reshape(m1, -1)

        grids = np.meshgrid(*[np.arange(n) for n in self.tuple_shape(node)], indexing="ij")
        comps = [g.ravel() for g in grids[:-1]] + [self.xs[grids[-1].ravel()]]
        max_comp = np.max(np.stack(comps), axis=0)

        rows = np.arange(m1)
        for a in range(n_budget):
            allowed = max_comp <= a
            qa = np.where(allowed[None, :], q, np.inf)
            qmin = qa.min(axis=1, keepdims=True)
            cand = qa <= qmin + TIE_RTOL * np.maximum(1.0, np.abs(qmin))
            da = np.where(cand, dur, np.inf)
            dmin = da.min(axis=1, keepdims=True)
            cand &= da <= dmin + TIE_RTOL * np.maximum(dmin, 1e-300)
            best = np.argmax(cand, axis=1)
            b_idx, o_idx = np.divmod(best, n_opt)
            tab.choice[t, a] = best
            tab.duration[t, a] = dur[rows, best]
            kern = np.einsum("ru,ruv->rv", pmf_u[rows, b_idx], shifts[o_idx])
            kern = np.maximum(kern, 0.0)
            tab.kernel[t, a] = kern / kern.sum(axis=1, keepdims=True)
            if a == n_budget - 1:
                tab.values[t] = q[rows, best]
        tab.solved.append(t)

    def solve(self) -> "HierarchicalPolicy":
        for t in range(self.scenario.r_max, -1, -1):
            for node in self.nodes:  # post-order: children before parents
                self._solve_node(node, t)
        return self

    # ------------------------------------------------------------ runtime

    def aggregates(self, residuals) -> dict[int, int]:
        agg = {}
        for node in self.nodes:
            if node.is_leaf:
                agg[id(node)] = int(residuals[node.members[0] - 1])
            else:
                agg[id(node)] = aggregate([agg[id(c)] for c in node.children])
        return agg

    def execute(self, residuals, t: int) -> list[BeamAction]:
        residuals = [int(r) for r in residuals]
        if len(residuals) != self.scenario.n_users or not all(0 <= r <= self.m for r in residuals):
            raise LookupFailure(f"state {tuple(residuals)} outside table")
        agg = self.aggregates(residuals)
        out = []
        stack = [(self.root, self.x_cap)]
        while stack:
            node, budget = stack.pop()
            flat = self.table(node).choice[t, budget, agg[id(node)]]
            budgets, x, scheme = self.decode_tuple(node, flat)
            if x:
                out.append(BeamAction(node.group, x, scheme))
            stack.extend(zip(node.children, budgets))
        out.sort(key=lambda a: (len(a.group.members), a.group.members))
        return out

    def dump(self) -> str:
        """Per-node tables: ``node<TAB>t<TAB>r<TAB>budget<TAB>budgets x scheme``."""
        lines = [f"# policy={self.kind} epsilon={self.epsilon!r} J0={self.J0!r}"]
        for node in self.nodes:
            tab = self.table(node)
            for t in range(self.scenario.r_max + 1):
                for a in range(self.x_cap + 1):
                    for r in range(self.m + 1):
                        budgets, x, scheme = self.decode_tuple(node, tab.choice[t, a, r])
                        act = f"{x}x{scheme.name}" if x else "-"
                        lines.append(
                            f"{node.group.label()}\t{t}\t{r}\t{a}\t"
                            f"[{','.join(map(str, budgets))}] {act}"
                        )
        return "\n".join(lines) + "\n"


def solve_tree(
    scenario: Scenario, epsilon: float, x_cap: int | None = None, tree_spec=None
) -> HierarchicalPolicy:
    if epsilon < 0:
        raise ValidationError("epsilon must be non-negative")
    root = build_tree(scenario, tree_spec)
    cap = scenario.cap if x_cap is None else x_cap
    return HierarchicalPolicy(scenario, root, epsilon, cap).solve()
