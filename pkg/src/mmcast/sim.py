"""Monte Carlo replay of solved policies on random channel draws.

Runs are processed in fixed blocks of ``BLOCK`` runs. Block ``b`` draws
from its own counter-based Philox stream keyed by ``(seed, b)``, so blocks
can run in any order (or in parallel) and still give bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .scenario import RECEPTION_MODES, Scenario

BLOCK = 1024
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimConfig:
    n_runs: int = 100_000
    seed: int = 0
    mode: str = "worst-user"

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValidationError("n_runs must be >= 1")
        if self.mode not in RECEPTION_MODES:
            raise ValidationError(f"mode must be one of {RECEPTION_MODES}")


@dataclass(frozen=True)
class SimStats:
    mean_duration: float
    mean_failures: float
    ci95_duration: float
    ci95_failures: float
    n_runs: int
    seed: int
    epsilon: float
    mean_cost: float
    se_cost: float

    @property
    def se_duration(self) -> float:
        return self.ci95_duration / Z95

    @property
    def se_failures(self) -> float:
        return self.ci95_failures / Z95


def _half_width(x: np.ndarray) -> float:
    if len(x) < 2:
        return 0.0
    return float(Z95 * np.std(x, ddof=1) / math.sqrt(len(x)))


class _Beams:
    """Per-policy lookup arrays: beam index, probabilities, airtimes."""

    def __init__(self, policy, scenario: Scenario, mode: str):
        self.groups = list(policy.groups)
        self.index = {g.members: j for j, g in enumerate(self.groups)}
        self.scheme_index = {s.name: k for k, s in enumerate(scenario.schemes)}
        n, n_g, n_k = scenario.n_users, len(self.groups), len(scenario.schemes)
        self.membership = np.zeros((n_g, n))
        self.p_shared = np.zeros((n_g, n_k))
        self.p_member = np.zeros((n_g, n_k, n))
        for j, g in enumerate(self.groups):
            cols = [i - 1 for i in g.members]
            self.membership[j, cols] = 1.0
            self.p_shared[j] = scenario.p_dec(g.members)
            self.p_member[j][:, cols] = scenario.p_dec_members(g.members)
        self.tau = scenario.tau
        self.mode = mode

    def encode(self, actions):
        n_g = len(self.groups)
        x = np.zeros(n_g, dtype=np.int64)
        k = np.zeros(n_g, dtype=np.int64)
        for a in actions:
            j = self.index[a.group.members]
            x[j] = a.packets
            k[j] = self.scheme_index[a.scheme.name]
        return x, k


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _run_block(policy, scenario, beams: _Beams, n, seed, block, cache, trace=None):
    rng = block_rng(seed, block)
    resid = np.full((n, scenario.n_users), scenario.m, dtype=np.int64)
    duration = np.zeros(n)
    if trace is not None:
        trace.append(resid.copy())
    cols = np.arange(len(beams.groups))
    for t in range(scenario.r_max + 1):
        uniq, inv = np.unique(resid, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        xu = np.empty((len(uniq), len(beams.groups)), dtype=np.int64)
        ku = np.empty_like(xu)
        for u, state in enumerate(uniq):
            key = (t, state.tobytes())
            if key not in cache:
                cache[key] = beams.encode(policy.execute(state, t))
            xu[u], ku[u] = cache[key]
        x, k = xu[inv], ku[inv]
        duration += (x * beams.tau[k]).sum(axis=1)
        if beams.mode == "worst-user":
            y = rng.binomial(x, beams.p_shared[cols, k])
            got = y @ beams.membership
        else:
            p = beams.p_member[cols[None, :], k]  # (n, G, N)
            y = rng.binomial(np.broadcast_to(x[:, :, None], p.shape), p)
            got = y.sum(axis=1)
        resid = np.maximum(0, resid - got.astype(np.int64))
        if trace is not None:
            trace.append(resid.copy())
    failures = (resid > 0).sum(axis=1).astype(float)
    return duration, failures


def simulate_samples(policy, scenario: Scenario, config: SimConfig, blocks=None, trace=False):
    """Per-run (durations, failures) arrays in run order.

    ``blocks`` restricts the run to a subset of block indices (results come
    back in the order given). With ``trace=True`` a third array of shape
    (runs, R_max + 2, N) holds the residual vector before every slot and
    after the last one.
    """
    beams = _Beams(policy, scenario, config.mode)
    cache: dict = {}
    durs, fails, traces = [], [], []
    n_blocks = -(-config.n_runs // BLOCK)
    for b in range(n_blocks) if blocks is None else blocks:
        n = min(BLOCK, config.n_runs - b * BLOCK)
        tr = [] if trace else None
        d, f = _run_block(policy, scenario, beams, n, config.seed, b, cache, tr)
        durs.append(d)
        fails.append(f)
        if trace:
            traces.append(np.stack(tr, axis=1))
    out = (np.concatenate(durs), np.concatenate(fails))
    return out + (np.concatenate(traces),) if trace else out


def simulate(policy, scenario: Scenario, config: SimConfig) -> SimStats:
    """Mean duration / failures of ``policy`` with 95% normal-approximation CIs."""
    d, f = simulate_samples(policy, scenario, config)
    eps = float(getattr(policy, "epsilon", 0.0))
    cost = d + eps * f
    se = float(np.std(cost, ddof=1) / math.sqrt(len(cost))) if len(cost) > 1 else 0.0
    return SimStats(
        mean_duration=float(np.mean(d)),
        mean_failures=float(np.mean(f)),
        ci95_duration=_half_width(d),
        ci95_failures=_half_width(f),
        n_runs=config.n_runs,
        seed=config.seed,
        epsilon=eps,
        mean_cost=float(np.mean(cost)),
        se_cost=se,
    )
