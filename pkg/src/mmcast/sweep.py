"""Epsilon sweeps, CSV output and the figure recipes."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import solve_broadcast, solve_unicast
from .errors import ValidationError
from .exact import value_iteration
from .hierarchy import solve_tree
from .scenario import Scenario, bundled, two_user
from .sim import SimConfig, SimStats, simulate

POLICY_KINDS = ("unicast", "broadcast", "hierarchical", "exact")

CSV_HEADER = (
    "scenario",
    "policy",
    "epsilon",
    "m",
    "rmax",
    "mean_duration_s",
    "ci_duration_s",
    "mean_failures",
    "ci_failures",
    "J0",
    "n_runs",
    "seed",
)

FIG5_RADII = (30.0, 50.0, 70.0, 90.0, 110.0, 130.0)
FIG5_ANGLES = (8.0, 16.0, 24.0, 32.0, 40.0, 48.0, 56.0, 64.0)


def solve_policy(scenario: Scenario, kind: str, epsilon: float, *, allow_large: bool = False):
    if kind == "unicast":
        return solve_unicast(scenario, epsilon)
    if kind == "broadcast":
        return solve_broadcast(scenario, epsilon)
    if kind == "hierarchical":
        return solve_tree(scenario, epsilon)
    if kind == "exact":
        return value_iteration(scenario, epsilon, allow_large=allow_large)
    raise ValidationError(f"unknown policy kind {kind!r}; choose from {POLICY_KINDS}")


def default_epsilons(scenario: Scenario, points: int = 12) -> np.ndarray:
    """Log grid over 0.1x..100x the airtime of m packets per user at the fastest scheme."""
    base = scenario.m * float(scenario.tau.min()) * scenario.n_users
    return np.geomspace(0.1 * base, 100.0 * base, points)


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    policy: str
    epsilon: float
    m: int
    rmax: int
    stats: SimStats
    J0: float

    def as_tuple(self):
        s = self.stats
        return (
            self.scenario,
            self.policy,
            self.epsilon,
            self.m,
            self.rmax,
            s.mean_duration,
            s.ci95_duration,
            s.mean_failures,
            s.ci95_failures,
            self.J0,
            s.n_runs,
            s.seed,
        )


def _point(args) -> SweepRow:
    scenario, kind, eps, config, allow_large = args
    policy = solve_policy(scenario, kind, eps, allow_large=allow_large)
    stats = simulate(policy, scenario, config)
    return SweepRow(scenario.name, kind, float(eps), scenario.m, scenario.r_max, stats, policy.J0)


def sweep(
    scenario: Scenario,
    kind: str,
    epsilons: Sequence[float] | None = None,
    config: SimConfig | None = None,
    *,
    workers: int = 1,
    allow_large: bool = False,
) -> list[SweepRow]:
    """Solve and simulate ``kind`` at each epsilon; rows come back in input order."""
    if kind not in POLICY_KINDS:
        raise ValidationError(f"unknown policy kind {kind!r}; choose from {POLICY_KINDS}")
    if kind == "exact":
        # fail fast on capacity before spawning work
        value_iteration(scenario, 0.0, allow_large=allow_large)
    eps = default_epsilons(scenario) if epsilons is None else list(epsilons)
    config = config or SimConfig(mode=scenario.reception_mode)
    jobs = [(scenario, kind, float(e), config, allow_large) for e in eps]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_point, jobs))
    return [_point(j) for j in jobs]


def format_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row.as_tuple()])
    return buf.getvalue()


def emit(rows: Sequence[SweepRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(rows))
    return path


# ------------------------------------------------------------- recipes


def figure_jobs(fig: int) -> list[tuple[Scenario, str]]:
    """(scenario, policy kind) pairs making up one figure."""
    if fig == 2:
        base = bundled("table1")
        return [
            (base.replace(m=5, r_max=r, name=f"table1_m5_R{r}"), kind)
            for r in (0, 1, 2)
            for kind in ("unicast", "hierarchical")
        ]
    if fig == 3:
        base = bundled("table1")
        return [
            (base.replace(m=m, r_max=2, name=f"table1_m{m}_R2"), kind)
            for m in (5, 7, 10)
            for kind in ("unicast", "hierarchical")
        ]
    if fig == 5:
        return [
            (two_user(theta, radius), kind)
            for radius in FIG5_RADII
            for theta in FIG5_ANGLES
            for kind in ("unicast", "hierarchical")
        ]
    raise ValidationError(f"no recipe for figure {fig}; choose 2, 3 or 5")


def run_figure(fig: int, config: SimConfig, out_dir, *, workers: int = 1) -> Path:
    rows: list[SweepRow] = []
    for scenario, kind in figure_jobs(fig):
        rows.extend(sweep(scenario, kind, None, config, workers=workers))
    return emit(rows, Path(out_dir) / f"figure{fig}.csv")


def pareto_front(durations, failures) -> tuple[np.ndarray, np.ndarray]:
    """Non-dominated (duration, failures) points sorted by duration."""
    order = np.lexsort((failures, durations))
    d_out, f_out = [], []
    best = np.inf
    for i in order:
        if failures[i] < best:
            d_out.append(durations[i])
            f_out.append(failures[i])
            best = failures[i]
    return np.array(d_out), np.array(f_out)


def duration_at_failures(durations, failures, levels) -> np.ndarray:
    """Airtime needed to reach each failure level, linear between front points."""
    d, f = pareto_front(np.asarray(durations), np.asarray(failures))
    # f decreases along the front; np.interp needs increasing abscissae
    return np.interp(levels, f[::-1], d[::-1])


def matched_gap(a_rows: Sequence[SweepRow], b_rows: Sequence[SweepRow], levels: int = 20) -> float:
    """Mean airtime of ``b`` minus ``a`` over failure levels both curves reach."""
    da = np.array([r.stats.mean_duration for r in a_rows])
    fa = np.array([r.stats.mean_failures for r in a_rows])
    db = np.array([r.stats.mean_duration for r in b_rows])
    fb = np.array([r.stats.mean_failures for r in b_rows])
    lo = max(fa.min(), fb.min())
    hi = min(fa.max(), fb.max())
    if hi <= lo:
        raise ValidationError("curves share no failure range")
    grid = np.linspace(lo, hi, levels)
    return float(np.mean(duration_at_failures(db, fb, grid) - duration_at_failures(da, fa, grid)))
