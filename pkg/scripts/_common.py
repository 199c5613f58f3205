import argparse

from mmcast.sim import SimConfig


def parser(doc: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--runs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--workers", type=int, default=1)
    return p


def config(args) -> SimConfig:
    return SimConfig(n_runs=args.runs, seed=args.seed)
