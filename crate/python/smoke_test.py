#!/usr/bin/env python3
"""Smoke test for the bnsl_py extension module.

Builds the cdylib with cargo if needed, loads it straight from the target
directory, and runs a simulate -> learn -> edge_posterior round trip.
"""

import importlib.util
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    lib = ROOT / "target" / "release" / "libbnsl_py.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "--release", "-p", "bnsl-py"], cwd=ROOT, check=True
        )
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "bnsl_py.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("bnsl_py", target)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    bnsl = load_module()
    n, n_obs = 8, 400
    truth, data = bnsl.simulate(n, n_obs, avg_parents=2.0, seed=7)
    assert len(truth) == n and len(data) == n_obs

    allowed = bnsl.skeleton(data, alpha=0.05)
    assert len(allowed) == n and all(len(r) == n for r in allowed)

    map_adj, log_score = bnsl.learn(data, seed=1, steps=4000)
    assert log_score < 0.0
    assert all(map_adj[i][i] == 0 for i in range(n))

    post = bnsl.edge_posterior(data, seed=2, steps=8000)
    assert all(0.0 <= p <= 1.0 for row in post for p in row)

    # every strong true edge should carry substantial skeleton posterior
    true_edges = [(u, v) for u in range(n) for v in range(n) if truth[u][v]]
    assert true_edges, "simulated graph has no edges"
    recovered = sum(
        1 for (u, v) in true_edges if max(post[u][v], post[v][u]) > 0.5
    )
    assert recovered >= len(true_edges) // 2, (
        f"only {recovered}/{len(true_edges)} true edges recovered"
    )
    print(f"smoke test passed: {recovered}/{len(true_edges)} true edges above 0.5")


if __name__ == "__main__":
    sys.exit(main())
