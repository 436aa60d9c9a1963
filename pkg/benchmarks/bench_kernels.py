"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times each aggregation kernel on a graph-shaped CSR, edit distance on word
sequences, and one forward+backward pass of the GNN on a default synthetic
clip. Prints the best-of-N time per backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from sthg import kernels
from sthg.graph import GraphConfig, build_graph
from sthg.model import ModelConfig, init_params, loss_and_grad
from sthg.synth import ScenarioConfig, generate_scenario
from sthg.types import EdgeKind


def cases():
    sc = generate_scenario(ScenarioConfig(num_videos=1))
    (g,) = build_graph(sc.bundles[0], GraphConfig())
    cfg = ModelConfig(d_av=16, d_a=8)
    params = init_params(cfg)
    indptr, src = g.incoming(EdgeKind.VV)
    rng = np.random.default_rng(0)
    m = rng.normal(size=(g.num_nodes, cfg.d_h))
    grad = rng.normal(size=(g.num_nodes, cfg.d_h))
    _, arg = kernels.csr_max(indptr, src, m)
    a = rng.integers(0, 50, size=200)
    b = rng.integers(0, 50, size=220)
    return {
        f"csr_mean (n={g.num_nodes}, nnz={len(src)})": lambda: kernels.csr_mean(indptr, src, m),
        "csr_mean_backward": lambda: kernels.csr_mean_backward(indptr, src, grad, g.num_nodes),
        "csr_max": lambda: kernels.csr_max(indptr, src, m),
        "csr_max_backward": lambda: kernels.csr_max_backward(arg, grad, g.num_nodes),
        "edit_distance (200 x 220 words)": lambda: kernels.edit_distance(a, b),
        "forward+backward (one clip)": lambda: loss_and_grad(g, params, cfg),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [b for b in ("native", "python") if b in kernels.BACKENDS]
    if len(backends) < 2:
        print("compiled kernels not built; timing the numpy backend only")
    results = {}
    for name in backends:
        with kernels.using(name):
            for label, fn in cases().items():
                timer = timeit.Timer(fn)
                n, _ = timer.autorange()
                results[(label, name)] = min(timer.repeat(args.repeat, n)) / n
    labels = list(dict.fromkeys(label for label, _ in results))
    width = max(map(len, labels))
    print(f"{'case':<{width}}  " + "  ".join(f"{b:>12}" for b in backends) + ("  speedup" if len(backends) == 2 else ""))
    for label in labels:
        row = [results[(label, b)] for b in backends]
        line = f"{label:<{width}}  " + "  ".join(f"{t * 1e3:>10.3f}ms" for t in row)
        if len(row) == 2:
            line += f"  {row[1] / row[0]:>6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
