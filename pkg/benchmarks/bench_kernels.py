"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--nodes 3783] [--edges 24186] [--repeat 5]

Times each kernel on inputs shaped like a Bitcoin-Alpha sized graph, then
one training epoch end to end, under both backends.
"""

import argparse
import timeit

import numpy as np

from sdgnn import kernels
from sdgnn.synthetic import synthetic_signed_digraph
from sdgnn.trainer import TrainConfig, train


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(nodes, edges, dim, seed=0):
    g = synthetic_signed_digraph(nodes=nodes, edges=edges, seed=seed)
    rng = np.random.default_rng(seed)
    indptr, indices = g.undirected_csr()
    rows = rng.choice(nodes, size=min(nodes, 500), replace=False)
    values = rng.normal(size=(edges, dim))
    seg = rng.integers(0, nodes, size=edges)
    vec = values[:, 0].copy()
    cfg = TrainConfig(epochs=1, model=TrainConfig().model)
    return {
        "csr_gather": lambda: kernels.csr_gather(indptr, indices, rows),
        "segment_sum": lambda: kernels.segment_sum(values, seg, nodes),
        "segment_max": lambda: kernels.segment_max(vec, seg, nodes),
        "list_triangles": lambda: kernels.list_triangles(indptr, indices),
        "train_epoch": lambda: train(g, cfg),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=3783)
    p.add_argument("--edges", type=int, default=24186)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    if not kernels.HAVE_EXTENSION:
        print("compiled extension not built; only the numpy fallback can be timed")
    backends = ["python"] + (["cython"] if kernels.HAVE_EXTENSION else [])
    work = cases(args.nodes, args.edges, args.dim)
    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in work.items():
        repeat = 1 if name == "train_epoch" else args.repeat
        times = []
        for b in backends:
            with kernels.use_backend(b):
                fn()  # warm up
                times.append(best_of(fn, repeat))
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{name:<16}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
