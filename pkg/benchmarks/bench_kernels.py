"""Time the compiled kernels against the numpy fallback.

Shapes match one training snapshot of the default pipeline: 625 windows of
20-dimensional features, 4 HMM states, and a 20000-point k-means
assignment with 10 centroids.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from pcahmm._kernels import backends


def make_inputs(seed=0, T=625, S=4, n=20000, d=20, k=10):
    rng = np.random.default_rng(seed)
    A = rng.dirichlet(np.ones(S), size=S)
    pi = rng.dirichlet(np.ones(S))
    b = rng.uniform(0.01, 1.0, size=(T, S))
    b /= b.max(axis=1, keepdims=True)
    X = rng.standard_normal((n, d))
    C = np.ascontiguousarray(X[rng.choice(n, k, replace=False)])
    labels = rng.integers(0, k, size=n).astype(np.intp)
    return dict(A=A, pi=pi, b=b, X=X, C=C, labels=labels, k=k)


def cases(kern, inp):
    alpha, scale = kern.forward(inp["b"], inp["A"], inp["pi"])
    beta = kern.backward(inp["b"], inp["A"], scale)
    logb, logA, logpi = np.log(inp["b"]), np.log(inp["A"]), np.log(inp["pi"])
    return {
        "forward": lambda: kern.forward(inp["b"], inp["A"], inp["pi"]),
        "backward": lambda: kern.backward(inp["b"], inp["A"], scale),
        "xi_sum": lambda: kern.xi_sum(alpha, beta, inp["b"], inp["A"], scale),
        "viterbi": lambda: kern.viterbi(logb, logA, logpi),
        "kmeans_assign": lambda: kern.kmeans_assign(inp["X"], inp["C"]),
        "kmeans_sums": lambda: kern.kmeans_sums(inp["X"], inp["labels"], inp["k"]),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    inp = make_inputs()
    found = backends()
    results = {}
    for name, kern in found.items():
        for case, fn in cases(kern, inp).items():
            number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            results[(case, name)] = best

    names = list(found)
    print(f"{'kernel':<15}" + "".join(f"{n:>14}" for n in names) + ("      speedup" if len(names) > 1 else ""))
    for case in cases(found["python"], inp):
        row = f"{case:<15}" + "".join(f"{results[(case, n)] * 1e3:>11.3f} ms" for n in names)
        if "cython" in found:
            row += f"{results[(case, 'python')] / results[(case, 'cython')]:>12.1f}x"
        print(row)
    if "cython" not in found:
        print("compiled backend not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
