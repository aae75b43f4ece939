"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from panelreg import kernels
from panelreg.dataset import synthesize
from panelreg.mlp import init_params


def cases(n):
    d = synthesize(n, 1)
    X, y = d.X, d.y
    order = np.argsort(X[:, 0], kind="stable")
    xs, yc = X[order, 0].copy(), (y[order] - y.mean()).copy()
    Z = np.ascontiguousarray((X - X.mean(axis=0)) / X.std(axis=0))
    train, queries = Z[: n - 1000].copy(), Z[n - 1000:].copy()
    p = init_params(3, 8, 0)
    t = (y - y.mean()) / y.std()
    grads = [np.empty_like(p.W1), np.empty_like(p.b1), np.empty_like(p.w2)]
    return {
        "best_split": lambda m: m.best_split(xs, yc, 10),
        "knn_query (1000 queries, k=3)": lambda m: m.knn_query(train, queries, 3),
        "mlp_loss_grad": lambda m: m.mlp_loss_grad(Z, t, p.W1, p.b1, p.w2, p.b2, *grads),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=16380, help="records")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats (best is reported)")
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}; n = {args.n}")
    print(f"{'kernel':<32}" + "".join(f"{b:>14}" for b in backends) + "   speedup")
    for name, fn in cases(args.n).items():
        best = {}
        for b, mod in backends.items():
            number = 1 if name.startswith("knn") else 10
            best[b] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        cells = "".join(f"{best[b] * 1e3:>11.3f} ms" for b in backends)
        speed = f"{best['python'] / best['cython']:8.1f}x" if len(best) == 2 else "       -"
        print(f"{name:<32}{cells}{speed}")


if __name__ == "__main__":
    main()
