"""Time the compiled rollout kernel against the numpy fallback.

Runs a forward rollout and a forward+backward pass of the squared error on
the refined synthetic graph, checks both kernels agree, and prints a table.

    python benchmarks/bench_rollout.py [--size 100] [--repeats 5]
"""
import argparse
import time

import numpy as np

from hgs.data import gen_synthetic
from hgs.graph import SuperGraph, augment, build_synthetic_graph, condense
from hgs.mnode import MnodeConfig, MnodeModel
from hgs.mnode import backend
from hgs.nn import ad


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    graph = augment(condense(SuperGraph.from_mech(build_synthetic_graph("refined"))))
    model = MnodeModel.create(graph, MnodeConfig(delta_t=0.05, encoder=False), seed=2024)
    ds = gen_synthetic(0, size=args.size).aligned(model)
    pv0 = model.params.values

    def forward(name):
        return model.predict_arrays(ds.past_obs, ds.past_inputs, ds.future_inputs, backend_name=name)

    def loss_grad(name):
        def f(pv):
            r = ad.sub(model.predict_arrays(ds.past_obs, ds.past_inputs, ds.future_inputs, pv, name), ds.future_obs)
            return ad.vsum(ad.square(r))
        return ad.value_and_grad(f, pv0)

    names = ["python"]
    try:
        backend.get("compiled")
        names.append("compiled")
    except ImportError:
        print("compiled kernel not built; timing the numpy fallback only")

    if len(names) == 2:
        fp, fc = forward("python"), forward("compiled")
        (vp, gp), (vc, gc) = loss_grad("python"), loss_grad("compiled")
        print(f"max |forward diff| {np.max(np.abs(fp - fc)):.2e}, max |grad diff| {np.max(np.abs(gp - gc)):.2e}")

    print(f"refined graph, N={args.size}, q={ds.q}, {pv0.size} parameters, best of {args.repeats}")
    print(f"{'kernel':<10}{'forward ms':>12}{'fwd+bwd ms':>12}")
    rows = {}
    for name in names:
        rows[name] = (best_of(lambda: forward(name), args.repeats), best_of(lambda: loss_grad(name), args.repeats))
        print(f"{name:<10}{rows[name][0] * 1e3:>12.2f}{rows[name][1] * 1e3:>12.2f}")
    if len(names) == 2:
        print(f"speedup   {rows['python'][0] / rows['compiled'][0]:>12.1f}x{rows['python'][1] / rows['compiled'][1]:>11.1f}x")


if __name__ == "__main__":
    main()
