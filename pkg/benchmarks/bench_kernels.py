"""Time the compiled kernels against the numpy fallback on desk-scale inputs.

    python3 benchmarks/bench_kernels.py [--hours 8760] [--iterations 200] [--repeat 3]

Each workload runs through the public functions with the kernel module
patched to one backend at a time, and the outputs are checked for equality.
"""

import argparse
import time

import numpy as np

from marketpower import _fallback, kernels
from marketpower.monte_carlo import McConfig, simulate_unit
from marketpower.supply_curve import fit_piecewise, fuel_regime_series, segment_regimes
from marketpower.synthetic import SynthConfig, _market, _units, with_hours

NAMES = ("solve_dp", "chain_dispatch", "mc_on_counts", "partition_dp", "segreg_dp")


def use(module):
    for name in NAMES:
        setattr(kernels, name, getattr(module, name))


def timed(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def same(a, b):
    if hasattr(a, "knots"):
        return np.array_equal(a.knots, b.knots) and np.allclose(a.slopes, b.slopes, rtol=1e-9, atol=1e-12)
    if hasattr(a, "breakpoints"):
        return a.breakpoints == b.breakpoints
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--hours", type=int, default=8760)
    ap.add_argument("--iterations", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    sc = with_hours(SynthConfig(), args.hours)
    market = _market(sc)
    unit = next(u for u in _units(sc) if u.fuel_type == "ccgt")
    mc = McConfig(iterations=args.iterations)
    X = fuel_regime_series(market)
    load = market.demand - market.vre_generation
    n_fit = min(args.hours, 3000)

    workloads = {
        f"monte carlo, 1 unit x {args.iterations} it": lambda: simulate_unit(unit, market, mc),
        "regime segmentation (jump 24)": lambda: segment_regimes(X, 11, 0.95, 24),
        "regime segmentation (jump 1, 2000 h)": lambda: segment_regimes(X[:2000], 11, 0.95, 1),
        f"piecewise supply fit ({n_fit} h)": lambda: fit_piecewise(market.spot_price[:n_fit], load[:n_fit], 6),
    }
    backends = [("python", _fallback)]
    if kernels.BACKEND == "cython":
        from marketpower import _kernels
        backends.insert(0, ("cython", _kernels))
    else:
        print("compiled extension not available; timing the fallback only")

    print(f"{'workload':44s} " + " ".join(f"{b:>10s}" for b, _ in backends) + "   speedup  equal")
    for label, fn in workloads.items():
        times, outs = [], []
        for _, mod in backends:
            use(mod)
            t, out = timed(fn, args.repeat)
            times.append(t)
            outs.append(out)
        speed = f"{times[-1] / times[0]:8.1f}x" if len(times) > 1 else "       -"
        eq = same(outs[0], outs[-1]) if len(outs) > 1 else True
        print(f"{label:44s} " + " ".join(f"{t:9.3f}s" for t in times) + f"  {speed}  {eq}")


if __name__ == "__main__":
    main()
