"""Compare sampler particle-number frequencies with the quadrature oracle on one cube."""
import argparse
import math
import time

from markedgibbs.diagnostics import batch_means
from markedgibbs.lattice import Window
from markedgibbs.model import (BilinearSpin, ConstantCoupling, ModelSpec, PolynomialSpinEnergy,
                               PowerLawPotential)
from markedgibbs.oracle import brute_partition, oracle_marginals
from markedgibbs.refmeasure import make_rng
from markedgibbs.sampler import Chain, KernelConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=0.5)
    ap.add_argument("--qv", type=int, default=4)
    ap.add_argument("--z", type=float, default=0.5)
    ap.add_argument("--J0", type=float, default=0.1)
    ap.add_argument("--steps", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    model = ModelSpec(1, 1, 1.0, args.z, 1.0, PowerLawPotential(1.0, args.delta, 1, 1.0),
                      ConstantCoupling(args.J0, 1.0), BilinearSpin(), PolynomialSpinEnergy(args.qv))
    cube = Window.interval(0, 0)
    t0 = time.perf_counter()
    res = brute_partition(cube, None, model, n_max=5)
    t1 = time.perf_counter()
    probs, _ = oracle_marginals(res)
    chain = Chain(model, cube, kcfg=KernelConfig(), rng=make_rng(args.seed))
    chain.burn_in()
    trace = chain.count_trace(args.steps)
    t2 = time.perf_counter()
    print(f"# Z={res.Z!r} tail={res.tail_bound:.3g} oracle {t1 - t0:.1f}s sampler {t2 - t1:.1f}s")
    print("n,oracle,sampler,stderr,z,level")
    for n, p in enumerate(probs):
        if p is None:
            print(f"{n},,,,,{res.levels[n]}")
            continue
        est, se = batch_means((trace == n).astype(float))
        sig = max(se, math.sqrt(p * (1 - p) / len(trace)))
        print(f"{n},{p:.8g},{est:.8g},{se:.3g},{(est - p) / sig:+.2f},{res.levels[n]}")


if __name__ == "__main__":
    main()
