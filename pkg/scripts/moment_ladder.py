"""Exponential moment of the tempering functional on cell 0 over a growing window ladder."""
import argparse
import math

from markedgibbs.bounds import assemble_chain
from markedgibbs.diagnostics import estimate_exp_moment
from markedgibbs.lattice import Window
from markedgibbs.model import (BilinearSpin, ConstantCoupling, ModelSpec, PolynomialSpinEnergy,
                               PowerLawPotential)
from markedgibbs.refmeasure import SpinSampler, make_rng
from markedgibbs.sampler import KernelConfig, make_boundary


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[3, 5, 7])
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--boundary-z", type=float, default=0.0, help="Poisson boundary activity (0 = empty)")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    model = ModelSpec(1, 1, 1.0, 0.5, 1.0, PowerLawPotential(1.0, 2.0, 1, 1.0), ConstantCoupling(0.1, 1.0),
                      BilinearSpin(), PolynomialSpinEnergy(6))
    ch = assemble_chain(model)
    spins = SpinSampler(model.v)
    print(f"# a={ch.a:.6g} Psi={ch.Psi:.6g} C0={ch.C0:.6g}")
    print("size,estimate,stderr,ln_estimate,top_decile_mass,acceptance_birth")
    for i, size in enumerate(args.sizes):
        win = Window.centered(size)
        kind = ("poisson", args.boundary_z) if args.boundary_z > 0 else "empty"
        bnd, _ = make_boundary(kind, win.shell(model.range_R), model, make_rng(args.seed, 100, i), ch.p, ch.q, spins)
        est = estimate_exp_moment(ch.a, (0,), win, bnd, model, args.samples, make_rng(args.seed, 5, i), ch.p, ch.q,
                                  KernelConfig(), spins)
        print(f"{size},{est.estimate:.6g},{est.stderr:.3g},{math.log(est.estimate):.6g},"
              f"{est.top_decile_mass:.3g},{est.acceptance['birth']:.3f}")


if __name__ == "__main__":
    main()
