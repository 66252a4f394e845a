"""Command line entry point: validate | sample | moments | dpcheck | correlations | oracle."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bounds import (BoundChain, SeriesDiverging, assemble_chain, certificate_hash, certificate_text)
from .config import ConfigError, RunConfig, boundary_kind, load_config
from .configuration import MarkedConfiguration
from .diagnostics import (DegenerateWeights, OnePointReference, batch_means, estimate_CC, estimate_IC,
                          estimate_covariance_decay, estimate_exp_moment, ideal_gas_F_quantile, sample_cell_contents)
from .lattice import Window, neighborhood, tempering_F
from .model import NoFeasiblePQ, validate_assumptions
from .oracle import QuadratureUnconverged, brute_partition, oracle_marginals
from .refmeasure import EnvelopeFailure, SpinSampler, make_rng
from .sampler import Chain, EnergyDrift, make_boundary

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (QuadratureUnconverged, SeriesDiverging, EnvelopeFailure, DegenerateWeights, EnergyDrift)


class Run:
    """Output directory bookkeeping; every file carries the model fingerprint and certificate hash."""

    def __init__(self, cfg: RunConfig, out: str, seed: int, workers: int):
        self.cfg, self.out, self.seed, self.workers = cfg, out, seed, workers
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "config.toml"), "w") as fh:
            fh.write(cfg.text)
        self.fingerprint = cfg.model.fingerprint()
        self.cert_hash = "none"

    def tag(self) -> dict:
        return {"model_fingerprint": self.fingerprint, "certificate_hash": self.cert_hash}

    def path(self, name):
        return os.path.join(self.out, name)

    def write_jsonl(self, name, records):
        with open(self.path(name), "w") as fh:
            for rec in records:
                fh.write(json.dumps({**rec, **self.tag()}, sort_keys=True, separators=(",", ":")) + "\n")

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        buf.write(f"# model_fingerprint={self.fingerprint} certificate_hash={self.cert_hash}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
        with open(self.path(name), "w") as fh:
            fh.write(buf.getvalue())

    def write_xy(self, name, xs, ys):
        with open(self.path(name), "w") as fh:
            fh.write(f"# model_fingerprint={self.fingerprint} certificate_hash={self.cert_hash}\n")
            for x, y in zip(xs, ys):
                fh.write(f"{x!r} {y!r}\n")

    def write_text(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text)


def _certify(run: Run, write: bool = True):
    """Assumption report plus constant chain; returns (ok, report, chain or None, message)."""
    cfg = run.cfg
    report = validate_assumptions(cfg.model, rng=np.random.default_rng(run.seed))
    chain, msg = None, ""
    try:
        chain = assemble_chain(cfg.model, **cfg.bounds)
    except NoFeasiblePQ as exc:
        msg = f"select_pq: {exc}"
    ok = report.ok and chain is not None and chain.feasible
    if chain is not None:
        text = certificate_text(chain, run.fingerprint)
        run.cert_hash = certificate_hash(text)
        if write:
            run.write_text("certificate.txt", text)
    if write:
        with open(run.path("assumptions.json"), "w") as fh:
            json.dump({"ok": ok, "checks": report.as_dict(), "chain_error": msg, **run.tag()}, fh,
                      sort_keys=True, indent=1)
    return ok, report, chain, msg


def cmd_validate(run: Run, args) -> int:
    ok, report, chain, msg = _certify(run)
    for c in report.checks:
        print(f"{c.name:10s} {'pass' if c.passed else 'FAIL'}  {c.detail}")
    if msg:
        print(msg)
    if chain is not None:
        print(f"chain: DN0={chain.DN0:.6g} feasible={chain.feasible} C0={chain.C0:.6g} Psi={chain.Psi:.6g}")
    return EXIT_OK if ok else EXIT_FAIL


def _boundary(run: Run, region: Window, chain: BoundChain | None, spins):
    cfg = run.cfg
    p, q = (chain.p, chain.q) if chain else (3, 4)
    return make_boundary(boundary_kind(cfg.boundary), region.shell(cfg.model.range_R), cfg.model,
                         make_rng(run.seed, 0, 99), p, q, spins)


def cmd_oracle(run: Run, args, chain) -> int:
    cfg = run.cfg
    spins = SpinSampler(cfg.model.v, cfg.model.m)
    bnd, _ = _boundary(run, cfg.window, chain, spins)
    res = brute_partition(cfg.window, bnd, cfg.model, cfg.oracle.get("n_max", 5), cfg.oracle.get("q", 4),
                          spins=spins)
    probs, moms = oracle_marginals(res)
    with open(run.path("oracle.json"), "w") as fh:
        json.dump({**res.as_dict(), "probs": probs, **run.tag()}, fh, sort_keys=True, indent=1)
    lines = [f"model_fingerprint={run.fingerprint}", f"certificate_hash={run.cert_hash}",
             f"Z={res.Z!r}", f"tail_bound={res.tail_bound!r}", f"certified={res.certified}"]
    lines += [f"P_N_{n}={p!r}" for n, p in enumerate(probs)]
    run.write_text("oracle_certificate.txt", "\n".join(lines) + "\n")
    run.write_csv("oracle_marginals.csv", ["n", "P", "spin_moment", "level"],
                  [[n, p, m, lv] for n, (p, m, lv) in enumerate(zip(probs, moms, res.levels))])
    print(f"Z={res.Z:.10g} tail={res.tail_bound:.3g} certified={res.certified}")
    return EXIT_OK if res.certified else EXIT_FAIL


def cmd_sample(run: Run, args, chain) -> int:
    cfg = run.cfg
    spins = SpinSampler(cfg.model.v, cfg.model.m)
    bnd, fvals = _boundary(run, cfg.window, chain, spins)
    ch = Chain(cfg.model, cfg.window, bnd, cfg.kernel, make_rng(run.seed, 0, 0), spins)
    ch.burn_in()
    records, counts = [], []
    for i, snap in enumerate(ch.samples(cfg.n_samples)):
        counts.append(snap.n)
        records.append({"step": ch.kcfg.burn_in + (i + 1) * ch.kcfg.thin, "seed": run.seed,
                        "region": sorted(cfg.window.cells), **snap.to_dict()})
    run.write_jsonl("samples.jsonl", records)
    counts = np.array(counts)
    nmax = int(counts.max()) if len(counts) else 0
    rows = []
    for n in range(nmax + 1):
        m, se = batch_means((counts == n).astype(float))
        rows.append([n, m, se])
    run.write_csv("counts.csv", ["n", "P", "stderr"], rows)
    run.write_xy("count_trace.dat", list(range(len(counts))), counts.tolist())
    run.write_jsonl("acceptance.jsonl", [{"rates": ch.acceptance_rates(), "boundary_F": {str(k): v for k, v in fvals.items()}}])
    status = EXIT_OK
    opath = run.path("oracle.json")
    if os.path.exists(opath):
        with open(opath) as fh:
            probs = json.load(fh)["probs"]
        comp = []
        for n, p in enumerate(probs):
            if p is None:
                continue
            m, se = batch_means((counts == n).astype(float))
            # batch-means error, floored by the iid error so unseen rare counts still get a scale
            sig = max(se, math.sqrt(p * (1 - p) / max(len(counts), 1)))
            zs = (m - p) / sig if sig > 0 else 0.0
            comp.append([n, p, m, sig, zs])
            if abs(zs) > 3:
                status = EXIT_FAIL
        run.write_csv("comparison.csv", ["n", "oracle", "sampler", "sigma", "z"], comp)
        for r in comp:
            print(f"n={r[0]} oracle={r[1]:.6g} sampler={r[2]:.6g} z={r[4]:+.2f}")
    print(f"acceptance: {ch.acceptance_rates()}")
    return status


def cmd_moments(run: Run, args, chain) -> int:
    cfg = run.cfg
    a = cfg.moments.get("a", chain.a)
    spins = SpinSampler(cfg.model.v, cfg.model.m)
    recs, rows = [], []
    for i, size in enumerate(cfg.ladder):
        win = Window.centered(size, cfg.model.d)
        bnd, _ = _boundary(run, win, chain, spins)
        est = estimate_exp_moment(a, cfg.cell, win, bnd, cfg.model, cfg.n_samples, make_rng(run.seed, i, 0),
                                  chain.p, chain.q, cfg.kernel, spins)
        recs.append({"kind": "exp_moment", "window": size, "a": a, "estimate": est.estimate, "stderr": est.stderr,
                     "max_F": est.max_F, "top_decile_mass": est.top_decile_mass, "seed": run.seed,
                     "volume": win.volume, "boundary": repr(boundary_kind(cfg.boundary)),
                     "acceptance": est.acceptance, "log_ceiling": chain.Psi})
        rows.append([size, est.estimate, est.stderr])
    run.write_jsonl("moments.jsonl", recs)
    run.write_csv("moments.csv", ["window", "estimate", "stderr"], rows)
    run.write_xy("moment_trace.dat", [r[0] for r in rows], [r[1] for r in rows])
    ok = all(math.log(r[1]) <= chain.Psi for r in rows)
    for r in rows:
        print(f"window={r[0]} estimate={r[1]:.6g} stderr={r[2]:.3g}")
    return EXIT_OK if ok else EXIT_FAIL


def _dp_point(args):
    cfg, seed, zi, ji, z, J0 = args
    model = cfg.model.replace(z=z, coupling=type(cfg.model.coupling)(J0, cfg.model.range_R))
    dp = cfg.dpcheck
    chain = assemble_chain(model, **cfg.bounds)
    spins = SpinSampler(model.v, model.m)
    k = cfg.cell
    ref = OnePointReference(model, k, dp.get("reference_samples", 20000), make_rng(seed, 1, 0), spins,
                            max_count=12)
    Fbar = ideal_gas_F_quantile(model, chain.p, chain.q, dp.get("F_quantile", 0.99), rng=make_rng(seed, 2, 0),
                                spins=spins)
    n_per = dp.get("contents_per_cell", 50)
    U = make_rng(seed, 3, 0).random(n_per)
    perturbed = []
    for idx, j in enumerate(sorted(neighborhood(k, model.range_R) - {k})):
        for c in sample_cell_contents(model, j, n_per, make_rng(seed, 4, idx), spins=spins, uniforms=U):
            if tempering_F(c, chain.p, chain.q) <= Fbar:
                perturbed.append(c)
    cc = estimate_CC(ref, perturbed)
    ic = estimate_IC(ref, chain, perturbed + [MarkedConfiguration.empty(model.d, model.m)], chain.p, chain.q)
    return {"z": z, "J0": J0, "l_hat": cc["l_hat"], "l_stderr": cc["l_stderr"], "c_hat": ic["c_hat"],
            "c_raw": ic["c_raw"], "c_stderr": ic["c_stderr"], "c_slope": ic["c_slope"],
            "c_analytic": ic["c_analytic"], "h_scale": ic["h_scale"], "F_cap": Fbar, "n_boundaries": len(perturbed),
            "zi": zi, "ji": ji}


def _pool_map(fn, items, workers):
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def cmd_dpcheck(run: Run, args, chain) -> int:
    cfg = run.cfg
    zs = cfg.dpcheck.get("z_grid", [cfg.model.z])
    js = cfg.dpcheck.get("J0_grid", [getattr(cfg.model.coupling, "J0", 0.0)])
    items = [(cfg, run.seed, zi, ji, float(z), float(J0)) for zi, z in enumerate(zs) for ji, J0 in enumerate(js)]
    out = _pool_map(_dp_point, items, run.workers)
    run.write_jsonl("dpcheck.jsonl", out)
    run.write_csv("dpcheck.csv", ["z", "J0", "l_hat", "l_stderr", "c_hat", "c_raw", "c_analytic"],
                  [[r["z"], r["J0"], r["l_hat"], r["l_stderr"], r["c_hat"], r["c_raw"], r["c_analytic"]] for r in out])
    lt, ct = cfg.dpcheck.get("l_threshold", 1.0), cfg.dpcheck.get("c_threshold", math.inf)
    ok = all(r["c_hat"] - 3 * r["c_stderr"] <= r["c_analytic"] for r in out)
    for r in out:
        flag = "below" if r["l_hat"] < lt and r["c_hat"] < ct else "above"
        print(f"z={r['z']} J0={r['J0']} l={r['l_hat']:.5f} c={r['c_hat']:.4g} (analytic {r['c_analytic']:.4g}) "
              f"thresholds: {flag}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_correlations(run: Run, args, chain) -> int:
    cfg = run.cfg
    cs = cfg.correlations
    seps = cs.get("separations", [1, 2, 3, 4, 5])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = estimate_covariance_decay(cs.get("observable1", "occupancy"), cs.get("observable2", "occupancy"),
                                        seps, cfg.window, cfg.model, cfg.n_samples, make_rng(run.seed, 0, 0),
                                        cfg.kernel)
    run.write_jsonl("correlations.jsonl", [fit.as_dict()])
    run.write_csv("covariances.csv", ["separation", "distance", "cov", "stderr", "used"],
                  [[s, d, c, e, u] for s, d, c, e, u in zip(fit.separations, fit.distances, fit.cov, fit.stderr,
                                                            fit.used)])
    run.write_xy("decay.dat", fit.distances, [abs(c) for c in fit.cov])
    if fit.insufficient:
        print(f"insufficient signal: {sum(fit.used)} point(s) above 3x noise floor")
    else:
        print(f"a_hat={fit.a_hat:.4g} CI95=({fit.a_ci[0]:.4g}, {fit.a_ci[1]:.4g})")
    return EXIT_OK


COMMANDS = {"oracle": cmd_oracle, "sample": cmd_sample, "moments": cmd_moments, "dpcheck": cmd_dpcheck,
            "correlations": cmd_correlations}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="markedgibbs", description=__doc__)
    ap.add_argument("command", choices=["validate", *COMMANDS])
    ap.add_argument("--config", required=True)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--force", action="store_true")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else int(os.environ.get("MARKEDGIBBS_SEED", cfg.seed))
    workers = args.workers if args.workers is not None else int(os.environ.get("MARKEDGIBBS_WORKERS", cfg.workers))
    run = Run(cfg, args.out or cfg.out, seed, workers)
    try:
        if args.command == "validate":
            return cmd_validate(run, args)
        ok, report, chain, msg = _certify(run)
        if not ok and not args.force:
            named = ", ".join(c.name for c in report.failed) or msg or "constant chain infeasible"
            print(f"refusing to run: certificate fails ({named}); use --force", file=sys.stderr)
            return EXIT_FAIL
        if chain is None and args.command in ("moments",):
            print(f"{args.command} needs the constant chain: {msg}", file=sys.stderr)
            return EXIT_FAIL
        return COMMANDS[args.command](run, args, chain)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
