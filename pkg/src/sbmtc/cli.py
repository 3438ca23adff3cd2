"""Batch command-line surface: reproducible pipelines over edge-list files.

Commands
--------
generate pp|geometric|closure   synthetic networks + provenance sidecars
infer sbm|sbmtc                 posterior summary JSON for one network
ppc                             posterior-predictive clustering check
predict                         holdout edge-prediction precision/recall

Every command is deterministic given its full flag set (seeds included) and
every JSON output embeds the invocation, package version, and seeds.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numerical/infeasible.

JSON schemas (versioned; consumed by the figures package)
---------------------------------------------------------
provenance/v1: {schema, nodes, edges: [{i, j, generation, ego, seminal}]}
summary/v1:    {schema, invocation, version, seeds, model, graph: {n, edges},
                config, pi: [[i, j, pi_ij]...], sigma_min, sigma_mean,
                sigma_trace, be_trace, modal_labels, modal_b,
                closure_edge_fraction, acceptance, n_samples,
                samples: [...]  (retained draws for ppc)}
ppc/v1:        {schema, invocation, version, seeds, model, observed_c,
                samples: [c...], zscore}
predict/v1:    {schema, invocation, version, seeds, prior, f, records:
                [{replicate, seed, precision, recall}...]}
recovery/v1:   {schema, spec: {n, b, mean_degree, p}, c_star_plus, points:
                [{c, overlap_mean, overlap_sd, be_mean, replicates}...],
                model}  (written by the experiment harness, read by figures)
"""

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .analysis import (
    PosteriorSummary,
    posterior_predictive_clustering,
    predictive_zscore,
)
from .generators import (
    apply_triadic_closure,
    provenance_jsonable,
    sample_geometric_degree_graph,
    sample_pp_graph,
)
from .graphs import GraphError, global_clustering, parse_edge_list, serialize_edge_list
from .prediction import make_holdout, precision_recall, run_reconstruction_chain
from .sampler import ChainCollectors, ChainConfig, merge_collectors, run_chain
from .sbm import ConstraintError, PPSpec

USAGE_ERROR = 2
IO_ERROR = 3
NUMERIC_ERROR = 4


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _read_graph(path):
    with open(path) as fh:
        return parse_edge_list(fh)


def _stamp(args, seeds):
    return {
        "invocation": " ".join(sys.argv),
        "version": __version__,
        "seeds": seeds,
        "args": {k: v for k, v in vars(args).items() if k != "func"},
    }


# ---------------------------------------------------------------------------
# generate


def cmd_generate_pp(args):
    spec = PPSpec(b=args.b, n=args.n, c=args.c, mean_degree=args.mean_degree)
    rng = np.random.default_rng(args.seed)
    g, truth = sample_pp_graph(spec, rng)
    with open(args.out + ".el", "w") as fh:
        fh.write(serialize_edge_list(g))
    _write_json(args.out + ".truth.json", {
        "schema": "provenance/v1",
        "nodes": g.n,
        "labels": list(truth.labels),
        "edges": [{"i": i, "j": j, "generation": 0, "ego": None,
                   "seminal": True} for (i, j) in g.edges],
        **_stamp(args, [args.seed]),
    })
    return 0


def cmd_generate_geometric(args):
    rng = np.random.default_rng(args.seed)
    g = sample_geometric_degree_graph(
        args.n, args.mean_degree, rng, exact_edges=args.exact_edges
    )
    with open(args.out + ".el", "w") as fh:
        fh.write(serialize_edge_list(g))
    _write_json(args.out + ".truth.json", {
        "schema": "provenance/v1",
        "nodes": g.n,
        "edges": [{"i": i, "j": j, "generation": 0, "ego": None,
                   "seminal": True} for (i, j) in g.edges],
        **_stamp(args, [args.seed]),
    })
    return 0


def cmd_generate_closure(args):
    substrate = _read_graph(args.infile)
    rng = np.random.default_rng(args.seed)
    g, prov = apply_triadic_closure(substrate, args.p, args.generations, rng)
    with open(args.out + ".el", "w") as fh:
        fh.write(serialize_edge_list(g))
    doc = provenance_jsonable(g, prov)
    doc.update(_stamp(args, [args.seed]))
    _write_json(args.out + ".provenance.json", doc)
    return 0


# ---------------------------------------------------------------------------
# infer


def _chain_worker(payload):
    n, edges, cfg_kwargs, model, seed = payload
    from .graphs import SimpleGraph

    g = SimpleGraph(n, [tuple(e) for e in edges])
    cfg = ChainConfig(seed=seed, **cfg_kwargs)
    return run_chain(g, cfg, model=model).to_jsonable()


def cmd_infer(args):
    g = _read_graph(args.infile)
    cfg_kwargs = dict(
        sweeps=args.sweeps, burn_in=args.burn_in, thin=args.thin,
        l_max=args.l_max, merge_split_rate=args.merge_split_rate,
    )
    seeds = [args.seed + k for k in range(args.chains)]
    if args.chains == 1:
        collectors = [run_chain(g, ChainConfig(seed=seeds[0], **cfg_kwargs),
                                model=args.mode, checkpoint=args.checkpoint)]
    else:
        if args.checkpoint:
            raise ValueError("--checkpoint requires --chains 1")
        payloads = [(g.n, g.edges, cfg_kwargs, args.mode, s) for s in seeds]
        with ProcessPoolExecutor(max_workers=min(args.chains, args.workers)) as ex:
            docs = list(ex.map(_chain_worker, payloads))
        collectors = [ChainCollectors.from_jsonable(d) for d in docs]
    merged = merge_collectors(collectors)
    summary = PosteriorSummary.from_collectors(merged, args.mode)
    doc = {
        "schema": "summary/v1",
        "model": args.mode,
        "graph": {"n": g.n, "edges": [list(e) for e in g.edges]},
        "config": {**cfg_kwargs, "chains": args.chains, "seed": args.seed},
        "pi": [[e[0], e[1], p] for e, p in zip(g.edges, merged.seminal_marginals)],
        "sigma_min": summary.sigma_min,
        "sigma_mean": summary.sigma_mean,
        "sigma_trace": summary.sigma_trace,
        "be_trace": summary.be_trace,
        "modal_labels": summary.modal_labels,
        "modal_b": summary.modal_b,
        "closure_edge_fraction": summary.closure_edge_fraction(),
        "acceptance": summary.acceptance,
        "n_samples": summary.n_samples,
        "samples": [s.to_jsonable() for s in merged.samples],
        **_stamp(args, seeds),
    }
    _write_json(args.out, doc)
    return 0


# ---------------------------------------------------------------------------
# ppc


def cmd_ppc(args):
    with open(args.summary) as fh:
        doc = json.load(fh)
    if doc.get("schema") != "summary/v1":
        raise ValueError("expected a summary/v1 JSON document")
    if not doc.get("samples"):
        raise ValueError("summary lacks retained samples; rerun infer")
    from .graphs import SimpleGraph
    from .sampler import PosteriorSample

    g = SimpleGraph(doc["graph"]["n"], [tuple(e) for e in doc["graph"]["edges"]])
    collectors = ChainCollectors(g.edges)
    collectors.samples = [PosteriorSample.from_jsonable(s) for s in doc["samples"]]
    rng = np.random.default_rng(args.seed)
    samples = posterior_predictive_clustering(
        collectors, g.n, rng, args.draws,
        generations=args.generations, model=doc["model"],
    )
    observed = global_clustering(g)
    z = predictive_zscore(samples, observed)
    _write_json(args.out, {
        "schema": "ppc/v1",
        "model": doc["model"],
        "observed_c": observed,
        "samples": samples,
        "zscore": z,
        **_stamp(args, [args.seed]),
    })
    return 0


# ---------------------------------------------------------------------------
# predict


def _predict_worker(payload):
    n, edges, f, prior, cfg_kwargs, holdout_seed, chain_seed, rep = payload
    from .graphs import SimpleGraph

    g = SimpleGraph(n, [tuple(e) for e in edges])
    rng = np.random.default_rng(holdout_seed)
    data, spec = make_holdout(g, f, rng, seed=holdout_seed)
    cfg = ChainConfig(seed=chain_seed, **cfg_kwargs)
    marginals, _ = run_reconstruction_chain(data, cfg, prior=prior)
    prec, rec = precision_recall(marginals, spec)
    return {"replicate": rep, "seed": holdout_seed, "precision": prec,
            "recall": rec}


def cmd_predict(args):
    if args.f <= 0 or args.f > 1:
        raise ValueError("need 0 < f <= 1")
    g = _read_graph(args.infile)
    cfg_kwargs = dict(
        sweeps=args.sweeps, burn_in=args.burn_in, thin=args.thin,
        l_max=args.l_max, merge_split_rate=args.merge_split_rate,
    )
    payloads = [
        (g.n, g.edges, args.f, args.prior, cfg_kwargs,
         args.seed + 1000 * rep, args.seed + 1000 * rep + 1, rep)
        for rep in range(args.replicates)
    ]
    if args.workers > 1 and args.replicates > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            records = list(ex.map(_predict_worker, payloads))
    else:
        records = [_predict_worker(p) for p in payloads]
    _write_json(args.out, {
        "schema": "predict/v1",
        "prior": args.prior,
        "f": args.f,
        "records": records,
        **_stamp(args, [args.seed]),
    })
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    ap = argparse.ArgumentParser(
        prog="sbmtc",
        description="SBM + triadic-closure network decomposition toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthesize benchmark networks")
    gsub = gen.add_subparsers(dest="kind", required=True)

    gpp = gsub.add_parser("pp", help="planted-partition network")
    gpp.add_argument("--n", type=int, required=True)
    gpp.add_argument("--b", type=int, required=True)
    gpp.add_argument("--c", type=float, required=True)
    gpp.add_argument("--mean-degree", type=float, required=True)
    gpp.add_argument("--seed", type=int, default=1)
    gpp.add_argument("--out", required=True)
    gpp.set_defaults(func=cmd_generate_pp)

    ggeo = gsub.add_parser("geometric", help="geometric-degree random graph")
    ggeo.add_argument("--n", type=int, required=True)
    ggeo.add_argument("--mean-degree", type=float, required=True)
    ggeo.add_argument("--exact-edges", type=int, default=None)
    ggeo.add_argument("--seed", type=int, default=1)
    ggeo.add_argument("--out", required=True)
    ggeo.set_defaults(func=cmd_generate_geometric)

    gclo = gsub.add_parser("closure", help="iterated triadic closure layer")
    gclo.add_argument("--in", dest="infile", required=True)
    gclo.add_argument("--p", type=float, required=True)
    gclo.add_argument("--generations", type=int, default=1)
    gclo.add_argument("--seed", type=int, default=1)
    gclo.add_argument("--out", required=True)
    gclo.set_defaults(func=cmd_generate_closure)

    inf = sub.add_parser("infer", help="posterior inference on a network")
    inf.add_argument("mode", choices=("sbm", "sbmtc"))
    inf.add_argument("--in", dest="infile", required=True)
    inf.add_argument("--sweeps", type=int, default=2000)
    inf.add_argument("--burn-in", type=int, default=500)
    inf.add_argument("--thin", type=int, default=5)
    inf.add_argument("--chains", type=int, default=1)
    inf.add_argument("--l-max", type=int, default=5)
    inf.add_argument("--merge-split-rate", type=float, default=0.1)
    inf.add_argument("--workers", type=int, default=2)
    inf.add_argument("--seed", type=int, default=1)
    inf.add_argument("--checkpoint", default=None)
    inf.add_argument("--out", required=True)
    inf.set_defaults(func=cmd_infer)

    ppc = sub.add_parser("ppc", help="posterior-predictive clustering check")
    ppc.add_argument("--summary", required=True)
    ppc.add_argument("--draws", type=int, default=200)
    ppc.add_argument("--generations", type=int, default=1)
    ppc.add_argument("--seed", type=int, default=1)
    ppc.add_argument("--out", required=True)
    ppc.set_defaults(func=cmd_ppc)

    prd = sub.add_parser("predict", help="holdout edge prediction")
    prd.add_argument("--in", dest="infile", required=True)
    prd.add_argument("--f", type=float, required=True)
    prd.add_argument("--replicates", type=int, default=1)
    prd.add_argument("--prior", choices=("sbm", "sbmtc"), default="sbmtc")
    prd.add_argument("--sweeps", type=int, default=1500)
    prd.add_argument("--burn-in", type=int, default=400)
    prd.add_argument("--thin", type=int, default=5)
    prd.add_argument("--l-max", type=int, default=5)
    prd.add_argument("--merge-split-rate", type=float, default=0.1)
    prd.add_argument("--workers", type=int, default=2)
    prd.add_argument("--seed", type=int, default=1)
    prd.add_argument("--out", required=True)
    prd.set_defaults(func=cmd_predict)

    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print("sbmtc: I/O error: %s" % exc, file=sys.stderr)
        return IO_ERROR
    except (ConstraintError, GraphError, ValueError) as exc:
        print("sbmtc: %s" % exc, file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
