"""Render publication-style figures from sbmtc JSON outputs.

Presentation only: every statistic is read from the versioned JSON documents
the inference CLI emits; nothing is recomputed here.  Byte-identical inputs
yield identical figure geometry.

Report kinds
------------
recovery     overlap-vs-c curves with the detectability threshold marked
             (input: one or more recovery/v1 documents)
dl           description-length comparison bars per dataset
             (input: a JSON list of {name, sigma_sbm, sigma_sbmtc})
ppc          predictive clustering histogram with the observed value marked
             (input: one or more ppc/v1 documents)
zscore       predictive z-score dot plot with the +-2 band
             (input: a JSON list of {name, model, zscore} or ppc/v1 docs)
clustering   C(G) vs posterior seminal clustering C_S bars
             (input: a JSON list of {name, c_observed, c_seminal})
prediction   precision/recall distributions per prior
             (input: one or more predict/v1 documents)
"""

import argparse
import json
import sys

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "sbmtc-figures"
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, out):
    meta = {"Date": None} if str(out).endswith(".svg") else None
    fig.savefig(out, metadata=meta)
    plt.close(fig)

KINDS = ("recovery", "dl", "ppc", "zscore", "clustering", "prediction")


class SchemaError(ValueError):
    """Input JSON does not match the expected versioned schema."""


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def _require(doc, schema):
    if not isinstance(doc, dict) or doc.get("schema") != schema:
        raise SchemaError("expected a %s document" % schema)


def render_recovery(docs, out):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    for doc in docs:
        _require(doc, "recovery/v1")
        pts = doc["points"]
        if not pts:
            raise SchemaError("recovery document has no points")
        cs = [p["c"] for p in pts]
        label = doc.get("label") or "%s p=%s" % (
            doc.get("model", "?"), doc.get("spec", {}).get("p", "?"))
        ax1.errorbar(cs, [p["overlap_mean"] for p in pts],
                     yerr=[p.get("overlap_sd", 0.0) for p in pts],
                     marker="o", capsize=2, label=label)
        ax2.plot(cs, [p["be_mean"] for p in pts], marker="s", label=label)
    cstar = docs[0].get("c_star_plus")
    for ax in (ax1, ax2):
        if cstar is not None:
            ax.axvline(cstar, ls="--", color="k", lw=0.8)
        ax.set_xlabel("assortativity c")
        ax.legend(fontsize=7)
    ax1.set_ylabel("overlap with planted partition")
    ax1.set_ylim(-0.02, 1.02)
    ax2.set_ylabel("effective groups")
    fig.tight_layout()
    _save(fig, out)


def render_dl(docs, out):
    rows = docs[0] if len(docs) == 1 and isinstance(docs[0], list) else docs
    if not rows:
        raise SchemaError("no description-length records")
    for row in rows:
        if not {"name", "sigma_sbm", "sigma_sbmtc"} <= set(row):
            raise SchemaError("dl records need name, sigma_sbm, sigma_sbmtc")
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(rows), 3.4))
    xs = range(len(rows))
    w = 0.38
    ax.bar([x - w / 2 for x in xs], [r["sigma_sbm"] for r in rows], w,
           label="SBM")
    ax.bar([x + w / 2 for x in xs], [r["sigma_sbmtc"] for r in rows], w,
           label="SBM/TC")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([r["name"] for r in rows], rotation=20, ha="right",
                       fontsize=8)
    ax.set_ylabel("description length (nats)")
    ax.legend()
    fig.tight_layout()
    _save(fig, out)


def render_ppc(docs, out):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    observed = None
    for doc in docs:
        _require(doc, "ppc/v1")
        if not doc["samples"]:
            raise SchemaError("ppc document has an empty sample vector")
        ax.hist(doc["samples"], bins=30, density=True, alpha=0.55,
                label=doc.get("model", "?"))
        observed = doc["observed_c"]
    if observed is not None:
        ax.axvline(observed, color="k", lw=1.4, label="observed C")
    ax.set_xlabel("clustering coefficient")
    ax.set_ylabel("predictive density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out)


def render_zscore(docs, out):
    rows = []
    for doc in docs:
        if isinstance(doc, list):
            rows.extend(doc)
        else:
            _require(doc, "ppc/v1")
            rows.append({"name": doc.get("name", "dataset"),
                         "model": doc.get("model", "?"),
                         "zscore": doc["zscore"]})
    if not rows:
        raise SchemaError("no z-score records")
    names = sorted({r["name"] for r in rows})
    models = sorted({r["model"] for r in rows})
    fig, ax = plt.subplots(figsize=(1.6 + 0.9 * len(names), 3.4))
    markers = {m: mk for m, mk in zip(models, "os^v")}
    for r in rows:
        x = names.index(r["name"])
        ax.scatter([x], [r["zscore"]], marker=markers[r["model"]],
                   label=r["model"])
    for y in (-2, 2):
        ax.axhline(y, color="k", lw=0.8)
    handles, labels = ax.get_legend_handles_labels()
    seen = dict(zip(labels, handles))
    ax.legend(seen.values(), seen.keys(), fontsize=8)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("predictive z-score")
    fig.tight_layout()
    _save(fig, out)


def render_clustering(docs, out):
    rows = docs[0] if len(docs) == 1 and isinstance(docs[0], list) else docs
    if not rows:
        raise SchemaError("no clustering records")
    for row in rows:
        if not {"name", "c_observed", "c_seminal"} <= set(row):
            raise SchemaError(
                "clustering records need name, c_observed, c_seminal"
            )
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(rows), 3.4))
    xs = range(len(rows))
    w = 0.38
    ax.bar([x - w / 2 for x in xs], [r["c_observed"] for r in rows], w,
           label="C(G)")
    ax.bar([x + w / 2 for x in xs], [r["c_seminal"] for r in rows], w,
           label="C_S (seminal)")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([r["name"] for r in rows], rotation=20, ha="right",
                       fontsize=8)
    ax.set_ylabel("clustering coefficient")
    ax.legend()
    fig.tight_layout()
    _save(fig, out)


def render_prediction(docs, out):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.4))
    for doc in docs:
        _require(doc, "predict/v1")
        recs = doc["records"]
        if not recs:
            raise SchemaError("predict document has no records")
        label = doc.get("prior", "?")
        ax1.hist([r["precision"] for r in recs], bins=20, alpha=0.55,
                 label=label)
        ax2.hist([r["recall"] for r in recs], bins=20, alpha=0.55,
                 label=label)
    ax1.set_xlabel("precision")
    ax2.set_xlabel("recall")
    ax1.set_ylabel("replicates")
    for ax in (ax1, ax2):
        ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out)


RENDERERS = {
    "recovery": render_recovery,
    "dl": render_dl,
    "ppc": render_ppc,
    "zscore": render_zscore,
    "clustering": render_clustering,
    "prediction": render_prediction,
}


def render(report_kind, input_paths, out_path):
    """Render one report kind from JSON files to a vector-graphic file."""
    if report_kind not in RENDERERS:
        raise SchemaError("unknown report kind %r" % report_kind)
    docs = [_load(p) for p in input_paths]
    if not docs:
        raise SchemaError("no input documents")
    RENDERERS[report_kind](docs, out_path)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="sbmtc-figures")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("inputs", nargs="+")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        render(args.kind, args.inputs, args.out)
    except SchemaError as exc:
        print("sbmtc-figures: %s" % exc, file=sys.stderr)
        return 4
    except OSError as exc:
        print("sbmtc-figures: I/O error: %s" % exc, file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
