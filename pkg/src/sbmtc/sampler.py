"""Metropolis-Hastings sampling of the seminal/closure decomposition.

Three move kinds act on a ``DecompositionState``:

* owner swaps: move one unit of ownership of a uniformly chosen edge between
  two distinct generations (the seminal slot is "generation 0"); forward and
  reverse selection probabilities cancel because the relevant-ego counts never
  depend on the moved edge's own placement;
* multiplicity changes: +-1 on a layer entry, or a fresh seminal multiplicity
  drawn from a geometric law with mean A'+1, Hastings-corrected;
* partition moves: single-node relabels over existing groups plus one fresh
  label, mixed with seed-pair merge-split moves whose split allocation records
  its exact per-node probabilities (so both proposal directions are
  computable).

Reconstruction mode adds a fourth kind toggling uncertain pairs.

One chain is strictly single-threaded and deterministic given its seed: every
move kind draws from its own named Philox stream ("mix" selects the kind;
"owner", "mult", "partition", "toggle" drive the kinds; "init" is reserved for
state setup).  Checkpoints capture state, collectors, and all stream cursors
for bit-exact resume.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import tables
from .graphs import SimpleGraph
from .state import DecompositionState

STREAMS = ("mix", "owner", "mult", "partition", "toggle", "init")


@dataclass
class ChainConfig:
    sweeps: int = 1000
    burn_in: int = 200
    thin: int = 1
    l_max: int = 5
    seed: int = 1
    move_mix: tuple = (0.5, 0.5, 0.0)
    merge_split_rate: float = 0.1
    polish: int = 0
    anneal_t0: float = 1.0

    def __post_init__(self):
        if self.sweeps < 0 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("counts must be non-negative, thin >= 1")
        if abs(sum(self.move_mix) - 1.0) > 1e-9 or min(self.move_mix) < 0:
            raise ValueError("move_mix must be non-negative and sum to 1")
        if not 0.0 <= self.merge_split_rate <= 1.0:
            raise ValueError("merge_split_rate must lie in [0, 1]")
        if self.anneal_t0 < 1.0:
            raise ValueError("anneal_t0 must be >= 1")


class PosteriorSample:
    """One retained posterior draw: partition, description length, and the
    (k, e, b) + closure-count data a predictive replay needs."""

    __slots__ = ("labels", "sigma", "kdeg", "block", "cells", "seminal")

    def __init__(self, labels, sigma, kdeg, block, cells, seminal=b""):
        self.labels = labels
        self.sigma = sigma
        self.kdeg = kdeg
        self.block = block
        self.cells = cells
        self.seminal = seminal  # bitmask over the observed edge list

    @property
    def b(self):
        return len(self.block)

    def group_sizes(self):
        sizes = [0] * self.b
        for x in self.labels:
            sizes[x] += 1
        return sizes

    def to_jsonable(self):
        return {
            "labels": list(self.labels),
            "sigma": self.sigma,
            "kdeg": list(self.kdeg),
            "block": [list(r) for r in self.block],
            "cells": [[u, l, e, m] for (u, l), (e, m) in sorted(self.cells.items())],
            "seminal": self.seminal.hex(),
        }

    @classmethod
    def from_jsonable(cls, doc):
        return cls(
            tuple(doc["labels"]), doc["sigma"], tuple(doc["kdeg"]),
            [list(r) for r in doc["block"]],
            {(u, l): (e, m) for u, l, e, m in doc["cells"]},
            bytes.fromhex(doc.get("seminal", "")),
        )


class ChainCollectors:
    """Running posterior summaries accumulated along one or more chains."""

    def __init__(self, edges, uncertain=()):
        self.edges = list(edges)
        self.uncertain = list(uncertain)
        self.n_samples = 0
        self.seminal_counts = [0] * len(self.edges)
        self.on_counts = [0] * len(self.uncertain)
        self.sigma_trace = []
        self.be_trace = []
        self.samples = []
        self.best_sigma = float("inf")
        self.best_sample = None
        self.map_sigma = float("inf")   # best state ever visited (+ polish)
        self.map_labels = None
        self.acceptance = {k: [0, 0] for k in ("owner", "mult", "partition", "toggle")}

    @property
    def seminal_marginals(self):
        if self.n_samples == 0:
            return [0.0] * len(self.edges)
        return [c / self.n_samples for c in self.seminal_counts]

    @property
    def edge_on_marginals(self):
        if self.n_samples == 0:
            return [0.0] * len(self.uncertain)
        return [c / self.n_samples for c in self.on_counts]

    def to_jsonable(self):
        return {
            "edges": [list(e) for e in self.edges],
            "uncertain": [list(p) for p in self.uncertain],
            "n_samples": self.n_samples,
            "seminal_counts": self.seminal_counts,
            "on_counts": self.on_counts,
            "sigma_trace": self.sigma_trace,
            "be_trace": self.be_trace,
            "samples": [s.to_jsonable() for s in self.samples],
            "best_sigma": self.best_sigma,
            "best_sample": self.best_sample.to_jsonable() if self.best_sample else None,
            "map_sigma": self.map_sigma,
            "map_labels": self.map_labels,
            "acceptance": self.acceptance,
        }

    @classmethod
    def from_jsonable(cls, doc):
        out = cls([tuple(e) for e in doc["edges"]],
                  [tuple(p) for p in doc["uncertain"]])
        out.n_samples = doc["n_samples"]
        out.seminal_counts = list(doc["seminal_counts"])
        out.on_counts = list(doc["on_counts"])
        out.sigma_trace = list(doc["sigma_trace"])
        out.be_trace = list(doc["be_trace"])
        out.samples = [PosteriorSample.from_jsonable(s) for s in doc["samples"]]
        out.best_sigma = doc["best_sigma"]
        out.best_sample = (
            PosteriorSample.from_jsonable(doc["best_sample"])
            if doc["best_sample"] else None
        )
        out.map_sigma = doc.get("map_sigma", float("inf"))
        out.map_labels = doc.get("map_labels")
        out.acceptance = {k: list(v) for k, v in doc["acceptance"].items()}
        return out


def merge_collectors(parts):
    """Merge per-chain collectors (in seed order) into one summary."""
    if not parts:
        raise ValueError("nothing to merge")
    out = ChainCollectors(parts[0].edges, parts[0].uncertain)
    for p in parts:
        if p.edges != out.edges or p.uncertain != out.uncertain:
            raise ValueError("collectors disagree on edge order")
        out.n_samples += p.n_samples
        for t, c in enumerate(p.seminal_counts):
            out.seminal_counts[t] += c
        for t, c in enumerate(p.on_counts):
            out.on_counts[t] += c
        out.sigma_trace.extend(p.sigma_trace)
        out.be_trace.extend(p.be_trace)
        out.samples.extend(p.samples)
        if p.best_sigma < out.best_sigma:
            out.best_sigma = p.best_sigma
            out.best_sample = p.best_sample
        if p.map_sigma < out.map_sigma:
            out.map_sigma = p.map_sigma
            out.map_labels = p.map_labels
        for k, (prop, acc) in p.acceptance.items():
            out.acceptance[k][0] += prop
            out.acceptance[k][1] += acc
    return out


# ---------------------------------------------------------------------------
# proposals


def propose_owner_swap(state, rng, greedy=False, temp=1.0):
    """Attempt one ownership swap; returns (proposed, accepted).

    With ``greedy`` the move is a strict descent step on the description
    length (used by the polish phase), not an MH draw."""
    slots = state.present_slots
    ne = len(slots)
    if ne == 0:
        return False, False
    t_slot = slots[int(rng.integers(ne))]
    L = state.L
    l = int(rng.integers(L + 1))
    lp = int(rng.integers(L))
    if lp >= l:
        lp += 1
    if l > 0:
        rel = state.relevant_egos(t_slot, l)
        if not rel:
            return True, False
        u = rel[int(rng.integers(len(rel)))]
        if (u, l) not in state.owners[t_slot]:
            return True, False
    elif state.a[t_slot] < 1:
        return True, False
    if lp > 0:
        relp = state.relevant_egos(t_slot, lp)
        if not relp:
            return True, False
        v = relp[int(rng.integers(len(relp)))]
        if (v, lp) in state.owners[t_slot]:
            return True, False
    score = state.joint_log_probability if greedy else state.target_log
    before = score()
    state.begin()
    if lp > 0:
        state.add_owner(t_slot, v, lp)
    else:
        state.set_seminal(t_slot, state.a[t_slot] + 1)
    if l > 0:
        state.remove_owner(t_slot, u, l)
    else:
        state.set_seminal(t_slot, state.a[t_slot] - 1)
    after = score()
    if after == float("-inf"):
        state.rollback()
        return True, False
    d = after - before
    if not greedy and temp != 1.0:
        d /= temp
    if (d > 0) if greedy else (d >= 0 or rng.random() < math.exp(d)):
        state.commit()
        return True, True
    state.rollback()
    return True, False


def propose_multiplicity_change(state, rng, greedy=False, temp=1.0):
    """Attempt one multiplicity move; returns (proposed, accepted)."""
    slots = state.present_slots
    ne = len(slots)
    if ne == 0:
        return False, False
    t_slot = slots[int(rng.integers(ne))]
    L = state.L if state.closure_enabled else 0
    l = int(rng.integers(L + 1))
    log_hastings = 0.0
    if l == 0:
        a_old = state.a[t_slot]
        a_new = int(rng.geometric(1.0 / (a_old + 2))) - 1
        if a_new == a_old:
            return True, True
        # Hastings: ln P(a_old | a_new) - ln P(a_new | a_old)
        log_hastings = geometric_log_prob(a_new, a_old) - geometric_log_prob(
            a_old, a_new
        )
        if a_old >= 1 and a_new >= 1:
            # interior change: closure caches untouched, read-only delta
            d = state.seminal_mult_delta(t_slot, a_new)
            if not greedy:
                d += log_hastings
            if (d > 0) if greedy else (d >= 0 or rng.random() < math.exp(d)):
                state.begin()
                state.set_seminal(t_slot, a_new)
                state.commit()
                return True, True
            return True, False
        score = state.joint_log_probability if greedy else state.target_log
        before = score()
        state.begin()
        state.set_seminal(t_slot, a_new)
    else:
        rel = state.relevant_egos(t_slot, l)
        if not rel:
            return True, False
        u = rel[int(rng.integers(len(rel)))]
        up = rng.random() < 0.5
        has = (u, l) in state.owners[t_slot]
        if up == has:  # would push g outside {0, 1}
            return True, False
        score = state.joint_log_probability if greedy else state.target_log
        before = score()
        state.begin()
        if up:
            state.add_owner(t_slot, u, l)
        else:
            state.remove_owner(t_slot, u, l)
    after = (state.joint_log_probability if greedy else state.target_log)()
    if after == float("-inf"):
        state.rollback()
        return True, False
    if greedy:
        d = after - before
    else:
        d = (after - before) / (temp if l else 1.0) + log_hastings
    if (d > 0) if greedy else (d >= 0 or rng.random() < math.exp(d)):
        state.commit()
        return True, True
    state.rollback()
    return True, False


def geometric_log_prob(a_from, a_to):
    """ln P(A'' = a_to | A' = a_from) for the geometric proposal with mean
    a_from + 1."""
    if a_to < 0:
        return float("-inf")
    return a_to * math.log((a_from + 1.0) / (a_from + 2.0)) - math.log(a_from + 2.0)


def propose_partition_move(state, rng, merge_split_rate=0.1, greedy=False, temp=1.0):
    """Attempt one partition move; returns (proposed, accepted)."""
    if rng.random() < merge_split_rate:
        return _merge_split(state, rng, greedy, temp)
    node = int(rng.integers(state.n))
    nb = state.B
    idx = int(rng.integers(nb + 1))
    target = state.gid_list[idx] if idx < nb else None
    if target is not None and target == state.labels[node]:
        return True, True  # identity relabel, zero delta
    d_joint, d_target, b_after = state.single_move_delta(node, target)
    if greedy:
        d = d_joint
    else:
        d = d_target + math.log(nb + 1) - math.log(b_after + 1)
    if (d > 0) if greedy else (d >= 0 or rng.random() < math.exp(d)):
        state.begin()
        state.move_node(node, target)
        state.commit()
        return True, True
    return True, False


def _alloc_prob(state, v, set_x, set_y):
    """Smoothed multigraph-edge affinity of node v for side X of a split."""
    dx = dy = 0
    a = state.a
    for w, t_slot in state.adj[v].items():
        m = a[t_slot]
        if m:
            if w in set_x:
                dx += m
            elif w in set_y:
                dy += m
    return (dx + 1.0) / (dx + dy + 2.0)


def _merge_split(state, rng, greedy=False, temp=1.0):
    n = state.n
    if n < 2:
        return False, False
    x = int(rng.integers(n))
    y = int(rng.integers(n - 1))
    if y >= x:
        y += 1
    r = state.labels[x]
    s = state.labels[y]
    if r == s:
        # split group r with seeds x (stays) and y (leaves)
        others = sorted(state.members[r] - {x, y})
        set_x = {x}
        set_y = {y}
        log_q = 0.0
        for v in others:
            px = _alloc_prob(state, v, set_x, set_y)
            if rng.random() < px:
                set_x.add(v)
                log_q += math.log(px)
            else:
                set_y.add(v)
                log_q += math.log(1.0 - px)
        score = state.joint_log_probability if greedy else state.target_log
        before = score()
        state.begin()
        it = iter(sorted(set_y))
        first = next(it)
        state.move_node(first, None)
        fresh = state.labels[first]
        for v in it:
            state.move_node(v, fresh)
        after = score()
        d = (after - before) if greedy else ((after - before) / temp - log_q)
    else:
        # merge s into r; reverse is the seed-pair split replayed with
        # forced outcomes
        mem_r = state.members[r]
        mem_s = state.members[s]
        others = sorted((mem_r | mem_s) - {x, y})
        set_x = {x}
        set_y = {y}
        log_q = 0.0
        for v in others:
            px = _alloc_prob(state, v, set_x, set_y)
            if v in mem_r:
                set_x.add(v)
                log_q += math.log(px)
            else:
                set_y.add(v)
                log_q += math.log(1.0 - px)
        score = state.joint_log_probability if greedy else state.target_log
        before = score()
        state.begin()
        for v in sorted(mem_s):
            state.move_node(v, r)
        after = score()
        d = (after - before) if greedy else ((after - before) / temp + log_q)
    if (d > 0) if greedy else (d >= 0 or rng.random() < math.exp(d)):
        state.commit()
        return True, True
    state.rollback()
    return True, False


def propose_toggle(state, rng):
    """Attempt one uncertain-pair toggle; returns (proposed, accepted)."""
    cand = state.uncertain_slots
    if not cand:
        return False, False
    t_slot = cand[int(rng.integers(len(cand)))]
    want_on = rng.random() < 0.5
    if state.present[t_slot] == want_on:
        return True, True  # no-op proposal
    if not want_on and (
        state.a[t_slot] != 1 or state.owners[t_slot] or state.total_own[t_slot] != 1
    ):
        return True, False  # only solely-seminal edges may switch off
    before = state.target_log()
    state.begin()
    state.toggle_pair(t_slot, want_on)
    after = state.target_log()
    if after == float("-inf"):
        state.rollback()
        return True, False
    d = after - before
    if d >= 0 or rng.random() < math.exp(d):
        state.commit()
        return True, True
    state.rollback()
    return True, False


# ---------------------------------------------------------------------------
# sweeps and chains


def mcmc_sweep(state, config, rngs, stats, sbm_only=False, greedy=False, temp=1.0):
    """One sweep: an edge-move attempt per present edge, a partition-move
    attempt per node, and (in reconstruction mode) a toggle attempt per
    uncertain pair.  Amortized O(k_i + k_j) per edge move.

    ``greedy`` turns every acceptance into strict descent on the description
    length (the polish phase)."""
    mix = rngs["mix"]
    r_owner = rngs["owner"]
    r_mult = rngs["mult"]
    r_part = rngs["partition"]
    w0, w1 = config.move_mix[0], config.move_mix[1]
    p_swap = 0.0 if sbm_only or (w0 + w1) == 0 else w0 / (w0 + w1)
    ne = len(state.present_slots)
    swap_flags = mix.random(ne) < p_swap if ne else ()
    for t in range(ne):
        if swap_flags[t]:
            prop, acc = propose_owner_swap(state, r_owner, greedy, temp)
            key = "owner"
        else:
            prop, acc = propose_multiplicity_change(state, r_mult, greedy, temp)
            key = "mult"
        if prop:
            st = stats[key]
            st[0] += 1
            st[1] += acc
    for _ in range(state.n):
        prop, acc = propose_partition_move(state, r_part,
                                           config.merge_split_rate, greedy)
        if prop:
            st = stats["partition"]
            st[0] += 1
            st[1] += acc
    if state.uncertain_slots:
        r_tog = rngs["toggle"]
        for _ in range(len(state.uncertain_slots)):
            prop, acc = propose_toggle(state, r_tog)
            if prop:
                st = stats["toggle"]
                st[0] += 1
                st[1] += acc
    return stats


def make_streams(seed):
    """Named Philox streams, one per move kind."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {
        name: np.random.Generator(np.random.Philox(child))
        for name, child in zip(STREAMS, children)
    }


def _effective_groups_from_labels(labels, n):
    sizes = {}
    for x in labels:
        sizes[x] = sizes.get(x, 0) + 1
    ent = 0.0
    for cnt in sizes.values():
        f = cnt / n
        ent -= f * math.log(f)
    return math.exp(ent)


def _collect(state, collectors, model):
    sigma = state.sigma(model)
    improved = sigma < collectors.best_sigma
    labels, block = state.block_matrix_dense()
    cells = state.closure_cells() if state.closure_enabled else {}
    collectors.n_samples += 1
    a = state.a
    slot_index = state.slot_index
    mask = bytearray((len(collectors.edges) + 7) // 8)
    for t, e in enumerate(collectors.edges):
        if a[slot_index[e]] > 0:
            collectors.seminal_counts[t] += 1
            mask[t >> 3] |= 1 << (t & 7)
    sample = PosteriorSample(
        tuple(labels), sigma, tuple(state.kdeg), block, cells, bytes(mask)
    )
    for t, p in enumerate(collectors.uncertain):
        if state.present[slot_index[p]]:
            collectors.on_counts[t] += 1
    collectors.sigma_trace.append(sigma)
    collectors.be_trace.append(_effective_groups_from_labels(labels, state.n))
    collectors.samples.append(sample)
    if improved:
        collectors.best_sigma = sigma
        collectors.best_sample = sample
    return improved


def prepare_tables_for(graph_edges, n):
    """Pre-build the q(m, n) rectangle sized for a chain over this graph."""
    m_cap = int(2 * graph_edges * 1.4) + 64
    tables.prepare_partition_table(m_cap, n)


def run_chain(g, config, model="sbmtc", collect_samples=True,
              checkpoint=None, resume=None):
    """Run one chain on an observed graph from the all-seminal cold start.

    ``model`` selects the SBM/TC decomposition ("sbmtc") or the pure-SBM
    latent-multigraph fit ("sbm", closure machinery disabled).  Returns
    ChainCollectors; deterministic given ``config.seed``.
    """
    if model not in ("sbmtc", "sbm"):
        raise ValueError("model must be 'sbm' or 'sbmtc'")
    sbm_only = model == "sbm"
    prepare_tables_for(g.num_edges, g.n)
    if resume is not None:
        state, collectors, rngs, start = load_checkpoint(resume, g)
        best_joint = -collectors.map_sigma
        best_doc = None
    else:
        state = DecompositionState(g, l_max=config.l_max, closure=not sbm_only)
        collectors = ChainCollectors(g.edges)
        rngs = make_streams(config.seed)
        start = 0
        best_joint = state.joint_log_probability()
        best_doc = state.to_jsonable()
        collectors.map_sigma = -best_joint
        collectors.map_labels = list(state.labels)
    best_retained_doc = None
    ln_t0 = math.log(config.anneal_t0)
    for sweep in range(start, config.sweeps):
        if ln_t0 and sweep < config.burn_in:
            temp = math.exp(ln_t0 * (1.0 - sweep / config.burn_in))
        else:
            temp = 1.0
        mcmc_sweep(state, config, rngs, collectors.acceptance,
                   sbm_only=sbm_only, temp=temp)
        j = state.joint_log_probability()
        if j > best_joint:
            best_joint = j
            best_doc = state.to_jsonable()
            collectors.map_sigma = -j
            collectors.map_labels = list(state.labels)
        if sweep >= config.burn_in and (sweep - config.burn_in + 1) % config.thin == 0:
            if _collect(state, collectors, model):
                best_retained_doc = state.to_jsonable()
            if not collect_samples:
                collectors.samples.clear()
    if config.polish > 0:
        # polish = simulated annealing (T: 1 -> 0.1 over `polish` sweeps)
        # plus strict descent, from the final state and the best retained
        # sample; the best-visited state gets a descent pass only.  The
        # deepest local optimum becomes the MAP estimate.
        anneal_starts = [state]
        if best_retained_doc is not None:
            anneal_starts.append(DecompositionState.restore(best_retained_doc, g))
        greedy_starts = []
        if best_doc is not None:
            greedy_starts.append(DecompositionState.restore(best_doc, g))
        pstats = {k: [0, 0] for k in ("owner", "mult", "partition", "toggle")}
        ln_lo = math.log(0.1)
        for idx, pstate in enumerate(anneal_starts + greedy_starts):
            if idx < len(anneal_starts):
                for step in range(config.polish):
                    temp = math.exp(ln_lo * step / config.polish)
                    mcmc_sweep(pstate, config, rngs, pstats,
                               sbm_only=sbm_only, temp=temp)
            prev = pstate.joint_log_probability()
            for _ in range(60):
                mcmc_sweep(pstate, config, rngs, pstats, sbm_only=sbm_only,
                           greedy=True)
                cur = pstate.joint_log_probability()
                if cur <= prev + 1e-12:
                    prev = cur
                    break
                prev = cur
            if prev > best_joint:
                best_joint = prev
                collectors.map_sigma = -prev
                collectors.map_labels = list(pstate.labels)
    if checkpoint is not None:
        save_checkpoint(checkpoint, state, collectors, rngs, config.sweeps,
                        config, model)
    return collectors


# ---------------------------------------------------------------------------
# checkpointing


def _rng_state_jsonable(gen):
    st = gen.bit_generator.state
    return {
        "state": {
            "counter": st["state"]["counter"].tolist(),
            "key": st["state"]["key"].tolist(),
        },
        "buffer": st["buffer"].tolist(),
        "buffer_pos": st["buffer_pos"],
        "has_uint32": st["has_uint32"],
        "uinteger": st["uinteger"],
    }


def _rng_from_jsonable(doc):
    gen = np.random.Generator(np.random.Philox())
    st = gen.bit_generator.state
    st["state"]["counter"] = np.array(doc["state"]["counter"], dtype=np.uint64)
    st["state"]["key"] = np.array(doc["state"]["key"], dtype=np.uint64)
    st["buffer"] = np.array(doc["buffer"], dtype=np.uint64)
    st["buffer_pos"] = doc["buffer_pos"]
    st["has_uint32"] = doc["has_uint32"]
    st["uinteger"] = doc["uinteger"]
    gen.bit_generator.state = st
    return gen


def save_checkpoint(path, state, collectors, rngs, sweep, config, model):
    doc = {
        "schema": "checkpoint/v1",
        "model": model,
        "sweep": sweep,
        "config": {
            "sweeps": config.sweeps, "burn_in": config.burn_in,
            "thin": config.thin, "l_max": config.l_max, "seed": config.seed,
            "move_mix": list(config.move_mix),
            "merge_split_rate": config.merge_split_rate,
        },
        "state": state.to_jsonable(),
        "collectors": collectors.to_jsonable(),
        "rng": {name: _rng_state_jsonable(rngs[name]) for name in STREAMS},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path, g):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != "checkpoint/v1":
        raise ValueError("not a checkpoint file")
    state = DecompositionState.restore(doc["state"], g)
    collectors = ChainCollectors.from_jsonable(doc["collectors"])
    rngs = {name: _rng_from_jsonable(doc["rng"][name]) for name in STREAMS}
    return state, collectors, rngs, doc["sweep"]
