"""The MCMC state: seminal multigraph, ego-graph closure layers, partition.

``DecompositionState`` holds the latent decomposition of one observed graph
and every incremental cache the sampler needs:

* per edge slot: seminal multiplicity a, layer owners {(u, l)}, owner counts
  per generation, and the creation generation c (the earliest generation with
  any owner; BIG when uncovered or, in reconstruction mode, absent);
* per (node, generation): the open-triad count M_u^(l) and the owned-edge
  count E_u^(l), plus the per-generation sums entering the closure marginal;
* the DC-SBM bookkeeping (group sizes, degree histograms, block edge counts,
  multigraph degrees) and a running ln P(A'|b) accumulator.

An open triad (i, u, j) is admissible at exactly one generation,
l* = max(c(u,i), c(u,j)) + 1, provided the pair (i, j) is still absent at
l*-1; all cache maintenance exploits this.

Mutations run inside begin/commit/rollback transactions: scalar accumulators
are snapshot at ``begin`` and every structural write is journaled, so a
rejected proposal restores the state bit-for-bit.  Invalid configurations
(uncovered edges, closure edges whose triad is not open) are representable
and carry a -inf joint probability rather than raising, so the sampler can
reject them uniformly.

A state is single-writer; it may move between threads but must not be
mutated concurrently.
"""

import math

from . import tables
from .graphs import SimpleGraph
from .tables import log_binom, log_double_factorial_even, log_restricted_partitions

BIG = 1 << 30

NEG_INF = float("-inf")

_LOG = math.log


def _closure_term(lf, m, e):
    """Per-(u, l) log factor: -ln C(M, E) - ln M for E > 0, else 0.

    Returns 0 for the impossible E > M configurations; those states are
    flagged invalid separately and never contribute a finite joint.
    """
    if e <= 0 or m < e:
        return 0.0
    if m >= len(lf):
        lf = tables.ensure_log_factorials(m + 256)
    return -(lf[m] - lf[e] - lf[m - e]) - _LOG(m)


class DecompositionState:
    """Latent decomposition (A', {g^(l)}, b) of an observed simple graph."""

    def __init__(self, g, l_max=5, closure=True, extra_pairs=(), present=None,
                 measurement=None):
        """Build the all-seminal cold-start state: A' = G with multiplicity 1,
        empty layers, all nodes in one group.

        ``extra_pairs`` adds toggleable candidate pairs for reconstruction
        mode; ``present`` gives their initial on/off flags (default off).
        ``measurement`` is an optional MeasurementData whose finite counts
        feed the measurement likelihood.
        """
        if not isinstance(g, SimpleGraph):
            raise TypeError("DecompositionState needs a SimpleGraph")
        self.g = g
        self.n = g.n
        self.L = int(l_max)
        if self.L < 1:
            raise ValueError("need at least one closure generation")
        self.closure_enabled = bool(closure)

        self.slots = list(g.edges)
        self.certain = [True] * len(self.slots)
        pres = [True] * len(self.slots)
        for idx, pair in enumerate(extra_pairs):
            i, j = pair
            if i > j:
                i, j = j, i
            if (i, j) in g.edge_index:
                raise ValueError("extra pair %r already an edge" % ((i, j),))
            self.slots.append((i, j))
            self.certain.append(False)
            pres.append(bool(present[idx]) if present is not None else False)
        self.slot_index = {p: t for t, p in enumerate(self.slots)}
        self.present = pres
        ns = len(self.slots)

        self.adj = [dict() for _ in range(self.n)]
        self.present_slots = [t for t in range(ns) if pres[t]]
        self.present_pos = {t: x for x, t in enumerate(self.present_slots)}
        self.uncertain_slots = [t for t in range(ns) if not self.certain[t]]
        self.a = [0] * ns
        self.owners = [dict() for _ in range(ns)]
        self.gen_cnt = [0] * (ns * (self.L + 1))
        self.c = [BIG] * ns
        self.total_own = [0] * ns
        self.uncovered = 0

        lw = self.L + 1
        self.M = [0] * (self.n * lw)
        self.Eg = [0] * (self.n * lw)
        self.Nm = [0] * lw
        self.Ng = [0] * lw
        self.closure_sum = [0.0] * lw
        self.closure_total = 0.0
        self.global_l = [0.0] * lw
        self.global_total = 0.0
        self.bad = 0
        self.bad_per_l = [0] * lw

        # partition bookkeeping (all nodes in gid 0)
        self.labels = [0] * self.n
        self.sizes = {0: self.n}
        self.members = {0: set(range(self.n))}
        self.eta = {0: {}}
        self.ers = {}
        self.er = {0: 0}
        self.kdeg = [0] * self.n
        self.E_mult = 0
        self.B = 1
        self.gid_list = [0]
        self.gid_pos = {0: 0}
        self.next_gid = 1
        self.sumlf_n = tables.log_factorial(self.n)
        self.sbm_log = 0.0

        # measurement model totals over finite-n pairs
        self.measurement = measurement
        self.meas_E = 0
        self.meas_T = 0

        self._txn = None
        self._txn_store = None

        tables.ensure_log_factorials(max(4 * ns + 16, 2 * self.n + 16, 1024))

        # initial placement: every present slot seminal with multiplicity 1
        self._init_caches(pres)

    # ------------------------------------------------------------------
    # construction helpers

    def _init_caches(self, pres):
        eta0 = self.eta[0]
        for t, (i, j) in enumerate(self.slots):
            if pres[t]:
                self.adj[i][j] = t
                self.adj[j][i] = t
                self.a[t] = 1
                self.gen_cnt[t * (self.L + 1)] = 1
                self.c[t] = 0
                self.total_own[t] = 1
                self.kdeg[i] += 1
                self.kdeg[j] += 1
                self.E_mult += 1
                if self.measurement is not None:
                    cnt = self.measurement.counts.get((i, j))
                    if cnt is not None:
                        self.meas_E += cnt[0]
                        self.meas_T += cnt[1]
        for i in range(self.n):
            k = self.kdeg[i]
            eta0[k] = eta0.get(k, 0) + 1
        self.er[0] = 2 * self.E_mult
        if self.E_mult:
            self.ers[(0, 0)] = 2 * self.E_mult
        self.sbm_log = self._recompute_sbm_log()
        if self.closure_enabled:
            self._recompute_closure()

    def _recompute_sbm_log(self):
        lf = tables.ensure_log_factorials(max(2 * self.E_mult + 16, 1024))
        val = 0.0
        for (r, s), cnt in self.ers.items():
            if r == s:
                val += log_double_factorial_even(cnt)
            else:
                val += lf[cnt]
        for t, w in enumerate(self.a):
            if self.present[t]:
                val -= lf[w]
        for i in range(self.n):
            val += lf[self.kdeg[i]]
        for gid in self.gid_list:
            for cnt in self.eta[gid].values():
                val += lf[cnt]
            val -= lf[self.sizes[gid]]
            val -= lf[self.er[gid]]
            val -= log_restricted_partitions(self.er[gid], self.sizes[gid])
        val -= log_binom(self.B * (self.B + 1) // 2 + self.E_mult - 1, self.E_mult)
        return val

    def _recompute_closure(self):
        """Rebuild all closure caches from the ownership structure."""
        lw = self.L + 1
        lf = tables._LF
        self.M = [0] * (self.n * lw)
        self.Eg = [0] * (self.n * lw)
        self.Nm = [0] * lw
        self.Ng = [0] * lw
        self.closure_sum = [0.0] * lw
        self.bad = 0
        self.bad_per_l = [0] * lw
        c = self.c
        adj = self.adj
        L = self.L
        for u in range(self.n):
            nbrs = sorted(adj[u].items())
            deg = len(nbrs)
            base = u * lw
            for x in range(deg):
                i, si = nbrs[x]
                ci = c[si]
                if ci >= BIG:
                    continue
                for y in range(x + 1, deg):
                    j, sj = nbrs[y]
                    cj = c[sj]
                    if cj >= BIG:
                        continue
                    ls = (ci if ci > cj else cj) + 1
                    if ls > L:
                        continue
                    ps = adj[i].get(j)
                    cp = c[ps] if ps is not None else BIG
                    if cp >= ls:
                        self.M[base + ls] += 1
        for t, own in enumerate(self.owners):
            for (u, l), _ in list(own.items()):
                valid = self._owner_valid(t, u, l)
                own[(u, l)] = valid
                if not valid:
                    self.bad += 1
                    self.bad_per_l[l] += 1
                self.Eg[u * lw + l] += 1
        for u in range(self.n):
            base = u * lw
            for l in range(1, lw):
                m = self.M[base + l]
                e = self.Eg[base + l]
                if m > 0:
                    self.Nm[l] += 1
                if e > 0:
                    self.Ng[l] += 1
                    self.closure_sum[l] += _closure_term(lf, m, e)
        self.closure_total = 0.0
        self.global_total = 0.0
        self.global_l = [0.0] * lw
        for l in range(1, lw):
            self.closure_total += self.closure_sum[l]
            gl = -log_binom(self.Nm[l], self.Ng[l]) - _LOG(1 + self.Nm[l])
            self.global_l[l] = gl
            self.global_total += gl

    # ------------------------------------------------------------------
    # probability readouts

    def _owner_valid(self, t, u, l):
        i, j = self.slots[t]
        si = self.adj[u].get(i)
        sj = self.adj[u].get(j)
        if si is None or sj is None:
            return False
        ci = self.c[si]
        cj = self.c[sj]
        if ci >= BIG or cj >= BIG:
            return False
        ls = (ci if ci > cj else cj) + 1
        return ls == l and self.c[t] == l

    def closure_layer_log(self, l):
        """ln P(g^(l) | A^(l-1), g^(l-1)); -inf when layer l holds an edge
        whose triad is not open."""
        if self.bad_per_l[l]:
            return NEG_INF
        nm = self.Nm[l]
        ng = self.Ng[l]
        return self.closure_sum[l] - log_binom(nm, ng) - _LOG(1 + nm)

    def closure_log(self):
        if self.bad:
            return NEG_INF
        return self.closure_total + self.global_total

    def partition_log_prior(self):
        n = self.n
        return (
            self.sumlf_n
            - tables.log_factorial(n)
            - log_binom(n - 1, self.B - 1)
            - _LOG(n)
        )

    def joint_log_probability(self):
        """ln P(G, {g^(l)}, A', b): -inf when coverage or triad validity is
        violated, else the SBM marginal + closure layers + partition prior."""
        if self.uncovered or self.bad:
            return NEG_INF
        val = self.sbm_log + self.partition_log_prior()
        if self.closure_enabled:
            val += self.closure_total + self.global_total
        return val

    def measurement_log(self):
        """ln P(x | G, n) over finite-count pairs (0 when none exist)."""
        if self.measurement is None:
            return 0.0
        mm = self.measurement.total_n
        xx = self.measurement.total_x
        ee = self.meas_E
        tt = self.meas_T
        val = -log_binom(ee, tt) - _LOG(ee + 1)
        val += -log_binom(mm - ee, xx - tt) - _LOG(mm - ee + 1)
        return val

    def target_log(self):
        """The sampler target: joint + ln B! (set-partition weight) + the
        measurement likelihood in reconstruction mode."""
        v = self.joint_log_probability()
        if v == NEG_INF:
            return v
        v += tables.log_factorial(self.B)
        if self.measurement is not None:
            v += self.measurement_log()
        return v

    def is_valid(self):
        return not (self.uncovered or self.bad)

    def sigma(self, model="sbmtc"):
        """Description length of the current state in nats."""
        if self.uncovered or self.bad:
            return float("inf")
        val = self.sbm_log + self.partition_log_prior()
        if model == "sbmtc":
            if self.closure_enabled:
                val += self.closure_total + self.global_total
        elif model != "sbm":
            raise ValueError("model must be 'sbm' or 'sbmtc'")
        return -val

    # ------------------------------------------------------------------
    # transactions

    _JOURNALS = ("jM", "jE", "jc", "ja", "jtot", "jgen", "jk", "jlab",
                 "jsz", "jeta", "jers", "jer")

    def begin(self):
        if self._txn is not None:
            raise RuntimeError("nested transaction")
        t = self._txn_store
        if t is None:
            t = {name: {} for name in self._JOURNALS}
            t["ops"] = []
            self._txn_store = t
        else:
            for name in self._JOURNALS:
                t[name].clear()
            t["ops"].clear()
        t["scalars"] = (
            self.sbm_log, self.uncovered, self.bad, self.E_mult, self.B,
            self.sumlf_n, self.meas_E, self.meas_T,
        )
        t["Nm"] = self.Nm[:]
        t["Ng"] = self.Ng[:]
        t["csum"] = self.closure_sum[:]
        t["gl"] = self.global_l[:]
        t["tot2"] = (self.closure_total, self.global_total)
        t["badl"] = self.bad_per_l[:]
        self._txn = t

    def rollback(self):
        t = self._txn
        if t is None:
            raise RuntimeError("no transaction")
        (self.sbm_log, self.uncovered, self.bad, self.E_mult, self.B,
         self.sumlf_n, self.meas_E, self.meas_T) = t["scalars"]
        self.Nm = t["Nm"]
        self.Ng = t["Ng"]
        self.closure_sum = t["csum"]
        self.global_l = t["gl"]
        self.closure_total, self.global_total = t["tot2"]
        self.bad_per_l = t["badl"]
        M = self.M
        for k, v in t["jM"].items():
            M[k] = v
        Eg = self.Eg
        for k, v in t["jE"].items():
            Eg[k] = v
        for k, v in t["jc"].items():
            self.c[k] = v
        for k, v in t["ja"].items():
            self.a[k] = v
        for k, v in t["jtot"].items():
            self.total_own[k] = v
        for k, v in t["jgen"].items():
            self.gen_cnt[k] = v
        for k, v in t["jk"].items():
            self.kdeg[k] = v
        for k, v in t["jlab"].items():
            self.labels[k] = v
        for op in reversed(t["ops"]):
            kind = op[0]
            if kind == "oa":
                del self.owners[op[1]][op[2]]
            elif kind == "or":
                self.owners[op[1]][op[2]] = op[3]
            elif kind == "ov":
                self.owners[op[1]][op[2]] = op[3]
            elif kind == "adj+":
                _, i, j, _t = op
                del self.adj[i][j]
                del self.adj[j][i]
            elif kind == "adj-":
                _, i, j, _t = op
                self.adj[i][j] = _t
                self.adj[j][i] = _t
            elif kind == "pres":
                self.present[op[1]] = op[2]
            elif kind == "plist+":
                tt = op[1]
                pos = self.present_pos.pop(tt)
                last = self.present_slots.pop()
                if last != tt:
                    self.present_slots[pos] = last
                    self.present_pos[last] = pos
            elif kind == "plist-":
                tt, pos = op[1], op[2]
                if pos == len(self.present_slots):
                    self.present_slots.append(tt)
                    self.present_pos[tt] = pos
                else:
                    x = self.present_slots[pos]
                    self.present_slots[pos] = tt
                    self.present_pos[tt] = pos
                    self.present_slots.append(x)
                    self.present_pos[x] = len(self.present_slots) - 1
            elif kind == "mem":
                _, old_gid, new_gid, node = op
                self.members[new_gid].discard(node)
                self.members.setdefault(old_gid, set()).add(node)
            elif kind == "mem_new":
                del self.members[op[1]]
            elif kind == "gid+":
                g = op[1]
                pos = self.gid_pos.pop(g)
                last = self.gid_list.pop()
                if last != g:
                    self.gid_list[pos] = last
                    self.gid_pos[last] = pos
            elif kind == "gid-":
                g, pos = op[1], op[2]
                if pos == len(self.gid_list):
                    self.gid_list.append(g)
                    self.gid_pos[g] = pos
                else:
                    x = self.gid_list[pos]
                    self.gid_list[pos] = g
                    self.gid_pos[g] = pos
                    self.gid_list.append(x)
                    self.gid_pos[x] = len(self.gid_list) - 1
            elif kind == "eta_new":
                del self.eta[op[1]]
            elif kind == "eta_del":
                self.eta[op[1]] = {}
            elif kind == "mem_del":
                self.members[op[1]] = set()
            elif kind == "ngid":
                self.next_gid = op[1]
        # nested-structure journals last: group containers now exist again
        for k, v in t["jsz"].items():
            if v is None:
                self.sizes.pop(k, None)
            else:
                self.sizes[k] = v
        for (gid, k), v in t["jeta"].items():
            h = self.eta.get(gid)
            if h is None:
                continue
            if v:
                h[k] = v
            else:
                h.pop(k, None)
        for k, v in t["jers"].items():
            if v:
                self.ers[k] = v
            else:
                self.ers.pop(k, None)
        for k, v in t["jer"].items():
            if v is None:
                self.er.pop(k, None)
            else:
                self.er[k] = v
        self._txn = None

    def commit(self):
        if self._txn is None:
            raise RuntimeError("no transaction")
        self._txn = None

    # ------------------------------------------------------------------
    # closure-cache primitives

    def _bump_M(self, u, l, d):
        t = self._txn
        key = u * (self.L + 1) + l
        M = self.M
        old = M[key]
        jm = t["jM"]
        if key not in jm:
            jm[key] = old
        new = old + d
        M[key] = new
        if old == 0 or new == 0:
            self.Nm[l] += 1 if old == 0 else -1
            gl = -log_binom(self.Nm[l], self.Ng[l]) - _LOG(1 + self.Nm[l])
            self.global_total += gl - self.global_l[l]
            self.global_l[l] = gl
        e = self.Eg[key]
        if e:
            lf = tables._LF
            dterm = _closure_term(lf, new, e) - _closure_term(lf, old, e)
            self.closure_sum[l] += dterm
            self.closure_total += dterm

    def _bump_E(self, u, l, d):
        t = self._txn
        key = u * (self.L + 1) + l
        Eg = self.Eg
        old = Eg[key]
        je = t["jE"]
        if key not in je:
            je[key] = old
        new = old + d
        Eg[key] = new
        if old == 0 or new == 0:
            self.Ng[l] += 1 if old == 0 else -1
            gl = -log_binom(self.Nm[l], self.Ng[l]) - _LOG(1 + self.Nm[l])
            self.global_total += gl - self.global_l[l]
            self.global_l[l] = gl
        m = self.M[key]
        lf = tables._LF
        dterm = _closure_term(lf, m, new) - _closure_term(lf, m, old)
        self.closure_sum[l] += dterm
        self.closure_total += dterm

    def _flip_owner(self, t_slot, key, new_v):
        own = self.owners[t_slot]
        old = own[key]
        if old == new_v:
            return
        self._txn["ops"].append(("ov", t_slot, key, old))
        own[key] = new_v
        l = key[1]
        if new_v:
            self.bad -= 1
            self.bad_per_l[l] -= 1
        else:
            self.bad += 1
            self.bad_per_l[l] += 1

    def _revalidate_slot_owners(self, t_slot):
        own = self.owners[t_slot]
        if own:
            for key in list(own):
                self._flip_owner(t_slot, key, self._owner_valid(t_slot, *key))

    def _c_change(self, t_slot, c0, c1):
        """Propagate a creation-generation change of one edge slot through the
        open-triad caches: the slot as closing pair (role 1) and as a support
        edge for its two endpoints (role 2)."""
        if c0 == c1 or not self.closure_enabled:
            return
        L = self.L
        c = self.c
        adj = self.adj
        i, j = self.slots[t_slot]
        self._revalidate_slot_owners(t_slot)
        # role 1: pair (i, j) flips openness at l* of each common neighbor
        ai, aj = adj[i], adj[j]
        if len(ai) > len(aj):
            ai, aj = aj, ai
        for u, s1 in ai.items():
            s2 = aj.get(u)
            if s2 is None:
                continue
            c1u = c[s1]
            c2u = c[s2]
            if c1u >= BIG or c2u >= BIG:
                continue
            ls = (c1u if c1u > c2u else c2u) + 1
            if ls > L:
                continue
            before = c0 >= ls
            after = c1 >= ls
            if before != after:
                self._bump_M(u, ls, 1 if after else -1)
        # role 2: the slot as support edge of ego i then ego j
        for ego, other in ((i, j), (j, i)):
            a_ego = adj[ego]
            a_other = adj[other]
            for w, sw in a_ego.items():
                if w == other:
                    continue
                csw = c[sw]
                ls0 = (c0 if c0 > csw else csw) + 1 if (c0 < BIG and csw < BIG) else 0
                ls1 = (c1 if c1 > csw else csw) + 1 if (c1 < BIG and csw < BIG) else 0
                if ls0 == ls1:
                    continue
                ps = a_other.get(w)
                cp = c[ps] if ps is not None else BIG
                if ls0 and ls0 <= L and cp >= ls0:
                    self._bump_M(ego, ls0, -1)
                if ls1 and ls1 <= L and cp >= ls1:
                    self._bump_M(ego, ls1, 1)
                if ps is not None:
                    pown = self.owners[ps]
                    if pown:
                        for key in list(pown):
                            if key[0] == ego:
                                self._flip_owner(ps, key, self._owner_valid(ps, *key))

    def _set_c(self, t_slot, new_c):
        old = self.c[t_slot]
        if old == new_c:
            return
        jc = self._txn["jc"]
        if t_slot not in jc:
            jc[t_slot] = old
        self.c[t_slot] = new_c
        self._c_change(t_slot, old, new_c)

    def _recomputed_c(self, t_slot):
        if not self.present[t_slot]:
            return BIG
        if self.a[t_slot] > 0:
            return 0
        base = t_slot * (self.L + 1)
        gc = self.gen_cnt
        for l in range(1, self.L + 1):
            if gc[base + l]:
                return l
        return BIG

    def _bump_total(self, t_slot, d):
        jt = self._txn["jtot"]
        if t_slot not in jt:
            jt[t_slot] = self.total_own[t_slot]
        old = self.total_own[t_slot]
        new = old + d
        self.total_own[t_slot] = new
        if self.present[t_slot]:
            if old == 0:
                self.uncovered -= 1
            elif new == 0:
                self.uncovered += 1

    # ------------------------------------------------------------------
    # SBM primitives

    def _bump_eta(self, gid, k, d):
        jeta = self._txn["jeta"]
        h = self.eta[gid]
        old = h.get(k, 0)
        key = (gid, k)
        if key not in jeta:
            jeta[key] = old
        new = old + d
        if new:
            h[k] = new
        else:
            del h[k]
        lf = tables._LF
        self.sbm_log += lf[new] - lf[old]

    def _bump_ers(self, r, s, d):
        key = (r, s) if r <= s else (s, r)
        jers = self._txn["jers"]
        old = self.ers.get(key, 0)
        if key not in jers:
            jers[key] = old
        new = old + d
        if new:
            self.ers[key] = new
        else:
            self.ers.pop(key, None)
        if r == s:
            self.sbm_log += (
                log_double_factorial_even(new) - log_double_factorial_even(old)
            )
        else:
            lf = tables.ensure_log_factorials(new)
            self.sbm_log += lf[new] - lf[old]

    def _bump_er(self, gid, d):
        jer = self._txn["jer"]
        if gid not in jer:
            jer[gid] = self.er[gid]
        old = self.er[gid]
        new = old + d
        self.er[gid] = new
        n = self.sizes[gid]
        lf = tables.ensure_log_factorials(new)
        self.sbm_log += lf[old] - lf[new]
        self.sbm_log += log_restricted_partitions(old, n) - log_restricted_partitions(new, n)

    def _se_term(self, b, e):
        return -log_binom(b * (b + 1) // 2 + e - 1, e)

    def _sbm_edge_delta(self, i, j, d):
        """Multiplicity of pair (i, j) changes by d: degrees, histograms,
        block counts, total edges."""
        lab = self.labels
        r, s = lab[i], lab[j]
        self._bump_ers(r, s, 2 * d if r == s else d)
        if r == s:
            self._bump_er(r, 2 * d)
        else:
            self._bump_er(r, d)
            self._bump_er(s, d)
        jk = self._txn["jk"]
        lf = tables.ensure_log_factorials(max(self.kdeg[i], self.kdeg[j]) + abs(d) + 1)
        for x in (i, j):
            k_old = self.kdeg[x]
            if x not in jk:
                jk[x] = k_old
            self._bump_eta(lab[x], k_old, -1)
            self._bump_eta(lab[x], k_old + d, 1)
            self.kdeg[x] = k_old + d
            self.sbm_log += lf[k_old + d] - lf[k_old]
        self.sbm_log += self._se_term(self.B, self.E_mult + d) - self._se_term(
            self.B, self.E_mult
        )
        self.E_mult += d

    # ------------------------------------------------------------------
    # public mutations (inside a transaction)

    def set_seminal(self, t_slot, new):
        """Set the seminal multiplicity A'_ij of a present slot."""
        old = self.a[t_slot]
        if new == old:
            return
        if new < 0:
            raise ValueError("negative multiplicity")
        ja = self._txn["ja"]
        if t_slot not in ja:
            ja[t_slot] = old
        i, j = self.slots[t_slot]
        self._sbm_edge_delta(i, j, new - old)
        lf = tables._LF
        self.sbm_log += lf[old] - lf[new]
        self.a[t_slot] = new
        base = t_slot * (self.L + 1)
        jg = self._txn["jgen"]
        if base not in jg:
            jg[base] = self.gen_cnt[base]
        self.gen_cnt[base] = new
        self._bump_total(t_slot, new - old)
        self._set_c(t_slot, self._recomputed_c(t_slot))

    def add_owner(self, t_slot, u, l):
        """Add ego-graph ownership g^(l)_ij(u) = 1 on a present slot."""
        key = (u, l)
        own = self.owners[t_slot]
        if key in own:
            raise ValueError("owner already present")
        base = t_slot * (self.L + 1) + l
        jg = self._txn["jgen"]
        if base not in jg:
            jg[base] = self.gen_cnt[base]
        self.gen_cnt[base] += 1
        self._bump_total(t_slot, 1)
        self._set_c(t_slot, self._recomputed_c(t_slot))
        valid = self._owner_valid(t_slot, u, l)
        own[key] = valid
        self._txn["ops"].append(("oa", t_slot, key))
        if not valid:
            self.bad += 1
            self.bad_per_l[l] += 1
        self._bump_E(u, l, 1)

    def remove_owner(self, t_slot, u, l):
        key = (u, l)
        own = self.owners[t_slot]
        old_v = own.pop(key)
        self._txn["ops"].append(("or", t_slot, key, old_v))
        if not old_v:
            self.bad -= 1
            self.bad_per_l[l] -= 1
        self._bump_E(u, l, -1)
        base = t_slot * (self.L + 1) + l
        jg = self._txn["jgen"]
        if base not in jg:
            jg[base] = self.gen_cnt[base]
        self.gen_cnt[base] -= 1
        self._bump_total(t_slot, -1)
        self._set_c(t_slot, self._recomputed_c(t_slot))

    def toggle_pair(self, t_slot, on):
        """Turn an uncertain slot into an edge (seminal multiplicity 1) or
        remove it (requires sole seminal ownership)."""
        if self.certain[t_slot]:
            raise ValueError("pair is certain")
        if self.present[t_slot] == on:
            return
        i, j = self.slots[t_slot]
        ops = self._txn["ops"]
        if on:
            ops.append(("pres", t_slot, False))
            self.present[t_slot] = True
            self.present_pos[t_slot] = len(self.present_slots)
            self.present_slots.append(t_slot)
            ops.append(("plist+", t_slot))
            self.adj[i][j] = t_slot
            self.adj[j][i] = t_slot
            ops.append(("adj+", i, j, t_slot))
            if self.total_own[t_slot] == 0:
                self.uncovered += 1
            self.set_seminal(t_slot, 1)
            if self.measurement is not None:
                cnt = self.measurement.counts.get((i, j))
                if cnt is not None:
                    self.meas_E += cnt[0]
                    self.meas_T += cnt[1]
        else:
            if self.total_own[t_slot] != 1 or self.a[t_slot] != 1 or self.owners[t_slot]:
                raise ValueError("pair not solely seminal-owned")
            self.set_seminal(t_slot, 0)
            del self.adj[i][j]
            del self.adj[j][i]
            ops.append(("adj-", i, j, t_slot))
            self.uncovered -= 1  # slot is absent, not uncovered
            ops.append(("pres", t_slot, True))
            self.present[t_slot] = False
            pos = self.present_pos.pop(t_slot)
            last = self.present_slots.pop()
            if last != t_slot:
                self.present_slots[pos] = last
                self.present_pos[last] = pos
            ops.append(("plist-", t_slot, pos))
            if self.measurement is not None:
                cnt = self.measurement.counts.get((i, j))
                if cnt is not None:
                    self.meas_E -= cnt[0]
                    self.meas_T -= cnt[1]

    def _group_stat_update(self, gid, d_er, d_n):
        """Joint update of a group's stub total and size under the
        -ln e_r! - ln q(e_r, n_r) - ln n_r! terms."""
        t = self._txn
        old_er = self.er[gid]
        old_n = self.sizes[gid]
        new_er = old_er + d_er
        new_n = old_n + d_n
        jer = t["jer"]
        if gid not in jer:
            jer[gid] = old_er
        jsz = t["jsz"]
        if gid not in jsz:
            jsz[gid] = old_n
        lf = tables.ensure_log_factorials(max(new_er, old_er))
        self.sbm_log += (
            lf[old_er] + lf[old_n]
            + log_restricted_partitions(old_er, old_n)
            - lf[new_er] - lf[new_n]
            - log_restricted_partitions(new_er, new_n)
        )
        self.sumlf_n += lf[new_n] - lf[old_n]
        self.er[gid] = new_er
        self.sizes[gid] = new_n

    def _create_group(self):
        """Materialize a fresh empty group and return its gid."""
        t = self._txn
        gid = self.next_gid
        t["ops"].append(("ngid", gid))
        self.next_gid = gid + 1
        t["jsz"].setdefault(gid, None)
        self.sizes[gid] = 0
        self.eta[gid] = {}
        t["ops"].append(("eta_new", gid))
        t["jer"].setdefault(gid, None)
        self.er[gid] = 0
        self.members[gid] = set()
        t["ops"].append(("mem_new", gid))
        self.gid_pos[gid] = len(self.gid_list)
        self.gid_list.append(gid)
        t["ops"].append(("gid+", gid))
        self.sbm_log += self._se_term(self.B + 1, self.E_mult) - self._se_term(
            self.B, self.E_mult
        )
        self.B += 1
        return gid

    def _drop_group(self, gid):
        t = self._txn
        pos = self.gid_pos.pop(gid)
        last = self.gid_list.pop()
        if last != gid:
            self.gid_list[pos] = last
            self.gid_pos[last] = pos
        t["ops"].append(("gid-", gid, pos))
        del self.sizes[gid]
        del self.er[gid]
        # empty containers of vanished gids would otherwise pile up forever
        del self.eta[gid]
        t["ops"].append(("eta_del", gid))
        del self.members[gid]
        t["ops"].append(("mem_del", gid))
        self.sbm_log += self._se_term(self.B - 1, self.E_mult) - self._se_term(
            self.B, self.E_mult
        )
        self.B -= 1

    def move_node(self, node, gid):
        """Relabel ``node`` into group ``gid`` (``None`` = a fresh group)."""
        t = self._txn
        r = self.labels[node]
        if gid is None:
            gid = self._create_group()
        elif gid not in self.sizes:
            raise ValueError("unknown group id %r" % (gid,))
        if gid == r:
            return
        s = gid
        labels = self.labels
        a = self.a
        # move every multigraph stub of node from row r to row s
        for w, t_slot in self.adj[node].items():
            mult = a[t_slot]
            if mult == 0:
                continue
            tl = labels[w]
            self._bump_ers(r, tl, -(2 * mult if tl == r else mult))
            self._bump_ers(s, tl, (2 * mult if tl == s else mult))
        k_node = self.kdeg[node]
        self._bump_eta(r, k_node, -1)
        self._bump_eta(s, k_node, 1)
        self._group_stat_update(r, -k_node, -1)
        self._group_stat_update(s, k_node, 1)
        jlab = t["jlab"]
        if node not in jlab:
            jlab[node] = r
        labels[node] = s
        self.members[r].discard(node)
        self.members[s].add(node)
        t["ops"].append(("mem", r, s, node))
        if self.sizes[r] == 0:
            self._drop_group(r)

    # ------------------------------------------------------------------
    # read-only proposal deltas (no mutation, no journaling)

    def single_move_delta(self, node, gid):
        """(d_joint, d_target, B_after) for relabeling ``node`` into ``gid``
        (None = fresh group), computed without touching the state.

        Exactly matches the transactional move_node delta; used so rejected
        partition proposals never pay mutation + rollback costs.
        """
        r = self.labels[node]
        fresh = gid is None
        if not fresh and gid == r:
            return 0.0, 0.0, self.B
        n_r = self.sizes[r]
        if fresh and n_r == 1:
            return 0.0, 0.0, self.B  # structure identity
        lf = tables._LF
        labels = self.labels
        a = self.a
        w = {}
        for nb, t_slot in self.adj[node].items():
            mult = a[t_slot]
            if mult:
                tl = labels[nb]
                w[tl] = w.get(tl, 0) + mult
        cells = {}
        s_gid = gid if not fresh else -1
        for t, wt in w.items():
            if t == r:
                cells[(r, r)] = cells.get((r, r), 0) - 2 * wt
                key = (min(s_gid, r), max(s_gid, r))
                cells[key] = cells.get(key, 0) + wt
            elif t == s_gid:
                key = (min(r, t), max(r, t))
                cells[key] = cells.get(key, 0) - wt
                cells[(t, t)] = cells.get((t, t), 0) + 2 * wt
            else:
                key = (min(r, t), max(r, t))
                cells[key] = cells.get(key, 0) - wt
                key = (min(s_gid, t), max(s_gid, t))
                cells[key] = cells.get(key, 0) + wt
        d = 0.0
        ers = self.ers
        for (p_, q_), dc in cells.items():
            if dc == 0:
                continue
            old = ers.get((p_, q_), 0)
            new = old + dc
            if p_ == q_:
                d += log_double_factorial_even(new) - log_double_factorial_even(old)
            else:
                if new >= len(lf):
                    lf = tables.ensure_log_factorials(new + 64)
                d += lf[new] - lf[old]
        k = self.kdeg[node]
        h_r = self.eta[r].get(k, 0)
        d += lf[h_r - 1] - lf[h_r]
        if fresh:
            h_s = 0
        else:
            h_s = self.eta[gid].get(k, 0)
        d += lf[h_s + 1] - lf[h_s]
        er_r = self.er[r]
        lq = log_restricted_partitions
        d += (lf[er_r] + lf[n_r] + lq(er_r, n_r)
              - lf[er_r - k] - lf[n_r - 1] - lq(er_r - k, n_r - 1))
        if fresh:
            er_s, n_s = 0, 0
        else:
            er_s, n_s = self.er[gid], self.sizes[gid]
        if er_s + k >= len(lf):
            lf = tables.ensure_log_factorials(er_s + k + 64)
        d += (lf[er_s] + lf[n_s] + lq(er_s, n_s)
              - lf[er_s + k] - lf[n_s + 1] - lq(er_s + k, n_s + 1))
        d_prior = (lf[n_r - 1] - lf[n_r] + lf[n_s + 1] - lf[n_s])
        b_after = self.B + (1 if fresh else 0) - (1 if n_r == 1 else 0)
        if b_after != self.B:
            e_tot = self.E_mult
            d += self._se_term(b_after, e_tot) - self._se_term(self.B, e_tot)
            d_prior += (
                log_binom(self.n - 1, self.B - 1)
                - log_binom(self.n - 1, b_after - 1)
            )
        d_joint = d + d_prior
        d_target = d_joint
        if b_after != self.B:
            d_target += lf[b_after] - lf[self.B]
        return d_joint, d_target, b_after

    def seminal_mult_delta(self, t_slot, new):
        """Joint delta for an interior multiplicity change (old >= 1 and
        new >= 1: the binarization, coverage, and closure caches are all
        unaffected), computed without mutation."""
        old = self.a[t_slot]
        if old < 1 or new < 1:
            raise ValueError("interior multiplicities only")
        if new == old:
            return 0.0
        dlt = new - old
        i, j = self.slots[t_slot]
        lf = tables.ensure_log_factorials(
            2 * max(new, old) + max(self.kdeg[i], self.kdeg[j])
            + self.er[self.labels[i]] + 64
        )
        r, s_gid = self.labels[i], self.labels[j]
        d = lf[old] - lf[new]  # edge-factor denominator
        if r == s_gid:
            cell = self.ers.get((r, r), 0)
            d += (log_double_factorial_even(cell + 2 * dlt)
                  - log_double_factorial_even(cell))
            er = self.er[r]
            n_r = self.sizes[r]
            lq = log_restricted_partitions
            d += (lf[er] + lq(er, n_r)
                  - lf[er + 2 * dlt] - lq(er + 2 * dlt, n_r))
        else:
            key = (min(r, s_gid), max(r, s_gid))
            cell = self.ers.get(key, 0)
            d += lf[cell + dlt] - lf[cell]
            lq = log_restricted_partitions
            for gid in (r, s_gid):
                er = self.er[gid]
                n_g = self.sizes[gid]
                d += lf[er] + lq(er, n_g) - lf[er + dlt] - lq(er + dlt, n_g)
        bins = {}
        for x in (i, j):
            gx = self.labels[x]
            kx = self.kdeg[x]
            bins[(gx, kx)] = bins.get((gx, kx), 0) - 1
            bins[(gx, kx + dlt)] = bins.get((gx, kx + dlt), 0) + 1
            d += lf[kx + dlt] - lf[kx]
        for (gx, kx), bump in bins.items():
            if bump:
                h = self.eta[gx].get(kx, 0)
                d += lf[h + bump] - lf[h]
        d += self._se_term(self.B, self.E_mult + dlt) - self._se_term(
            self.B, self.E_mult
        )
        return d

    # ------------------------------------------------------------------
    # proposal support

    def relevant_egos(self, t_slot, l):
        """Common neighbors of the slot's endpoints whose support edges both
        exist at generation l-1 with max creation generation exactly l-1.

        Never depends on the slot's own placement, so owner-swap forward and
        reverse selection probabilities cancel.
        """
        i, j = self.slots[t_slot]
        c = self.c
        ai, aj = self.adj[i], self.adj[j]
        if len(ai) > len(aj):
            ai, aj = aj, ai
        out = []
        lm1 = l - 1
        for u, s1 in ai.items():
            s2 = aj.get(u)
            if s2 is None:
                continue
            c1 = c[s1]
            c2 = c[s2]
            if c1 >= BIG or c2 >= BIG:
                continue
            if (c1 if c1 > c2 else c2) == lm1:
                out.append(u)
        return out

    def open_triad_count(self, u, l):
        """M_u^(l) from the maintained cache."""
        if not 1 <= l <= self.L:
            raise ValueError("generation out of range")
        return self.M[u * (self.L + 1) + l]

    def owned_count(self, u, l):
        return self.Eg[u * (self.L + 1) + l]

    # ------------------------------------------------------------------
    # snapshots and serialization

    def canonical_partition(self):
        from .graphs import Partition

        return Partition(self.labels)

    def block_matrix_dense(self):
        """(labels, e) with labels densified and e a BxB doubled-diagonal
        list-of-lists, for predictive resampling."""
        remap = {}
        lab = []
        for x in self.labels:
            if x not in remap:
                remap[x] = len(remap)
            lab.append(remap[x])
        nb = len(remap)
        e = [[0] * nb for _ in range(nb)]
        for (r, s), cnt in self.ers.items():
            rr, ss = remap[r], remap[s]
            if rr == ss:
                e[rr][rr] += cnt
            else:
                e[rr][ss] += cnt
                e[ss][rr] += cnt
        return lab, e

    def closure_cells(self):
        """Sparse {(u, l): (E_u, M_u)} over cells with any open triads."""
        out = {}
        lw = self.L + 1
        M = self.M
        Eg = self.Eg
        for u in range(self.n):
            base = u * lw
            for l in range(1, lw):
                m = M[base + l]
                if m > 0 or Eg[base + l] > 0:
                    out[(u, l)] = (Eg[base + l], m)
        return out

    def to_jsonable(self):
        """Ownership index + partition, enough to reconstruct the state
        bit-for-bit (group-id order and float accumulators included)."""
        return {
            "n": self.n,
            "l_max": self.L,
            "closure": self.closure_enabled,
            "slots": [list(p) for p in self.slots],
            "certain": [int(x) for x in self.certain],
            "present": [int(x) for x in self.present],
            "seminal": list(self.a),
            "owners": [sorted([u, l] for (u, l) in own) for own in self.owners],
            "labels": list(self.labels),
            "gid_list": list(self.gid_list),
            "next_gid": self.next_gid,
            "sbm_log": self.sbm_log,
            "closure_sum": list(self.closure_sum),
            "closure_total": self.closure_total,
            "global_l": list(self.global_l),
            "global_total": self.global_total,
        }

    @classmethod
    def restore(cls, doc, g, measurement=None):
        """Rebuild a state from ``to_jsonable`` output against graph ``g``."""
        extra = [tuple(p) for p, cert in zip(doc["slots"], doc["certain"]) if not cert]
        present = [
            bool(p)
            for p, cert in zip(doc["present"], doc["certain"])
            if not cert
        ]
        st = cls(
            g,
            l_max=doc["l_max"],
            closure=doc["closure"],
            extra_pairs=extra,
            present=present,
            measurement=measurement,
        )
        st.begin()
        for t_slot, mult in enumerate(doc["seminal"]):
            if st.present[t_slot]:
                st.set_seminal(t_slot, mult)
        for t_slot, own in enumerate(doc["owners"]):
            for u, l in own:
                st.add_owner(t_slot, u, l)
        labels = doc["labels"]
        remap = {}
        for node, x in enumerate(labels):
            if x not in remap:
                if node == 0:
                    remap[x] = st.labels[0]
                    continue
                st.move_node(node, None)
                remap[x] = st.labels[node]
            else:
                st.move_node(node, remap[x])
        st.commit()
        st._force_gids(labels, doc.get("gid_list"), doc.get("next_gid"))
        if "sbm_log" in doc:
            st.sbm_log = doc["sbm_log"]
        if doc.get("closure_sum") and st.closure_enabled:
            st.closure_sum = list(doc["closure_sum"])
            if "closure_total" in doc:
                st.closure_total = doc["closure_total"]
                st.global_l = list(doc["global_l"])
                st.global_total = doc["global_total"]
        return st

    def _force_gids(self, saved_labels, saved_gid_list, saved_next_gid):
        """Rename groups so gid values, gid order, and next_gid match a saved
        state exactly; all caches are relabeled in place."""
        if saved_gid_list is None:
            return
        mapping = {}
        for node, g_saved in enumerate(saved_labels):
            cur = self.labels[node]
            prev = mapping.get(cur)
            if prev is None:
                mapping[cur] = g_saved
            elif prev != g_saved:
                raise ValueError("saved labels disagree with rebuilt grouping")
        self.labels = list(saved_labels)
        self.sizes = {mapping[g]: v for g, v in self.sizes.items()}
        self.eta = {mapping[g]: v for g, v in self.eta.items()}
        self.er = {mapping[g]: v for g, v in self.er.items()}
        self.members = {mapping[g]: v for g, v in self.members.items()}
        new_ers = {}
        for (r, s), v in self.ers.items():
            rr, ss = mapping[r], mapping[s]
            if rr > ss:
                rr, ss = ss, rr
            new_ers[(rr, ss)] = v
        self.ers = new_ers
        self.gid_list = list(saved_gid_list)
        self.gid_pos = {g: i for i, g in enumerate(self.gid_list)}
        self.next_gid = saved_next_gid

    # ------------------------------------------------------------------
    # from-scratch verification

    def recompute_joint(self):
        """Joint log-probability recomputed from scratch (no caches)."""
        sbm = self._recompute_sbm_log()
        val = sbm + self.partition_log_prior()
        if self.uncovered or self.bad:
            return NEG_INF
        if self.closure_enabled:
            saved = (self.M, self.Eg, self.Nm, self.Ng, self.closure_sum,
                     self.bad, self.bad_per_l)
            self._recompute_closure()
            if self.bad:
                val = NEG_INF
            else:
                for l in range(1, self.L + 1):
                    nm = self.Nm[l]
                    val += (
                        self.closure_sum[l]
                        - log_binom(nm, self.Ng[l])
                        - _LOG(1 + nm)
                    )
            (self.M, self.Eg, self.Nm, self.Ng, self.closure_sum,
             self.bad, self.bad_per_l) = saved
        return val


# ---------------------------------------------------------------------------
# module-level operations (closure-model API)


def open_triad_count(state, u, l):
    """M_u^(l): open triads centered on ego u admissible at generation l."""
    return state.open_triad_count(u, l)


def layer_log_marginal(state, l):
    """ln P(g^(l) | A^(l-1), g^(l-1)) for one generation."""
    if not 1 <= l <= state.L:
        raise ValueError("generation out of range")
    return state.closure_layer_log(l)


def joint_log_probability(state):
    """ln P(G, {g^(l)}, A', b) for the state's current decomposition."""
    return state.joint_log_probability()


def validate_state(state):
    """Full from-scratch check of every invariant; empty list iff valid."""
    out = []
    lw = state.L + 1
    # coverage and ownership structure
    for t, (i, j) in enumerate(state.slots):
        if state.present[t]:
            tot = state.a[t] + len(state.owners[t])
            if tot == 0:
                out.append("coverage violation at (%d, %d)" % (i, j))
            if state.total_own[t] != state.a[t] + len(state.owners[t]):
                out.append("total-ownership cache wrong at slot %d" % t)
            exp_c = BIG
            if state.a[t] > 0:
                exp_c = 0
            else:
                gens = sorted(l for (_, l) in state.owners[t])
                if gens:
                    exp_c = gens[0]
            if state.c[t] != exp_c:
                out.append("creation-generation cache wrong at slot %d" % t)
        else:
            if state.a[t] or state.owners[t]:
                out.append("absent pair (%d, %d) holds ownership" % (i, j))
    # owner triad validity (the w-rule and openness)
    for t, own in enumerate(state.owners):
        for (u, l), cached_valid in own.items():
            actual = state._owner_valid(t, u, l)
            if not actual:
                i, j = state.slots[t]
                out.append(
                    "closure edge (%d, %d) ego %d gen %d has no open triad"
                    % (i, j, u, l)
                )
            if actual != cached_valid:
                out.append("validity cache wrong at slot %d ego %d" % (t, u))
    # cache equality for M/E
    if state.closure_enabled:
        saved = (state.M, state.Eg, state.Nm, state.Ng, state.closure_sum,
                 state.bad, state.bad_per_l)
        state._recompute_closure()
        fresh = (state.M, state.Eg, state.Nm, state.Ng)
        (state.M, state.Eg, state.Nm, state.Ng, state.closure_sum,
         state.bad, state.bad_per_l) = saved
        if fresh[0] != state.M:
            out.append("open-triad cache M diverges from recomputation")
        if fresh[1] != state.Eg:
            out.append("owned-count cache E diverges from recomputation")
        if fresh[2] != state.Nm or fresh[3] != state.Ng:
            out.append("per-generation count caches diverge")
    # SBM caches
    if abs(state._recompute_sbm_log() - state.sbm_log) > 1e-6:
        out.append("SBM log accumulator diverges from recomputation")
    kfresh = [0] * state.n
    for t, (i, j) in enumerate(state.slots):
        if state.present[t]:
            kfresh[i] += state.a[t]
            kfresh[j] += state.a[t]
    if kfresh != state.kdeg:
        out.append("degree cache diverges")
    return out

