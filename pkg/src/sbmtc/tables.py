"""Shared numeric tables: log-factorials and restricted integer partition counts.

Both tables are build-once, read-many caches shared by the likelihood code and
the samplers.  They grow on demand; extension is guarded by a lock so read-only
use from several threads is safe.

The restricted partition count q(m, n) -- the number of partitions of the
integer m into at most n parts -- is computed exactly with arbitrary-precision
integers via the recurrence

    q(m, n) = q(m, n-1) + q(m-n, n),     q(0, n) = 1,  q(m, 0) = 0 for m > 0,

and q(m, n) = q(m, m) for n > m.  To keep this exact at the scales the
samplers need (m up to ~1e5) without a quadratic bigint table in memory, the
lookup is tiered:

* m <= 512: a dense exact table.
* n >= m: q(m, n) = p(m), the unrestricted partition number, from an exact
  pentagonal-number recurrence.
* 3(n+1) > m: at most two parts can exceed n, so inclusion-exclusion over the
  oversized parts gives q(m, n) exactly from p(.) and its prefix sums, all in
  integer arithmetic.
* otherwise: a column-streamed exact computation whose natural logs are stored
  in a float32 numpy rectangle, cached on disk keyed by its dimensions.

Every tier is exact integer combinatorics; rounding happens only when taking
the final natural log.
"""

import math
import os
import threading

import numpy as np

_LOCK = threading.RLock()

# ---------------------------------------------------------------------------
# log-factorials


_LF = [0.0, 0.0]


def ensure_log_factorials(n):
    """Extend the shared ln-factorial table to cover n and return it."""
    if n >= len(_LF):
        with _LOCK:
            for i in range(len(_LF), n + 1):
                _LF.append(math.lgamma(i + 1))
    return _LF


def log_factorial(n):
    """ln n! for integer n >= 0."""
    if n < 0:
        raise ValueError("negative factorial argument: %r" % (n,))
    if n >= len(_LF):
        ensure_log_factorials(n + 64)
    return _LF[n]


def log_binom(n, k):
    """ln C(n, k); -inf when the coefficient is zero, error on negative n."""
    if n < 0:
        raise ValueError("negative binomial row: %r" % (n,))
    if k < 0 or k > n:
        return float("-inf")
    if n >= len(_LF):
        ensure_log_factorials(n + 64)
    lf = _LF
    return lf[n] - lf[k] - lf[n - k]


_LN2 = math.log(2.0)


def log_double_factorial_even(m):
    """ln m!! for even m >= 0, i.e. ln((2h)!!) = h ln 2 + ln h!."""
    if m % 2:
        raise ValueError("even argument required, got %r" % (m,))
    h = m // 2
    return h * _LN2 + log_factorial(h)


# ---------------------------------------------------------------------------
# integer partitions

_SMALL_M = 512


class PartitionTable:
    """Exact restricted-partition counts q(m, n) with tiered storage."""

    SMALL_N = 32

    def __init__(self):
        self._small = None          # _small[m][n] for m <= _SMALL_M, 0 <= n <= m
        self._ln_small = None
        self._p = [1]               # p(m) exact
        self._p_prefix = [1]        # sum_{t<=m} p(t) exact
        self._ln_p = [0.0]
        self._ie_cache = {}         # (m, n) -> ln q for the inclusion-exclusion tier
        self._cols = {0: [1]}       # exact columns q(., n) for n <= SMALL_N
        self._ln_cols = {0: [0.0]}
        self._rect = None           # float log-q rectangle, rows m, cols n
        self._rect_m = -1
        self._rect_n = -1

    # -- small exact table

    def _ensure_small(self):
        if self._small is not None:
            return
        with _LOCK:
            if self._small is not None:
                return
            table = [[1]]  # q(0, 0) = 1
            for m in range(1, _SMALL_M + 1):
                row = [0] * (m + 1)
                for n in range(1, m + 1):
                    rest = m - n
                    row[n] = row[n - 1] + (
                        table[rest][min(n, rest)] if rest >= 0 else 0
                    )
                table.append(row)
            self._ln_small = [[math.log(v) if v else -math.inf for v in row]
                              for row in table]
            self._small = table

    # -- unrestricted partition numbers p(m)

    def _ensure_p(self, m):
        if m < len(self._p):
            return
        with _LOCK:
            p = self._p
            pref = self._p_prefix
            lnp = self._ln_p
            for t in range(len(p), m + 1):
                total = 0
                k = 1
                while True:
                    g1 = t - k * (3 * k - 1) // 2
                    if g1 < 0:
                        break
                    term = p[g1]
                    g2 = g1 - k
                    if g2 >= 0:
                        term += p[g2]
                    total += term if k % 2 else -term
                    k += 1
                p.append(total)
                pref.append(pref[-1] + total)
                lnp.append(math.log(total))

    def partition_count(self, m):
        """p(m), the number of partitions of m, as an exact integer."""
        if m < 0:
            return 0
        self._ensure_p(m)
        return self._p[m]

    # -- exact integer q for feasible sizes

    def _ensure_cols(self, n, m):
        """Exact per-column values q(., k) for k <= n, extended to row m."""
        with _LOCK:
            cols = self._cols
            lncols = self._ln_cols
            col0 = cols[0]
            if len(col0) <= m:
                col0.extend([0] * (m + 1 - len(col0)))
                lncols[0].extend([-math.inf] * (m + 1 - len(lncols[0])))
            log = math.log
            for k in range(1, n + 1):
                prev = cols[k - 1]
                col = cols.get(k)
                if col is None:
                    col = [1]  # q(0, k) = 1
                    cols[k] = col
                    lncols[k] = [0.0]
                start = len(col)
                if start > m:
                    continue
                col.extend([0] * (m + 1 - start))
                lnc = lncols[k]
                for t in range(start, m + 1):
                    v = prev[t] + (col[t - k] if t >= k else 0)
                    col[t] = v
                    lnc.append(log(v) if v else -math.inf)

    def q_exact(self, m, n):
        """q(m, n) as an exact integer.

        Covers m <= 512 or n <= 32 for any size, plus the n >= m and
        3(n+1) > m tiers.  Raises for sizes only the float rectangle serves.
        """
        if m < 0 or n < 0:
            return 0
        if m == 0:
            return 1
        if n == 0:
            return 0
        if n >= m:
            return self.partition_count(m)
        if m <= _SMALL_M:
            self._ensure_small()
            return self._small[m][n]
        if n <= self.SMALL_N:
            self._ensure_cols(n, m)
            return self._cols[n][m]
        if 3 * (n + 1) > m:
            return self._q_big_n(m, n)
        raise ValueError(
            "q(%d, %d) exceeds the exact-integer tiers; use log_q" % (m, n)
        )

    def _q_big_n(self, m, n):
        # By conjugation q(m, n) counts partitions with largest part <= n.
        # Group all partitions of m by their multiset S of parts > n; with
        # 3(n+1) > m, |S| <= 2 and the remainders collapse to unrestricted
        # counts, giving exactly
        #   q(m,n) = p(m) - sum_{t<=m-n-1} p(t)
        #            + sum_s (ceil(s/2) - n - 1) p(m-s),  s = 2(n+1)..m.
        self._ensure_p(m)
        p = self._p
        pref = self._p_prefix
        over1 = pref[m - n - 1] if m - n - 1 >= 0 else 0
        corr = 0
        for s in range(2 * (n + 1), m + 1):
            coeff = (s + 1) // 2 - n - 1
            if coeff > 0:
                corr += coeff * p[m - s]
        return p[m] - over1 + corr

    # -- float rectangle for the remaining region

    def ensure_rectangle(self, m_cap, n_cap, cache_dir=None):
        """Build (or load from disk) the log-q rectangle covering
        m <= m_cap, n <= n_cap.  Values are exact integers logged into
        float32."""
        with _LOCK:
            if self._rect is not None and self._rect_m >= m_cap and self._rect_n >= n_cap:
                return
            # round caps up so nearby requests share one table / disk file
            m_cap = max(m_cap, self._rect_m)
            n_cap = max(n_cap, self._rect_n)
            m_cap = ((m_cap // 4096) + 1) * 4096
            n_cap = min(((n_cap // 256) + 1) * 256, m_cap)
            path = None
            if cache_dir is None:
                cache_dir = os.environ.get("SBMTC_TABLE_CACHE")
            if cache_dir:
                os.makedirs(cache_dir, exist_ok=True)
                path = os.path.join(cache_dir, "logq_%d_%d.npy" % (m_cap, n_cap))
                if os.path.exists(path):
                    self._rect = np.load(path, mmap_mode="r")
                    self._rect_m = m_cap
                    self._rect_n = n_cap
                    return
            rect = np.zeros((m_cap + 1, n_cap + 1), dtype=np.float32)
            rect[1:, 0] = -np.inf
            col = [0] * (m_cap + 1)  # exact bigints, parts <= n
            col[0] = 1
            log = math.log
            for n in range(1, n_cap + 1):
                for m in range(n, m_cap + 1):
                    col[m] += col[m - n]
                rect[1:, n] = [log(v) if v else -math.inf for v in col[1:]]
            if path:
                np.save(path, rect)
                self._rect = np.load(path, mmap_mode="r")
            else:
                self._rect = rect
            self._rect_m = m_cap
            self._rect_n = n_cap

    def log_q(self, m, n):
        """ln q(m, n) as a float; exact-integer combinatorics underneath."""
        if m < 0 or n < 0:
            return float("-inf")
        if m == 0:
            return 0.0
        if n == 0:
            return float("-inf")
        if n >= m:
            if m >= len(self._ln_p):
                self._ensure_p(m)
            return self._ln_p[m]
        if m <= _SMALL_M:
            if self._ln_small is None:
                self._ensure_small()
            return self._ln_small[m][n]
        if n <= self.SMALL_N:
            lnc = self._ln_cols.get(n)
            if lnc is None or m >= len(lnc):
                self._ensure_cols(n, m + 256)
                lnc = self._ln_cols[n]
            return lnc[m]
        if 3 * (n + 1) > m:
            key = (m, n)
            v = self._ie_cache.get(key)
            if v is None:
                v = math.log(self._q_big_n(m, n))
                self._ie_cache[key] = v
            return v
        if self._rect is None or m > self._rect_m or n > self._rect_n:
            self.ensure_rectangle(m, n)
        return float(self._rect[m, n])


_TABLE = PartitionTable()


def log_restricted_partitions(m, n):
    """ln q(m, n): partitions of m into at most n parts (shared exact table)."""
    return _TABLE.log_q(m, n)


def restricted_partitions_exact(m, n):
    """q(m, n) as an exact integer where the integer tiers reach."""
    return _TABLE.q_exact(m, n)


def partition_count(m):
    """p(m) as an exact integer."""
    return _TABLE.partition_count(m)


def prepare_partition_table(m_cap, n_cap, cache_dir=None):
    """Pre-build the q(m, n) rectangle a sampler run will need.

    Called by chain setup with caps derived from the graph so per-move lookups
    are O(1).  The rectangle is only required for queries with 3(n+1) <= m;
    smaller/larger regions are served by the exact tiers.
    """
    n_cap = min(n_cap, m_cap // 3 + 2)
    if m_cap > _SMALL_M and n_cap > PartitionTable.SMALL_N:
        _TABLE.ensure_rectangle(m_cap, n_cap, cache_dir=cache_dir)
