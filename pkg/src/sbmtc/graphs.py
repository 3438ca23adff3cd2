"""Graph containers, edge-list parsing, and elementary graph statistics.

``SimpleGraph`` is immutable after construction and safe to share across
threads.  ``MultiGraph`` and ``Partition`` are single-writer values.
Node ids are dense 0-based integers; an optional name map travels as metadata
only.  Self-loops are forbidden everywhere.
"""

import io
from dataclasses import dataclass, field


class GraphError(ValueError):
    """Invalid graph content (self-loops, inconsistent counts, ...)."""


class ParseError(GraphError):
    """Malformed edge-list input; carries a 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)


class SimpleGraph:
    """An undirected simple graph on nodes 0..N-1.

    Edges are unordered pairs (i, j) with i != j, stored both as a list (in
    canonical i < j lexicographic order) and as adjacency sets for O(1)
    expected membership queries.
    """

    __slots__ = ("n", "edges", "edge_index", "adj", "names")

    def __init__(self, n, edges, names=None):
        adj = [set() for _ in range(n)]
        canon = set()
        for i, j in edges:
            if i == j:
                raise GraphError("self-loop at node %d" % i)
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError("edge (%d, %d) outside node range [0, %d)" % (i, j, n))
            if i > j:
                i, j = j, i
            canon.add((i, j))
        self.n = n
        self.edges = sorted(canon)
        self.edge_index = {e: idx for idx, e in enumerate(self.edges)}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        self.adj = adj
        self.names = names

    @property
    def num_edges(self):
        return len(self.edges)

    def degree(self, i):
        return len(self.adj[i])

    def neighbors(self, i):
        return self.adj[i]

    def has_edge(self, i, j):
        return ((i, j) if i < j else (j, i)) in self.edge_index

    def degrees(self):
        return [len(a) for a in self.adj]

    def __eq__(self, other):
        return (
            isinstance(other, SimpleGraph)
            and self.n == other.n
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.n, tuple(self.edges)))

    def __repr__(self):
        return "SimpleGraph(n=%d, e=%d)" % (self.n, self.num_edges)


class MultiGraph:
    """An undirected multigraph: positive multiplicities on unordered pairs."""

    __slots__ = ("n", "mult")

    def __init__(self, n, mult=None):
        self.n = n
        self.mult = {}
        if mult:
            for (i, j), w in mult.items():
                self.add(i, j, w)

    def add(self, i, j, w=1):
        if i == j:
            raise GraphError("self-loop at node %d" % i)
        if w < 0:
            raise GraphError("negative multiplicity on (%d, %d)" % (i, j))
        if i > j:
            i, j = j, i
        if not (0 <= i and j < self.n):
            raise GraphError("edge (%d, %d) outside node range" % (i, j))
        new = self.mult.get((i, j), 0) + w
        if new:
            self.mult[(i, j)] = new

    @classmethod
    def from_simple(cls, g, multiplicity=1):
        m = cls(g.n)
        if multiplicity > 0:
            for e in g.edges:
                m.mult[e] = multiplicity
        return m

    @property
    def total_edges(self):
        return sum(self.mult.values())

    def degrees(self):
        k = [0] * self.n
        for (i, j), w in self.mult.items():
            k[i] += w
            k[j] += w
        return k

    def binarize(self):
        """The simple graph A(A'): one edge wherever multiplicity > 0."""
        return SimpleGraph(self.n, list(self.mult.keys()))

    def __eq__(self, other):
        return (
            isinstance(other, MultiGraph)
            and self.n == other.n
            and self.mult == other.mult
        )

    def __repr__(self):
        return "MultiGraph(n=%d, pairs=%d, total=%d)" % (
            self.n, len(self.mult), self.total_edges,
        )


class Partition:
    """A node partition b with labels normalized to 0..B-1.

    Labels are relabelled by order of first appearance, so two label vectors
    describing the same grouping with the same label order compare equal.
    Group sizes are cached; block edge counts and degree histograms are
    computed against a given multigraph on demand.
    """

    __slots__ = ("labels", "b", "sizes")

    def __init__(self, labels):
        remap = {}
        norm = []
        for x in labels:
            if x not in remap:
                remap[x] = len(remap)
            norm.append(remap[x])
        self.labels = tuple(norm)
        self.b = len(remap)
        sizes = [0] * self.b
        for x in norm:
            sizes[x] += 1
        self.sizes = tuple(sizes)

    @property
    def n(self):
        return len(self.labels)

    def block_edge_counts(self, a):
        """e_rs over multigraph ``a`` as a dict; diagonal counts twice."""
        if a.n != self.n:
            raise GraphError("partition/graph size mismatch")
        lab = self.labels
        ers = {}
        for (i, j), w in a.mult.items():
            r, s = lab[i], lab[j]
            if r > s:
                r, s = s, r
            ers[(r, s)] = ers.get((r, s), 0) + (2 * w if r == s else w)
        return ers

    def degree_histograms(self, a):
        """eta^r_k: per group, a dict degree -> node count over ``a``."""
        k = a.degrees()
        hists = [dict() for _ in range(self.b)]
        for i, lab in enumerate(self.labels):
            h = hists[lab]
            h[k[i]] = h.get(k[i], 0) + 1
        return hists

    def __eq__(self, other):
        return isinstance(other, Partition) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        return "Partition(n=%d, b=%d)" % (self.n, self.b)


# ---------------------------------------------------------------------------
# edge-list format


def parse_edge_list(source):
    """Parse whitespace-separated "i j" lines into a SimpleGraph.

    ``source`` may be text, bytes, or a readable file object.  Lines starting
    with '#' are comments, except a "# nodes: N" header which fixes the node
    count (needed to round-trip trailing isolated nodes).  Duplicate lines and
    (j, i) repeats collapse to a single edge; self-loops are rejected.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    edges = []
    n_header = None
    max_id = -1
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("nodes:"):
                try:
                    n_header = int(body.split(":", 1)[1])
                except ValueError:
                    raise ParseError("bad node-count header %r" % line, lineno)
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ParseError("expected two node ids, got %r" % line, lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError("non-integer node id in %r" % line, lineno)
        if i < 0 or j < 0:
            raise ParseError("negative node id in %r" % line, lineno)
        if i == j:
            raise ParseError("self-loop %d-%d" % (i, j), lineno)
        edges.append((i, j))
        if i > max_id:
            max_id = i
        if j > max_id:
            max_id = j
    n = max_id + 1 if n_header is None else n_header
    if n_header is not None and max_id >= n_header:
        raise ParseError(
            "node id %d exceeds declared node count %d" % (max_id, n_header)
        )
    return SimpleGraph(n, edges)


def serialize_edge_list(g):
    """Canonical edge-list text: node-count header, then i < j pairs sorted."""
    out = ["# nodes: %d" % g.n]
    out.extend("%d %d" % e for e in g.edges)
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# elementary statistics


def common_neighbors(g, i, j):
    """Sorted common neighbors of i and j; O(min(k_i, k_j)) expected."""
    if i == j:
        raise ValueError("common_neighbors needs two distinct nodes")
    a, b = g.adj[i], g.adj[j]
    if len(a) > len(b):
        a, b = b, a
    return sorted(u for u in a if u in b)


@dataclass
class ClusteringInfo:
    """Global clustering with the bookkeeping behind the number.

    ``value`` is 3 x (triangles) x 2 over the ordered wedge count, i.e. the
    global transitivity ratio with the wedge denominator summed over all
    nodes; ``degenerate`` flags the no-wedge case where 0 is returned by
    convention.
    """

    value: float
    triangles: int
    wedges: int
    degenerate: bool
    convention: str = field(default="transitivity-sum-over-i", repr=False)


def clustering_info(g):
    tri = 0
    wedges = 0
    adj = g.adj
    for i, j in g.edges:
        a, b = adj[i], adj[j]
        if len(a) > len(b):
            a, b = b, a
        tri += sum(1 for u in a if u in b)
    for nbrs in adj:
        k = len(nbrs)
        wedges += k * (k - 1)
    if wedges == 0:
        return ClusteringInfo(0.0, 0, 0, True)
    # tri counts one common neighbor per edge, i.e. 3 per triangle; the
    # ordered-triple numerator is 6 x triangles = 2 x tri
    return ClusteringInfo(2.0 * tri / wedges, tri // 3, wedges, False)


def global_clustering(g):
    """The fraction of ordered wedges closed into triangles, in [0, 1]."""
    return clustering_info(g).value
