"""Concrete random structures: subgraph counts in random k-graphs, arithmetic
progressions and Schur triples in random subsets of ``[n]``, and Turan data.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .bounds import LOWER, BoundResult
from .core import GroundSet, IndicatorFamily
from .decomposition import SymmetricDecomposition

COPY_CAP = 2_000_000
MAX_CANON_VERTICES = 8
MAX_SUBGRAPH_EDGES = 12
TURAN_GROUND_CAP = 20
TURAN_NODE_CAP = 1 << 20


@dataclass(frozen=True)
class KGraph:
    """A k-uniform hypergraph on vertices ``0..v-1``; isolated vertices allowed."""

    k: int
    v: int
    edges: tuple

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("uniformity k must be >= 2")
        edges = tuple(sorted(tuple(sorted(int(x) for x in e)) for e in self.edges))
        for e in edges:
            if len(set(e)) != self.k:
                raise ValueError(f"edge {e} is not a {self.k}-set")
            if e[0] < 0 or e[-1] >= self.v:
                raise ValueError(f"edge {e} uses a vertex outside 0..{self.v - 1}")
        if len(set(edges)) != len(edges):
            raise ValueError("repeated edge")
        object.__setattr__(self, "edges", edges)

    @property
    def e(self) -> int:
        return len(self.edges)

    def label(self) -> str:
        return f"k{self.k}v{self.v}:" + ",".join("".join(map(str, e)) if self.v <= 10 else "-".join(map(str, e))
                                               for e in self.edges)

    @cached_property
    def canonical(self) -> "KGraph":
        return KGraph(self.k, self.v, canonical_edges(self.k, self.v, self.edges))

    @cached_property
    def automorphisms(self) -> int:
        return automorphism_count(self)

    @cached_property
    def labelings(self) -> tuple:
        """Distinct edge sets obtained by relabelling the vertices (``v!/aut`` of them)."""
        seen = {}
        es = self.edges
        for perm in itertools.permutations(range(self.v)):
            img = tuple(sorted(tuple(sorted(perm[x] for x in e)) for e in es))
            seen.setdefault(img, None)
        return tuple(seen)


def complete(k: int, v: int) -> KGraph:
    return KGraph(k, v, tuple(itertools.combinations(range(v), k)))


def path(edges: int) -> KGraph:
    return KGraph(2, edges + 1, tuple((i, i + 1) for i in range(edges)))


def single_edge(k: int) -> KGraph:
    return KGraph(k, k, (tuple(range(k)),))


def read_kgraph(path_) -> KGraph:
    """Line 1 ``k v``, then one edge per line as ``k`` vertex indices; ``#`` comments."""
    with open(path_) as fh:
        return parse_kgraph(fh.read())


def parse_kgraph(text: str) -> KGraph:
    rows = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError("empty k-graph file")
    k, v = int(rows[0][0]), int(rows[0][1])
    return KGraph(k, v, tuple(tuple(int(x) for x in r) for r in rows[1:]))


def format_kgraph(g: KGraph) -> str:
    return "\n".join([f"{g.k} {g.v}"] + [" ".join(map(str, e)) for e in g.edges]) + "\n"


def canonical_edges(k: int, v: int, edges) -> tuple:
    """Lexicographically least relabelled edge list.

    Vertices are first split into classes by degree (an invariant), and only
    permutations respecting the class order are tried.
    """
    if v > MAX_CANON_VERTICES:
        raise ValueError(f"canonical labelling limited to {MAX_CANON_VERTICES} vertices")
    deg = [0] * v
    for e in edges:
        for x in e:
            deg[x] += 1
    classes: dict[int, list[int]] = {}
    for x in range(v):
        classes.setdefault(deg[x], []).append(x)
    ordered = [classes[d] for d in sorted(classes, reverse=True)]
    best = None
    for choice in itertools.product(*(itertools.permutations(c) for c in ordered)):
        order = [x for block in choice for x in block]
        relabel = [0] * v
        for new, old in enumerate(order):
            relabel[old] = new
        img = tuple(sorted(tuple(sorted(relabel[x] for x in e)) for e in edges))
        if best is None or img < best:
            best = img
    return best if best is not None else ()


def automorphism_count(g: KGraph) -> int:
    """Vertex permutations preserving the edge set, by brute force."""
    edges = set(g.edges)
    count = 0
    for perm in itertools.permutations(range(g.v)):
        if all(tuple(sorted(perm[x] for x in e)) in edges for e in g.edges):
            count += 1
    return count


def copies_count(g: KGraph, n: int) -> int:
    """``N(n, G)``: number of copies of ``G`` in the complete k-graph on ``n`` vertices."""
    if n < g.v:
        return 0
    inj = math.perm(n, g.v)
    q, r = divmod(inj, g.automorphisms)
    if r:
        raise AssertionError("injection count not divisible by automorphisms")
    return q


@dataclass(frozen=True)
class Copy:
    vertices: tuple
    edges: tuple


def edge_index(n: int, k: int) -> dict:
    return {e: i for i, e in enumerate(itertools.combinations(range(n), k))}


def enumerate_copies(h: KGraph, n: int, cap: int = COPY_CAP) -> list[Copy]:
    """Every distinct subgraph of the complete k-graph on ``[n]`` isomorphic to ``h``.

    Copies are generated per vertex set from the distinct relabellings of
    ``h``, so no copy is produced twice.
    """
    if n < h.v:
        return []
    pats = h.labelings
    total = math.comb(n, h.v) * len(pats)
    if total > cap:
        raise ValueError(f"{total} copies exceed cap {cap}")
    out = []
    for w in itertools.combinations(range(n), h.v):
        for pat in pats:
            out.append(Copy(w, tuple(tuple(w[x] for x in e) for e in pat)))
    return out


def count_copies_in(j: KGraph, h: KGraph) -> int:
    """``C_{J,H}``: number of subgraphs of ``h`` isomorphic to ``j``."""
    if j.k != h.k or j.v > h.v:
        return 0
    hedges = set(h.edges)
    total = 0
    for w in itertools.combinations(range(h.v), j.v):
        for pat in j.labelings:
            if all(tuple(w[x] for x in e) in hedges for e in pat):
                total += 1
    return total


def induced_edges(h: KGraph, w) -> tuple:
    ws = set(w)
    return tuple(e for e in h.edges if ws.issuperset(e))


def copies_all_induced(j: KGraph, h: KGraph) -> bool:
    """True when every copy of ``j`` inside ``h`` is an induced subgraph."""
    hedges = set(h.edges)
    for w in itertools.combinations(range(h.v), j.v):
        ind = set(induced_edges(h, w))
        for pat in j.labelings:
            img = {tuple(w[x] for x in e) for e in pat}
            if img <= hedges and img != ind:
                return False
    return True


def subgraph_classes(h: KGraph, include_isolated: bool = True) -> list[KGraph]:
    """Isomorphism classes of subgraphs ``J`` of ``h`` with ``e_J >= 1``.

    With ``include_isolated`` each edge pattern is also listed with every
    admissible number of extra isolated vertices.
    """
    if h.e > MAX_SUBGRAPH_EDGES:
        raise ValueError(f"subgraph scan limited to {MAX_SUBGRAPH_EDGES} edges")
    found: dict = {}
    for r in range(1, h.e + 1):
        for sub in itertools.combinations(h.edges, r):
            support = sorted({x for e in sub for x in e})
            relabel = {x: i for i, x in enumerate(support)}
            base = tuple(tuple(relabel[x] for x in e) for e in sub)
            top = h.v if include_isolated else len(support)
            for v in range(len(support), top + 1):
                key = (v, canonical_edges(h.k, v, base))
                if key not in found:
                    found[key] = KGraph(h.k, v, key[1])
    return sorted(found.values(), key=lambda g: (g.v, g.e, g.edges))


def ih_family(h: KGraph) -> list[KGraph]:
    """Subgraph classes with the most edges among all subgraphs on the same number of vertices."""
    if h.e < 1:
        raise ValueError("H needs at least one edge")
    out: dict = {}
    for v in range(h.k, h.v + 1):
        best = max(len(induced_edges(h, w)) for w in itertools.combinations(range(h.v), v))
        if best < 1:
            continue
        for w in itertools.combinations(range(h.v), v):
            ind = induced_edges(h, w)
            if len(ind) == best:
                relabel = {x: i for i, x in enumerate(w)}
                g = KGraph(h.k, v, tuple(tuple(relabel[x] for x in e) for e in ind)).canonical
                out.setdefault((g.v, g.edges), g)
    classes = sorted(out.values(), key=lambda g: (g.v, g.e, g.edges))
    for g in classes:
        if not copies_all_induced(g, h):
            raise AssertionError(f"class {g.label()} has a non-induced copy in H")
    return classes


def m_k(h: KGraph) -> Fraction:
    """Maximum of ``(e_J - 1)/(v_J - k)`` over subgraphs with at least two edges (``1/k`` if ``e_H = 1``)."""
    if h.e < 1:
        raise ValueError("H needs at least one edge")
    if h.e == 1:
        return Fraction(1, h.k)
    best = None
    for r in range(2, h.e + 1):
        for sub in itertools.combinations(h.edges, r):
            v = len({x for e in sub for x in e})
            val = Fraction(r - 1, v - h.k)
            if best is None or val > best:
                best = val
    return best


def expected_count(j: KGraph, n: int, p: float) -> float:
    """``E X_J = N(n, J) p^{e_J}``."""
    return copies_count(j, n) * float(p) ** j.e


def measured_lambda_jh(j: KGraph, h: KGraph, n: int, h_copies: list[Copy] | None = None) -> int:
    """Number of H-copies containing one fixed J-copy, by direct scan."""
    jc = enumerate_copies(j, n)
    if not jc:
        return 0
    fixed = jc[0]
    fv, fe = set(fixed.vertices), set(fixed.edges)
    h_copies = enumerate_copies(h, n) if h_copies is None else h_copies
    return sum(1 for c in h_copies if fv.issubset(c.vertices) and fe.issubset(c.edges))


@dataclass
class SubgraphInstance:
    H: KGraph
    n: int
    p: float
    family: IndicatorFamily
    copies: int
    phi_H: float
    phi_H_no_isolated: float
    phi_argmin: KGraph
    mk: Fraction
    ih: list
    cjh: dict
    copy_list: list = field(repr=False, default_factory=list)

    def sidecar(self) -> dict:
        return {
            "kind": "subgraph",
            "H": {"k": self.H.k, "v": self.H.v, "edges": [list(e) for e in self.H.edges]},
            "n": self.n,
            "p": float(self.p),
            "ground_size": self.family.ground.size,
            "copies": self.copies,
            "phi_H": self.phi_H,
            "phi_H_no_isolated": self.phi_H_no_isolated,
            "phi_argmin": self.phi_argmin.label(),
            "m_k": str(self.mk),
            "I_H": [g.label() for g in self.ih],
            "C_JH": dict(self.cjh),
        }


def phi_h(h: KGraph, n: int, p: float, include_isolated: bool = True) -> tuple[float, KGraph]:
    """``min E X_J`` over subgraph classes with at least one edge, and a minimiser."""
    best = None
    for j in subgraph_classes(h, include_isolated):
        val = expected_count(j, n, p)
        if best is None or val < best[0]:
            best = (val, j)
    return best


def subgraph_family(h: KGraph, n: int, p, cap: int = COPY_CAP) -> SubgraphInstance:
    """Indicator family of H-copies in the binomial random k-graph on ``[n]``."""
    if h.e < 1:
        raise ValueError("H needs at least one edge")
    copies = enumerate_copies(h, n, cap)
    index = edge_index(n, h.k)
    ground = GroundSet.uniform(len(index), p)
    family = IndicatorFamily.from_members(ground, ([index[e] for e in c.edges] for c in copies))
    pf = float(p)
    phi_all, arg = phi_h(h, n, pf, True)
    phi_plain, _ = phi_h(h, n, pf, False)
    ih = ih_family(h)
    return SubgraphInstance(
        H=h, n=n, p=p, family=family, copies=len(copies),
        phi_H=phi_all, phi_H_no_isolated=phi_plain, phi_argmin=arg,
        mk=m_k(h), ih=ih, cjh={g.label(): count_copies_in(g, h) for g in ih},
        copy_list=copies,
    )


def lambda_asymptotic(inst: SubgraphInstance) -> float:
    """``sum_{J in I_H} C_{J,H}^2 (E X_H)^2 / E X_J``."""
    if float(inst.p) <= 0:
        raise ValueError("p must be > 0")
    ex_h = expected_count(inst.H, inst.n, inst.p)
    total = 0.0
    for g in inst.ih:
        c = inst.cjh[g.label()]
        total += c * c * ex_h * ex_h / expected_count(g, inst.n, inst.p)
    return total


# ---------------------------------------------------------------- integers


def _integer_family(n: int, p, sets) -> tuple[IndicatorFamily, IndicatorFamily]:
    ground = GroundSet.uniform(n, p)
    fam = IndicatorFamily.from_members(ground, ([x - 1 for x in s] for s in sets),
                                       labels=[tuple(s) for s in sets])
    y = IndicatorFamily.from_members(ground, ([b] for b in range(n)), labels=list(range(1, n + 1)))
    return fam, y


def arithmetic_progressions(k_len: int, n: int) -> list[tuple]:
    """All k-term progressions ``b, b+d, ..., b+(k-1)d`` in ``[n]``, ordered by ``d`` then ``b``."""
    if k_len < 2:
        raise ValueError("progression length must be >= 2")
    out = []
    d = 1
    while 1 + (k_len - 1) * d <= n:
        for b in range(1, n - (k_len - 1) * d + 1):
            out.append(tuple(b + i * d for i in range(k_len)))
        d += 1
    return out


def ap_family(k_len: int, n: int, p) -> tuple[IndicatorFamily, SymmetricDecomposition]:
    """AP count over ``[n]`` and its endpoint decomposition with weights 1/2."""
    aps = arithmetic_progressions(k_len, n)
    fam, y = _integer_family(n, p, aps)
    parts = [[] for _ in range(n)]
    half = Fraction(1, 2)
    for ap in aps:
        q = [x - 1 for x in ap]
        parts[ap[0] - 1].append((half, q))
        parts[ap[-1] - 1].append((half, q))
    return fam, SymmetricDecomposition(y, tuple(parts))


def schur_triples(n: int) -> list[tuple]:
    return [(x, y, x + y) for x in range(1, n + 1) for y in range(x + 1, n + 1) if x + y <= n]


def schur_family(n: int, p) -> tuple[IndicatorFamily, SymmetricDecomposition]:
    """Schur-triple count over ``[n]``; weight 1/2 on the sum, 1/4 on each summand."""
    triples = schur_triples(n)
    fam, y = _integer_family(n, p, triples)
    parts = [[] for _ in range(n)]
    for x, yy, s in triples:
        q = [x - 1, yy - 1, s - 1]
        parts[s - 1].append((Fraction(1, 2), q))
        parts[x - 1].append((Fraction(1, 4), q))
        parts[yy - 1].append((Fraction(1, 4), q))
    return fam, SymmetricDecomposition(y, tuple(parts))


def ap_mean_formula(k_len: int, n: int, beta: int) -> Fraction:
    """Closed-form coefficient of ``p^{k-1}`` in ``E X_beta`` for the AP decomposition."""
    return Fraction((n - beta) // (k_len - 1) + (beta - 1) // (k_len - 1), 2)


def schur_mean_formula(n: int, beta: int) -> Fraction:
    """Closed-form coefficient of ``p^2`` in ``E X_beta`` for the Schur decomposition."""
    return Fraction((beta - 1) // 2, 2) + Fraction(max(n - 2 * beta, 0) + min(n - beta, beta - 1), 4)


def psi_k(k_len: int, n: int, p: float) -> float:
    return min(n * n * p ** k_len, n * p)


# ---------------------------------------------------------------- Turan


@dataclass(frozen=True)
class TuranData:
    H: KGraph
    n: int
    ex_n: int | None
    pi_H: Fraction | None


def chromatic_number(h: KGraph) -> int:
    """Fewest colours with no monochromatic edge, by brute force."""
    if h.e == 0:
        return 1 if h.v else 0
    for c in range(1, h.v + 1):
        for col in itertools.product(range(c), repeat=h.v):
            if col[0] != 0:
                continue
            if all(len({col[x] for x in e}) > 1 for e in h.edges):
                return c
    return h.v


def turan_density(h: KGraph) -> Fraction | None:
    """``1 - 1/(chi(H) - 1)`` for graphs; unknown (None) for ``k > 2``."""
    if h.k != 2:
        return None
    chi = chromatic_number(h)
    if chi < 2:
        return None
    return 1 - Fraction(1, chi - 1)


def ex_number(h: KGraph, n: int, node_cap: int = TURAN_NODE_CAP) -> int:
    """Most edges in an H-free k-graph on ``n`` vertices, by branch and bound."""
    ground = math.comb(n, h.k)
    if ground > TURAN_GROUND_CAP:
        raise ValueError(f"ex(n, H) search limited to {TURAN_GROUND_CAP} ground edges, got {ground}")
    index = edge_index(n, h.k)
    copy_masks = [sum(1 << index[e] for e in c.edges) for c in enumerate_copies(h, n)]
    by_edge = [[m for m in copy_masks if (m >> i) & 1] for i in range(ground)]
    best = 0
    nodes = 0

    def dfs(i: int, chosen: int, size: int):
        nonlocal best, nodes
        nodes += 1
        if nodes > node_cap:
            raise RuntimeError(f"ex(n, H) search exceeded {node_cap} nodes")
        if size + (ground - i) <= best:
            return
        if i == ground:
            best = size
            return
        with_i = chosen | (1 << i)
        if all((with_i & m) != m for m in by_edge[i]):
            dfs(i + 1, with_i, size + 1)
        dfs(i + 1, chosen, size)

    dfs(0, 0, 0)
    return best


def turan_data(h: KGraph, n: int, pi_H: Fraction | None = None) -> TuranData:
    ex_n = ex_number(h, n) if math.comb(n, h.k) <= TURAN_GROUND_CAP else None
    if pi_H is None:
        pi_H = turan_density(h)
    return TuranData(h, n, ex_n, pi_H)


def turan_lower_bound(h: KGraph, n: int, p, turan: TuranData | None = None) -> BoundResult:
    """``Pr(X_H = 0) >= (1-p)^(C(n,k) - ex(n,H))`` from an extremal H-free host.

    Without a brute-force ``ex(n, H)`` the edge count ``ceil(pi_H C(n,k))`` is
    used; ``ex(n,H)/C(n,k)`` is non-increasing in ``n`` so it never falls
    below ``pi_H``, and the bound stays valid.
    """
    turan = turan if turan is not None else turan_data(h, n)
    total = math.comb(n, h.k)
    if turan.ex_n is not None:
        kept, source = turan.ex_n, "brute force"
    elif turan.pi_H is not None:
        kept, source = math.ceil(Fraction(turan.pi_H) * total), "density"
    else:
        raise ValueError("ex(n, H) is out of brute-force reach and no Turan density was supplied")
    missing = total - kept
    p = float(p)
    if missing == 0 or p == 0.0:
        log = 0.0
    elif p == 1.0:
        log = -math.inf
    else:
        log = missing * math.log1p(-p)
    return BoundResult("turan", log, True, LOWER, [("ex(n,H) source: " + source, True)],
                       {"ex_n": kept, "ground": total, "pi_H": None if turan.pi_H is None else str(turan.pi_H)},
                       tail="eq0")
