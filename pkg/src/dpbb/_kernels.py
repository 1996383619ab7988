"""Hot graph kernels with a numba path and a pure numpy/scipy fallback.

The backend is picked once from the ``DPBB_NUMBA`` environment variable
(``0``/``false``/``no`` selects the numpy fallback) and can be switched at
runtime with :func:`set_backend`.  Both paths return identical results;
the test-suite runs them against each other.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _env_backend() -> str:
    flag = os.environ.get("DPBB_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "no", "off") or not HAS_NUMBA:
        return "numpy"
    return "numba"


_BACKEND = _env_backend()


def backend() -> str:
    return _BACKEND


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _BACKEND = _BACKEND, name
    return prev


# ---------------------------------------------------------------------------
# small numpy helpers shared by both paths


def csr(n: int, src: np.ndarray, *cols: np.ndarray):
    """Sort edges by source; returns ``indptr`` and the permuted columns."""
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return (indptr,) + tuple(np.ascontiguousarray(c[order]) for c in cols)


def gather_ranges(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Concatenation of ``arange(lo[i], hi[i])`` for all i."""
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    shift = np.repeat(lo - np.cumsum(counts) + counts, counts)
    return shift + np.arange(total, dtype=np.int64)


# ---------------------------------------------------------------------------
# strongly connected components


@njit(cache=True)
def _scc_nb(n, indptr, indices):
    # Iterative Tarjan.  Components are numbered in completion order, so every
    # edge between distinct components goes from a higher id to a lower one.
    index = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    onstack = np.zeros(n, np.bool_)
    comp = np.full(n, -1, np.int64)
    stack = np.empty(n, np.int64)
    call_v = np.empty(n, np.int64)
    call_e = np.empty(n, np.int64)
    sp = 0
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        index[root] = counter
        low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        onstack[root] = True
        call_v[0] = root
        call_e[0] = indptr[root]
        cp = 1
        while cp > 0:
            v = call_v[cp - 1]
            e = call_e[cp - 1]
            if e < indptr[v + 1]:
                call_e[cp - 1] = e + 1
                w = indices[e]
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    onstack[w] = True
                    call_v[cp] = w
                    call_e[cp] = indptr[w]
                    cp += 1
                elif onstack[w] and index[w] < low[v]:
                    low[v] = index[w]
            else:
                if low[v] == index[v]:
                    while True:
                        sp -= 1
                        w = stack[sp]
                        onstack[w] = False
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
                cp -= 1
                if cp > 0:
                    u = call_v[cp - 1]
                    if low[v] < low[u]:
                        low[u] = low[v]
    return comp, ncomp


def scc(n: int, src: np.ndarray, tgt: np.ndarray) -> tuple[np.ndarray, int]:
    """Strongly connected components of the graph ``src[i] -> tgt[i]``.

    Returns ``(comp, ncomp)``.  Component numbering is backend specific.
    """
    src = np.asarray(src, dtype=np.int64)
    tgt = np.asarray(tgt, dtype=np.int64)
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0
    if _BACKEND == "numba":
        indptr, indices = csr(n, src, tgt)
        return _scc_nb(n, indptr, indices)
    graph = csr_matrix(
        (np.ones(src.size, dtype=np.int8), (src, tgt)), shape=(n, n)
    )
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    return labels.astype(np.int64), int(ncomp)


def cyclic_states(n: int, src: np.ndarray, tgt: np.ndarray) -> np.ndarray:
    """Mask of states lying on a cycle (nontrivial SCC or self-loop)."""
    comp, ncomp = scc(n, src, tgt)
    size = np.bincount(comp, minlength=ncomp)
    mask = size[comp] > 1
    mask[src[src == tgt]] = True
    return mask


# ---------------------------------------------------------------------------
# backward reachability


@njit(cache=True)
def _backward_reach_nb(n, indptr, preds, seed):
    mask = seed.copy()
    stack = np.empty(n, np.int64)
    sp = 0
    for v in range(n):
        if mask[v]:
            stack[sp] = v
            sp += 1
    while sp > 0:
        sp -= 1
        v = stack[sp]
        for e in range(indptr[v], indptr[v + 1]):
            u = preds[e]
            if not mask[u]:
                mask[u] = True
                stack[sp] = u
                sp += 1
    return mask


def backward_reach(n: int, src: np.ndarray, tgt: np.ndarray, seed: np.ndarray) -> np.ndarray:
    """Mask of states from which some seed state is reachable (seeds included)."""
    src = np.asarray(src, dtype=np.int64)
    tgt = np.asarray(tgt, dtype=np.int64)
    seed = np.asarray(seed, dtype=np.bool_)
    indptr, preds = csr(n, tgt, src)
    if _BACKEND == "numba":
        return _backward_reach_nb(n, indptr, preds, seed)
    mask = seed.copy()
    frontier = np.flatnonzero(mask)
    while frontier.size:
        found = preds[gather_ranges(indptr[frontier], indptr[frontier + 1])]
        found = np.unique(found[~mask[found]])
        mask[found] = True
        frontier = found
    return mask


# ---------------------------------------------------------------------------
# branching signatures
#
# A signature key encodes (label, block of target) as ``label * nblk + block``.
# The signature of u is the set of keys of non-inert transitions leaving any
# state reachable from u by inert tau-steps (tau-steps inside u's block).
# Callers must pass an acyclic tau-graph (tau-SCCs collapsed, no tau loops).


@njit(cache=True)
def _topo_successors_first_nb(k, indptr, lab, tgt, tau):
    # Kahn's algorithm on the tau-DAG, reversed: successors come first.
    indeg = np.zeros(k, np.int64)
    for u in range(k):
        for e in range(indptr[u], indptr[u + 1]):
            if lab[e] == tau:
                indeg[tgt[e]] += 1
    order = np.empty(k, np.int64)
    head = 0
    tail = 0
    for u in range(k):
        if indeg[u] == 0:
            order[tail] = u
            tail += 1
    while head < tail:
        u = order[head]
        head += 1
        for e in range(indptr[u], indptr[u + 1]):
            if lab[e] == tau:
                v = tgt[e]
                indeg[v] -= 1
                if indeg[v] == 0:
                    order[tail] = v
                    tail += 1
    return order[::-1].copy()


@njit(cache=True)
def _contains(buf, lo, hi, key):
    end = hi
    while lo < hi:
        mid = (lo + hi) >> 1
        if buf[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo < end and buf[lo] == key


@njit(cache=True)
def _mix_nb(x, seed):
    z = np.uint64(x) + np.uint64(seed)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _in_set(node, key, parent, estart, elen, buf):
    while node != -1:
        if _contains(buf, estart[node], estart[node] + elen[node], key):
            return True
        node = parent[node]
    return False


@njit(cache=True)
def _delta_sets_nb(k, order, indptr, lab, tgt, block, tau, nblk):
    # Signatures as persistent sets: a node is its parent's set plus a sorted
    # run of extra keys disjoint from it.  A state extends the largest set of
    # its inert successors, so states funnelling into one big collapsed
    # tau-cycle share its storage instead of copying it.
    node_of = np.empty(k, np.int64)
    parent = np.empty(k, np.int64)
    estart = np.empty(k, np.int64)
    elen = np.empty(k, np.int64)
    size = np.empty(k, np.int64)
    h1 = np.empty(k, np.uint64)
    h2 = np.empty(k, np.uint64)
    stamp = np.full(k, -1, np.int64)
    cap = max(16, 2 * tgt.size)
    buf = np.empty(cap, np.int64)
    cand = np.empty(16, np.int64)
    used = 0
    nn = 0
    for i in range(k):
        u = order[i]
        bu = block[u]
        base = -1
        for e in range(indptr[u], indptr[u + 1]):
            v = tgt[e]
            if lab[e] == tau and block[v] == bu:
                j = node_of[v]
                if base == -1 or size[j] > size[base]:
                    base = j
        j = base
        while j != -1:
            stamp[j] = i
            j = parent[j]
        c = 0
        for e in range(indptr[u], indptr[u + 1]):
            v = tgt[e]
            if lab[e] == tau and block[v] == bu:
                j = node_of[v]
                while j != -1 and stamp[j] != i:
                    need = c + elen[j]
                    if need > cand.size:
                        grown = np.empty(2 * need, np.int64)
                        grown[:c] = cand[:c]
                        cand = grown
                    cand[c:need] = buf[estart[j]:estart[j] + elen[j]]
                    c = need
                    j = parent[j]
            else:
                if c + 1 > cand.size:
                    grown = np.empty(2 * cand.size, np.int64)
                    grown[:c] = cand[:c]
                    cand = grown
                cand[c] = lab[e] * nblk + block[v]
                c += 1
        run = cand[:c]
        run.sort()
        m = 0
        prev = -1
        for j in range(c):
            x = run[j]
            if j > 0 and x == prev:
                continue
            prev = x
            if base != -1 and _in_set(base, x, parent, estart, elen, buf):
                continue
            run[m] = x
            m += 1
        if m == 0 and base != -1:
            node_of[u] = base
            continue
        if used + m > cap:
            while used + m > cap:
                cap *= 2
            grown = np.empty(cap, np.int64)
            grown[:used] = buf[:used]
            buf = grown
        a1 = np.uint64(0)
        a2 = np.uint64(0)
        for j in range(m):
            buf[used + j] = run[j]
            a1 += _mix_nb(run[j], 0x9E3779B97F4A7C15)
            a2 += _mix_nb(run[j], 0x632BE59BD9B4E019)
        parent[nn] = base
        estart[nn] = used
        elen[nn] = m
        if base == -1:
            size[nn] = m
            h1[nn] = a1
            h2[nn] = a2
        else:
            size[nn] = size[base] + m
            h1[nn] = h1[base] + a1
            h2[nn] = h2[base] + a2
        node_of[u] = nn
        nn += 1
        used += m
    return node_of, parent[:nn], estart[:nn], elen[:nn], size[:nn], h1[:nn], h2[:nn], buf[:used]


@njit(cache=True)
def _subset_nb(xs, ys, parent, estart, elen, buf):
    # bad[i] is set when set xs[i] is not contained in set ys[i]
    stamp = np.full(parent.size, -1, np.int64)
    bad = np.zeros(xs.size, np.bool_)
    for i in range(xs.size):
        j = ys[i]
        while j != -1:
            stamp[j] = i
            j = parent[j]
        j = xs[i]
        while j != -1 and stamp[j] != i:
            for p in range(estart[j], estart[j] + elen[j]):
                if not _in_set(ys[i], buf[p], parent, estart, elen, buf):
                    bad[i] = True
                    break
            if bad[i]:
                break
            j = parent[j]
    return bad


# numpy counterpart of the persistent-set kernels.  The inert tau-graph is
# peeled into layers (states whose inert successors are all done) and every
# layer is handled with whole-array operations; parent chains are walked in
# lockstep.  Node extras are stored as codes ``node * width + key`` which
# stay globally sorted because nodes are appended in increasing order.


def _isin_sorted(x: np.ndarray, table: np.ndarray) -> np.ndarray:
    if not table.size:
        return np.zeros(x.size, dtype=bool)
    pos = np.minimum(np.searchsorted(table, x), table.size - 1)
    return table[pos] == x


def _chain_codes(owner, node, parent, nn):
    """Sorted ``owner * nn + a`` for every ancestor ``a`` of ``node`` (inclusive)."""
    out = []
    keep = node != -1
    o, j = owner[keep], node[keep]
    while j.size:
        out.append(o * nn + j)
        j = parent[j]
        keep = j != -1
        o, j = o[keep], j[keep]
    return np.unique(np.concatenate(out)) if out else np.zeros(0, np.int64)


def _walk_exts(owner, node, stop, parent, estart, elen, buf, nn):
    """Extras met walking up from ``node`` until a chain node listed in ``stop``."""
    os_, ks = [], []
    o, j = owner, node
    while True:
        keep = j != -1
        o, j = o[keep], j[keep]
        keep = ~_isin_sorted(o * nn + j, stop)
        o, j = o[keep], j[keep]
        if not j.size:
            break
        ln = elen[j]
        ks.append(buf[gather_ranges(estart[j], estart[j] + ln)])
        os_.append(np.repeat(o, ln))
        j = parent[j]
    if not ks:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(os_), np.concatenate(ks)


def _member(node, key, parent, codes, width):
    """Elementwise test ``key in set(node)``."""
    found = np.zeros(node.size, dtype=bool)
    idx = np.arange(node.size)
    j = node.copy()
    while idx.size:
        keep = j != -1
        idx, j = idx[keep], j[keep]
        hit = _isin_sorted(j * width + key[idx], codes)
        found[idx[hit]] = True
        idx, j = idx[~hit], parent[j[~hit]]
    return found


class _Buffer:
    def __init__(self):
        self.data = np.empty(1024, np.int64)
        self.used = 0

    def append(self, x: np.ndarray) -> None:
        need = self.used + x.size
        if need > self.data.size:
            grown = np.empty(max(need, 2 * self.data.size), np.int64)
            grown[:self.used] = self.data[:self.used]
            self.data = grown
        self.data[self.used:need] = x
        self.used = need

    def view(self) -> np.ndarray:
        return self.data[:self.used]


def _delta_sets_np(graph, block):
    k, nblk = graph.k, graph.k
    width = np.int64(graph.nlabels * k)
    src, lab, tgt = graph.src, graph.lab, graph.tgt
    inert = (lab == graph.tau) & (block[src] == block[tgt])
    isrc, itgt = src[inert], tgt[inert]
    vsrc = src[~inert]
    vkey = lab[~inert] * nblk + block[tgt[~inert]]
    states = np.arange(k + 1)
    iptr = np.searchsorted(isrc, states)
    vptr = np.searchsorted(vsrc, states)
    pptr, psrc = csr(k, itgt, isrc)
    outdeg = np.diff(iptr)

    node_of = np.full(k, -1, np.int64)
    parent = np.empty(k, np.int64)
    estart = np.empty(k, np.int64)
    elen = np.empty(k, np.int64)
    size = np.empty(k, np.int64)
    h1 = np.empty(k, np.uint64)
    h2 = np.empty(k, np.uint64)
    codes, keys = _Buffer(), _Buffer()
    nn = 0
    frontier = np.flatnonzero(outdeg == 0)
    while frontier.size:
        U = frontier
        m = U.size
        owners = np.arange(m, dtype=np.int64)
        # base: the largest set among inert successors
        eidx = gather_ranges(iptr[U], iptr[U + 1])
        eo = np.repeat(owners, np.diff(iptr)[U])
        ew = node_of[itgt[eidx]]
        base = np.full(m, -1, np.int64)
        if eidx.size:
            order = np.lexsort((size[ew], eo))
            last = order[np.r_[eo[order][1:] != eo[order][:-1], True]]
            base[eo[last]] = ew[last]
        stop = _chain_codes(owners, base, parent, np.int64(k))
        other = ew != base[eo]
        wo, wk = _walk_exts(eo[other], ew[other], stop, parent, estart, elen, keys.view(), np.int64(k))
        lidx = gather_ranges(vptr[U], vptr[U + 1])
        lo = np.repeat(owners, np.diff(vptr)[U])
        cand = np.unique(np.concatenate([lo * width + vkey[lidx], wo * width + wk]))
        co, ck = cand // width, cand % width
        has = base[co] != -1
        seen = np.zeros(cand.size, dtype=bool)
        seen[has] = _member(base[co[has]], ck[has], parent, codes.view(), width)
        co, ck = co[~seen], ck[~seen]
        count = np.bincount(co, minlength=m)
        fresh = (count > 0) | (base == -1)
        node_of[U[~fresh]] = base[~fresh]
        ids = np.full(m, -1, np.int64)
        nf = int(fresh.sum())
        ids[fresh] = nn + np.arange(nf)
        new = ids[fresh]
        par = base[fresh]
        parent[new] = par
        elen[new] = count[fresh]
        estart[new] = keys.used + np.cumsum(count[fresh]) - count[fresh]
        a1 = np.zeros(nf, np.uint64)
        a2 = np.zeros(nf, np.uint64)
        with np.errstate(over="ignore"):
            np.add.at(a1, ids[co] - nn, _mix(ck, 0x9E3779B97F4A7C15))
            np.add.at(a2, ids[co] - nn, _mix(ck, 0x632BE59BD9B4E019))
            rooted = par != -1
            a1[rooted] += h1[par[rooted]]
            a2[rooted] += h2[par[rooted]]
        h1[new], h2[new] = a1, a2
        size[new] = count[fresh] + np.where(rooted, size[np.maximum(par, 0)], 0)
        node_of[U[fresh]] = new
        codes.append(ids[co] * width + ck)
        keys.append(ck)
        nn += nf
        # peel the next layer
        preds = psrc[gather_ranges(pptr[U], pptr[U + 1])]
        np.subtract.at(outdeg, preds, 1)
        preds = np.unique(preds)
        frontier = preds[outdeg[preds] == 0]
    return (node_of, parent[:nn], estart[:nn], elen[:nn], size[:nn], h1[:nn], h2[:nn],
            keys.view().copy(), codes.view().copy(), width)


def _subset_np(xs, ys, parent, estart, elen, buf, codes, width):
    owners = np.arange(xs.size, dtype=np.int64)
    nn = np.int64(parent.size)
    stop = _chain_codes(owners, ys, parent, nn)
    o, key = _walk_exts(owners, xs, stop, parent, estart, elen, buf, nn)
    bad = np.zeros(xs.size, dtype=bool)
    bad[o[~_member(ys[o], key, parent, codes, width)]] = True
    return bad


def _materialize(node, parent, estart, elen, buf) -> tuple:
    out = []
    while node != -1:
        out.extend(buf[estart[node]:estart[node] + elen[node]].tolist())
        node = parent[node]
    return tuple(sorted(out))


def _group(block, size, h1, h2):
    k = block.size
    order = np.lexsort((h2, h1, size, block))
    boundary = np.zeros(k, dtype=bool)
    boundary[0] = True
    for col in (block, size, h1, h2):
        c = col[order]
        boundary[1:] |= c[1:] != c[:-1]
    gid_sorted = np.cumsum(boundary) - 1
    gid = np.empty(k, dtype=np.int64)
    gid[order] = gid_sorted
    rep = np.empty(k, dtype=np.int64)
    rep[order] = order[np.flatnonzero(boundary)][gid_sorted]
    return gid, rep, int(gid_sorted[-1]) + 1


def _refine_delta(graph, block):
    """One refinement round: group states by signature hash, then confirm exactly."""
    if _BACKEND == "numba":
        node_of, parent, estart, elen, size, h1, h2, buf = _delta_sets_nb(
            graph.k, graph.order(), graph.indptr, graph.lab, graph.tgt, block, graph.tau, graph.k
        )
    else:
        node_of, parent, estart, elen, size, h1, h2, buf, codes, width = _delta_sets_np(graph, block)
    gid, rep, ngroups = _group(block, size[node_of], h1[node_of], h2[node_of])
    nn = np.int64(parent.size)
    pair = np.unique(node_of * nn + node_of[rep])
    xs, ys = pair // nn, pair % nn
    differ = xs != ys
    xs, ys = xs[differ], ys[differ]
    if not xs.size:
        return gid, ngroups
    if _BACKEND == "numba":
        bad = _subset_nb(xs, ys, parent, estart, elen, buf)
    else:
        bad = _subset_np(xs, ys, parent, estart, elen, buf, codes, width)
    if bad.any():
        # exact resolution of 128-bit hash collisions; practically never taken
        suspect = np.unique(gid[np.isin(node_of, xs[bad])])
        for g in suspect:
            members = np.flatnonzero(gid == g)
            seen: dict[tuple, int] = {}
            for u in members:
                sig = _materialize(node_of[u], parent, estart, elen, buf)
                if sig not in seen:
                    seen[sig] = int(g) if not seen else ngroups + len(seen) - 1
                gid[u] = seen[sig]
            ngroups += len(seen) - 1
    return gid, ngroups


class SignatureGraph:
    """Edge arrays of a tau-acyclic LTS prepared for repeated signature rounds."""

    def __init__(self, k: int, src, lab, tgt, tau: int, nlabels: int):
        if k and nlabels * k * k >= 2**62:
            raise OverflowError("signature key space exceeds 64 bits")
        self.k = k
        self.tau = tau
        self.nlabels = nlabels
        src, lab, tgt = (np.asarray(x, np.int64) for x in (src, lab, tgt))
        # collapsing cycles can produce parallel copies of one edge
        code = np.unique((src * nlabels + lab) * k + tgt) if k else np.zeros(0, np.int64)
        src, lab, tgt = code // (nlabels * k or 1), code // (k or 1) % nlabels, code % (k or 1)
        self.indptr, self.lab, self.tgt = csr(k, src, lab, tgt)
        self.src = np.repeat(np.arange(k, dtype=np.int64), np.diff(self.indptr))
        self._order = None

    def order(self) -> np.ndarray:
        if self._order is None:
            self._order = _topo_successors_first_nb(self.k, self.indptr, self.lab, self.tgt, self.tau)
        return self._order

    def refine(self, block: np.ndarray) -> tuple[np.ndarray, int]:
        """Split ``block`` by branching signatures; returns new ids and count."""
        return _refine_delta(self, block)


def _mix(x: np.ndarray, seed: int) -> np.ndarray:
    # splitmix64 finaliser
    z = x.astype(np.uint64) + np.uint64(seed)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))
