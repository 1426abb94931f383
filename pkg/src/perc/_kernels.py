"""Numba kernels shared by the cluster, observable and arm modules.

Bits arrays hold one ``uint8`` per element.  The value ``UNKNOWN`` (255) marks
an element not drawn yet; :func:`get_bit` then draws it from the counter-based
generator described by ``rs = [master_seed, stream, threshold, always]`` and
records it in ``touched`` so the caller can reset only what was used.
Materialised configurations simply never contain ``UNKNOWN``.

Regions are passed as ``reg = [cx2, cy2, m, n, excluded_edge, exclude_inner]``
in doubled coordinates around a centre.  ``m < 0`` means a full box of radius
``n``; otherwise the annulus ``A(m, n)``, and ``exclude_inner`` drops the inner
ring nodes (used for arm exploration beyond the starting ring).
"""
from __future__ import annotations

import numba as nb
import numpy as np

from .rng import BERNOULLI_DOMAIN, philox4x64

UNKNOWN = np.uint8(255)
SOURCE = -2
SINK = -3


# ---------------------------------------------------------------------------
# union-find


@nb.njit(inline="always", cache=True)
def uf_find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@nb.njit(inline="always", cache=True)
def uf_union(parent, size, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra == rb:
        return False
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return True


@nb.njit(cache=True, nogil=True)
def components(count, eu, ev, edge_state, edge_want, node_state, node_want, merge_mask,
               parent, size, labels):
    """Label components; inactive nodes get -1.  Nodes flagged in ``merge_mask`` are fused."""
    for i in range(count):
        parent[i] = i
        size[i] = 1
    for e in range(eu.size):
        if edge_state[e] != edge_want:
            continue
        a = eu[e]
        b = ev[e]
        if node_state[a] != node_want or node_state[b] != node_want:
            continue
        uf_union(parent, size, a, b)
    first = -1
    for i in range(count):
        if merge_mask[i] and node_state[i] == node_want:
            if first < 0:
                first = i
            else:
                uf_union(parent, size, first, i)
    for i in range(count):
        labels[i] = -1
    nc = 0
    for i in range(count):
        if node_state[i] != node_want:
            continue
        r = uf_find(parent, i)
        if labels[r] == -1:
            labels[r] = nc
            nc += 1
        labels[i] = labels[r]
    return nc


@nb.njit(cache=True, nogil=True)
def count_bond_clusters(vertex_count, eu, ev, bits, parent, size):
    for i in range(vertex_count):
        parent[i] = i
        size[i] = 1
    merged = 0
    for e in range(eu.size):
        if bits[e] and uf_union(parent, size, eu[e], ev[e]):
            merged += 1
    return vertex_count - merged


@nb.njit(cache=True, nogil=True)
def count_site_clusters(vertex_count, eu, ev, bits, parent, size):
    occ = 0
    for i in range(vertex_count):
        parent[i] = i
        size[i] = 1
        occ += bits[i]
    merged = 0
    for e in range(eu.size):
        a = eu[e]
        b = ev[e]
        if bits[a] and bits[b] and uf_union(parent, size, a, b):
            merged += 1
    return occ - merged


# ---------------------------------------------------------------------------
# lazy bits and node/edge predicates


@nb.njit(cache=True, nogil=True)
def _draw_block(bits, e, rs, touched, nt):
    # one Philox call yields the words of four consecutive elements
    base = e - (e & 3)
    if rs[3] != 0:
        c0 = c1 = c2 = c3 = np.uint64(0)
    else:
        c0, c1, c2, c3 = philox4x64(np.uint64(base >> 2), rs[1], np.uint64(0), np.uint64(0),
                                    rs[0], np.uint64(BERNOULLI_DOMAIN))
    for i in range(4):
        idx = base + i
        if idx >= bits.size or bits[idx] != UNKNOWN:
            continue
        if i == 0:
            w = c0
        elif i == 1:
            w = c1
        elif i == 2:
            w = c2
        else:
            w = c3
        bits[idx] = 1 if (rs[3] != 0 or w < rs[2]) else 0
        touched[nt[0]] = idx
        nt[0] += 1


@nb.njit(inline="always", cache=True)
def get_bit(bits, e, rs, touched, nt):
    b = bits[e]
    if b == UNKNOWN:
        _draw_block(bits, e, rs, touched, nt)
        b = bits[e]
    return b


@nb.njit(cache=True, nogil=True)
def reset_bits(bits, touched, nt):
    for i in range(nt[0]):
        bits[touched[i]] = UNKNOWN
    nt[0] = 0


@nb.njit(inline="always", cache=True)
def node_color(v, node_elem, node_fixed, bits, rs, touched, nt):
    e = node_elem[v]
    if e < 0:
        return node_fixed[v]
    return get_bit(bits, e, rs, touched, nt)


@nb.njit(inline="always", cache=True)
def edge_open(kind, edge, cu, cw, bits, rs, touched, nt):
    if kind == 0:
        return cu == cw
    b = get_bit(bits, edge, rs, touched, nt)
    if kind == 1:
        return b == 1
    return b == 0


@nb.njit(inline="always", cache=True)
def node_r2(v, x2, y2, reg):
    return max(abs(x2[v] - reg[0]), abs(y2[v] - reg[1]))


@nb.njit(inline="always", cache=True)
def node_in_region(v, x2, y2, dual, reg):
    r2 = node_r2(v, x2, y2, reg)
    m = reg[2]
    n = reg[3]
    if dual[v]:
        if r2 > 2 * n + 1:
            return False
        if m >= 0:
            lo = 2 * m - 1 + 2 * reg[5]
            if r2 < lo:
                return False
        return True
    if r2 > 2 * n:
        return False
    if m >= 0:
        lo = 2 * m + 2 * reg[5]
        if r2 < lo:
            return False
    return True


@nb.njit(inline="always", cache=True)
def node_is_outer(v, x2, y2, dual, reg):
    r2 = node_r2(v, x2, y2, reg)
    if dual[v]:
        return r2 == 2 * reg[3] + 1
    return r2 == 2 * reg[3]


@nb.njit(inline="always", cache=True)
def edge_in_region(edge, kind, x2, y2, eu, ev, reg):
    """Bond edges (kinds 1, 2) need both primal endpoints in the region; kind 0 is decided by its nodes."""
    if kind == 0:
        return True
    if edge == reg[4]:
        return False
    r1 = node_r2(eu[edge], x2, y2, reg)
    r2 = node_r2(ev[edge], x2, y2, reg)
    n2 = 2 * reg[3]
    if r1 > n2 or r2 > n2:
        return False
    if reg[2] >= 0:
        m2 = 2 * reg[2]
        if r1 < m2 or r2 < m2:
            return False
    return True


# ---------------------------------------------------------------------------
# breadth-first searches


@nb.njit(cache=True, nogil=True)
def reach_outer(start, want, reg, node_elem, node_fixed, dual, x2, y2, adj_start, adj_node,
                adj_edge, adj_kind, eu, ev, bits, rs, touched, nt, stamp, ep, queue):
    """Does ``start`` (of colour ``want``) connect to the outer ring of the region?"""
    if not node_in_region(start, x2, y2, dual, reg):
        return False
    if node_color(start, node_elem, node_fixed, bits, rs, touched, nt) != want:
        return False
    head = 0
    tail = 0
    queue[tail] = start
    tail += 1
    stamp[start] = ep
    while head < tail:
        v = queue[head]
        head += 1
        if node_is_outer(v, x2, y2, dual, reg):
            return True
        for j in range(adj_start[v], adj_start[v + 1]):
            w = adj_node[j]
            if stamp[w] == ep:
                continue
            kind = adj_kind[j]
            edge = adj_edge[j]
            if not node_in_region(w, x2, y2, dual, reg):
                continue
            if not edge_in_region(edge, kind, x2, y2, eu, ev, reg):
                continue
            cw = node_color(w, node_elem, node_fixed, bits, rs, touched, nt)
            if cw != want:
                continue
            if not edge_open(kind, edge, want, cw, bits, rs, touched, nt):
                continue
            stamp[w] = ep
            queue[tail] = w
            tail += 1
    return False


@nb.njit(cache=True, nogil=True)
def masked_reach(start_mask, target_mask, node_mask, edge_mask, want, node_elem, node_fixed,
                 adj_start, adj_node, adj_edge, adj_kind, bits, rs, touched, nt, stamp, ep, queue):
    """Multi-source search from ``start_mask`` to ``target_mask`` through nodes of colour ``want``."""
    tail = 0
    for v in range(start_mask.size):
        if start_mask[v] and node_mask[v]:
            if node_color(v, node_elem, node_fixed, bits, rs, touched, nt) == want:
                if target_mask[v]:
                    return True
                stamp[v] = ep
                queue[tail] = v
                tail += 1
    head = 0
    while head < tail:
        v = queue[head]
        head += 1
        for j in range(adj_start[v], adj_start[v + 1]):
            w = adj_node[j]
            if stamp[w] == ep or not node_mask[w]:
                continue
            edge = adj_edge[j]
            if not edge_mask[edge]:
                continue
            cw = node_color(w, node_elem, node_fixed, bits, rs, touched, nt)
            if cw != want:
                continue
            if not edge_open(adj_kind[j], edge, want, cw, bits, rs, touched, nt):
                continue
            if target_mask[w]:
                return True
            stamp[w] = ep
            queue[tail] = w
            tail += 1
    return False


@nb.njit(cache=True, nogil=True)
def explore_cluster(start, radius_limit, stop_at_limit, node_elem, node_fixed, x2, y2, adj_start,
                    adj_node, adj_edge, adj_kind, bits, rs, touched, nt, stamp, ep, queue):
    """Occupied cluster of a primal node inside ``B(radius_limit)``.

    Returns ``(size, max_radius)``; ``max_radius = -1`` when the start site is vacant.
    With ``stop_at_limit`` the search ends as soon as the limit ring is reached.
    """
    if node_color(start, node_elem, node_fixed, bits, rs, touched, nt) != 1:
        return 0, -1
    lim2 = 2 * radius_limit
    head = 0
    tail = 0
    queue[tail] = start
    tail += 1
    stamp[start] = ep
    rmax2 = max(abs(x2[start]), abs(y2[start]))
    if stop_at_limit and rmax2 >= lim2:
        return 1, rmax2 // 2
    while head < tail:
        v = queue[head]
        head += 1
        for j in range(adj_start[v], adj_start[v + 1]):
            kind = adj_kind[j]
            if kind == 2:
                continue
            w = adj_node[j]
            if stamp[w] == ep:
                continue
            r2 = max(abs(x2[w]), abs(y2[w]))
            if r2 > lim2:
                continue
            cw = node_color(w, node_elem, node_fixed, bits, rs, touched, nt)
            if cw != 1:
                continue
            if not edge_open(kind, adj_edge[j], 1, cw, bits, rs, touched, nt):
                continue
            stamp[w] = ep
            queue[tail] = w
            tail += 1
            if r2 > rmax2:
                rmax2 = r2
                if stop_at_limit and rmax2 >= lim2:
                    return tail, rmax2 // 2
    return tail, rmax2 // 2


# ---------------------------------------------------------------------------
# node-disjoint paths (unit capacities on nodes)


@nb.njit(cache=True, nogil=True)
def max_disjoint_paths(sources, limit, use, tag, reg, node_elem, node_fixed, dual, x2, y2,
                       adj_start, adj_node, adj_edge, adj_kind, eu, ev, bits, rs, touched, nt,
                       fnext, fprev, fstamp, fep, par, pstamp, ctr, queue):
    """Maximum number (capped at ``limit``) of node-disjoint open paths from ``sources`` to outer nodes.

    Usable nodes are those with ``use[v] == tag``; outer nodes of the region are sinks.
    Flow state lives in ``fnext``/``fprev`` (valid where ``fstamp == fep``).
    """
    flow = 0
    while flow < limit:
        ctr[3] += 1
        pep = ctr[3]
        tail = 0
        for i in range(sources.size):
            s = sources[i]
            used = fstamp[s] == fep and fprev[s] != -1
            if not used:
                st = 2 * s
                if pstamp[st] != pep:
                    pstamp[st] = pep
                    par[st] = SOURCE
                    queue[tail] = st
                    tail += 1
        head = 0
        found = -1
        while head < tail and found < 0:
            st = queue[head]
            head += 1
            v = st >> 1
            vin = fstamp[v] == fep
            vprev = fprev[v] if vin else -1
            vnext = fnext[v] if vin else -1
            if (st & 1) == 0:
                if vprev == -1:
                    nxt = st + 1
                    if pstamp[nxt] != pep:
                        pstamp[nxt] = pep
                        par[nxt] = st
                        queue[tail] = nxt
                        tail += 1
                elif vprev >= 0:
                    nxt = 2 * vprev + 1
                    if pstamp[nxt] != pep:
                        pstamp[nxt] = pep
                        par[nxt] = st
                        queue[tail] = nxt
                        tail += 1
            else:
                if vnext != SINK and node_is_outer(v, x2, y2, dual, reg):
                    found = st
                    break
                if vprev != -1:
                    nxt = st - 1
                    if pstamp[nxt] != pep:
                        pstamp[nxt] = pep
                        par[nxt] = st
                        queue[tail] = nxt
                        tail += 1
                cv = node_color(v, node_elem, node_fixed, bits, rs, touched, nt)
                for j in range(adj_start[v], adj_start[v + 1]):
                    w = adj_node[j]
                    if use[w] != tag or w == vnext or w == vprev:
                        continue
                    nxt = 2 * w
                    if pstamp[nxt] == pep:
                        continue
                    kind = adj_kind[j]
                    edge = adj_edge[j]
                    if not edge_in_region(edge, kind, x2, y2, eu, ev, reg):
                        continue
                    cw = node_color(w, node_elem, node_fixed, bits, rs, touched, nt)
                    if cw != cv or not edge_open(kind, edge, cv, cw, bits, rs, touched, nt):
                        continue
                    pstamp[nxt] = pep
                    par[nxt] = st
                    queue[tail] = nxt
                    tail += 1
        if found < 0:
            break
        # augment along the parent chain
        v = found >> 1
        if fstamp[v] != fep:
            fstamp[v] = fep
            fnext[v] = -1
            fprev[v] = -1
        fnext[v] = SINK
        cur = found
        while par[cur] != SOURCE:
            prev = par[cur]
            a = prev >> 1
            b = cur >> 1
            for z in (a, b):
                if fstamp[z] != fep:
                    fstamp[z] = fep
                    fnext[z] = -1
                    fprev[z] = -1
            if a != b:
                if (prev & 1) == 1 and (cur & 1) == 0:
                    fnext[a] = b
                    fprev[b] = a
                else:
                    # prev = (a, in), cur = (b, out): cancel flow b -> a
                    if fnext[b] == a:
                        fnext[b] = -1
                    if fprev[a] == b:
                        fprev[a] = -1
            cur = prev
        s = cur >> 1
        if fstamp[s] != fep:
            fstamp[s] = fep
            fnext[s] = -1
        fprev[s] = SOURCE
        flow += 1
    return flow


# ---------------------------------------------------------------------------
# edge-centred arm events (square-bond)


@nb.njit(cache=True, nogil=True)
def edge_arm_event(e, n, three, primal_count, dual_u, dual_w, node_elem, node_fixed, dual, x2, y2,
                   adj_start, adj_node, adj_edge, adj_kind, eu, ev, bits, rs, touched, nt,
                   stamp, use, fnext, fprev, fstamp, par, pstamp, ctr, queue):
    """Four-arm (or three-arm) event around bond ``e`` inside ``v1(e) + B(n)`` with ``e`` and ``e*`` removed.

    Four-arm: both endpoints of ``e`` reach the boundary by occupied paths and both
    endpoints of ``e*`` reach the dual boundary by vacant paths.  Three-arm: ``v1``
    reaches by an occupied path and the two dual endpoints by disjoint vacant paths.
    """
    v1 = eu[e]
    v2 = ev[e]
    reg = np.empty(6, dtype=np.int64)
    reg[0] = x2[v1]
    reg[1] = y2[v1]
    reg[2] = -1
    reg[3] = n
    reg[4] = e
    reg[5] = 0
    a = primal_count + dual_u[e]
    b = primal_count + dual_w[e]
    ctr[0] += 1
    if not reach_outer(v1, 1, reg, node_elem, node_fixed, dual, x2, y2, adj_start, adj_node,
                       adj_edge, adj_kind, eu, ev, bits, rs, touched, nt, stamp, ctr[0], queue):
        return False
    if not three:
        ctr[0] += 1
        if not reach_outer(v2, 1, reg, node_elem, node_fixed, dual, x2, y2, adj_start, adj_node,
                           adj_edge, adj_kind, eu, ev, bits, rs, touched, nt, stamp, ctr[0], queue):
            return False
    ctr[0] += 1
    if not reach_outer(a, 0, reg, node_elem, node_fixed, dual, x2, y2, adj_start, adj_node,
                       adj_edge, adj_kind, eu, ev, bits, rs, touched, nt, stamp, ctr[0], queue):
        return False
    ctr[0] += 1
    ep_b = ctr[0]
    if not reach_outer(b, 0, reg, node_elem, node_fixed, dual, x2, y2, adj_start, adj_node,
                       adj_edge, adj_kind, eu, ev, bits, rs, touched, nt, stamp, ep_b, queue):
        return False
    if not three:
        return True
    # the search from b stopped early; redo it completely to mark the vacant cluster of b
    ctr[1] += 1
    tag = ctr[1]
    head = 0
    tail = 0
    queue[tail] = b
    tail += 1
    use[b] = tag
    while head < tail:
        v = queue[head]
        head += 1
        for j in range(adj_start[v], adj_start[v + 1]):
            w = adj_node[j]
            if use[w] == tag or not dual[w]:
                continue
            if not node_in_region(w, x2, y2, dual, reg):
                continue
            if not edge_in_region(adj_edge[j], adj_kind[j], x2, y2, eu, ev, reg):
                continue
            if not edge_open(adj_kind[j], adj_edge[j], 0, 0, bits, rs, touched, nt):
                continue
            use[w] = tag
            queue[tail] = w
            tail += 1
    if use[a] != tag:
        return True
    ctr[2] += 1
    srcs = np.empty(2, dtype=np.int64)
    srcs[0] = a
    srcs[1] = b
    flow = max_disjoint_paths(srcs, 2, use, tag, reg, node_elem, node_fixed, dual, x2, y2,
                              adj_start, adj_node, adj_edge, adj_kind, eu, ev, bits, rs, touched, nt,
                              fnext, fprev, fstamp, ctr[2], par, pstamp, ctr, queue)
    return flow >= 2


# ---------------------------------------------------------------------------
# annulus arm events


@nb.njit(cache=True, nogil=True)
def _feasible(seq, k, unit_color, caps, n_units):
    """Can the cyclic colour word ``seq`` be placed, in order, into the cyclic list of units?"""
    for rot in range(k):
        for u0 in range(n_units):
            j = 0
            cur = u0
            rem = caps[cur]
            ok = True
            for i in range(k):
                c = seq[(rot + i) % k]
                while unit_color[cur] != c or rem == 0:
                    j += 1
                    if j >= n_units:
                        ok = False
                        break
                    cur = (u0 + j) % n_units
                    rem = caps[cur]
                if not ok:
                    break
                rem -= 1
            if ok:
                return True
    return False


@nb.njit(cache=True, nogil=True)
def annulus_arms(reg, seqs, seq_len, out, att_src, att_dst, att_edge, att_kind,
                 node_elem, node_fixed, dual, x2, y2, adj_start, adj_node, adj_edge, adj_kind,
                 eu, ev, bits, rs, touched, nt, comp, cstamp, use, mark, order,
                 fnext, fprev, fstamp, par, pstamp, ctr, queue):
    """Evaluate several cyclic colour words on the annulus ``reg`` (``reg[5]`` must be 1).

    Components of the annulus without its inner ring are explored from the
    attachment edges (sorted by angle).  Components reaching the outer ring are
    listed in angular order, consecutive ones of equal colour merged into units,
    and a word is feasible when it can be placed greedily into the cyclic list
    of units; unit capacities come from node-disjoint path counts when needed.
    """
    n_att = att_src.size
    ctr[0] += 1
    ep = ctr[0]
    att_comp = np.full(n_att, -1, dtype=np.int64)
    comp_color = np.zeros(n_att, dtype=np.int64)
    comp_cross = np.zeros(n_att, dtype=np.uint8)
    comp_lo = np.zeros(n_att, dtype=np.int64)
    comp_hi = np.zeros(n_att, dtype=np.int64)
    ncomp = 0
    pos = 0
    for a in range(n_att):
        s = att_src[a]
        u = att_dst[a]
        if not node_in_region(u, x2, y2, dual, reg):
            continue
        cs = node_color(s, node_elem, node_fixed, bits, rs, touched, nt)
        cu = node_color(u, node_elem, node_fixed, bits, rs, touched, nt)
        if cs != cu or not edge_open(att_kind[a], att_edge[a], cs, cu, bits, rs, touched, nt):
            continue
        if cstamp[u] != ep:
            K = ncomp
            ncomp += 1
            comp_color[K] = cu
            comp_lo[K] = pos
            cstamp[u] = ep
            comp[u] = K
            order[pos] = u
            pos += 1
            head = comp_lo[K]
            crossing = False
            while head < pos:
                v = order[head]
                head += 1
                if not crossing and node_is_outer(v, x2, y2, dual, reg):
                    crossing = True
                for j in range(adj_start[v], adj_start[v + 1]):
                    w = adj_node[j]
                    if cstamp[w] == ep:
                        continue
                    if not node_in_region(w, x2, y2, dual, reg):
                        continue
                    kind = adj_kind[j]
                    if not edge_in_region(adj_edge[j], kind, x2, y2, eu, ev, reg):
                        continue
                    cw = node_color(w, node_elem, node_fixed, bits, rs, touched, nt)
                    if cw != cu or not edge_open(kind, adj_edge[j], cu, cw, bits, rs, touched, nt):
                        continue
                    cstamp[w] = ep
                    comp[w] = K
                    order[pos] = w
                    pos += 1
            comp_hi[K] = pos
            comp_cross[K] = crossing
        att_comp[a] = comp[u]

    # crossing components in angular order of first attachment
    listed = np.zeros(max(ncomp, 1), dtype=np.uint8)
    cross_list = np.empty(max(ncomp, 1), dtype=np.int64)
    t = 0
    for a in range(n_att):
        K = att_comp[a]
        if K >= 0 and comp_cross[K] and not listed[K]:
            listed[K] = 1
            cross_list[t] = K
            t += 1
    if t == 0:
        for i in range(seqs.shape[0]):
            out[i] = 0
        return

    # merge cyclically consecutive equal colours into units
    unit_of = np.full(max(ncomp, 1), -1, dtype=np.int64)
    unit_color = np.zeros(t, dtype=np.int64)
    i0 = -1
    for i in range(t):
        if comp_color[cross_list[i]] != comp_color[cross_list[(i - 1 + t) % t]]:
            i0 = i
            break
    n_units = 0
    if i0 < 0:
        n_units = 1
        unit_color[0] = comp_color[cross_list[0]]
        for i in range(t):
            unit_of[cross_list[i]] = 0
    else:
        for step in range(t):
            K = cross_list[(i0 + step) % t]
            if step == 0 or comp_color[K] != unit_color[n_units - 1]:
                unit_color[n_units] = comp_color[K]
                n_units += 1
            unit_of[K] = n_units - 1

    # upper bounds: distinct ring nodes attached to each unit; a ring node attached to two
    # units (a dual corner on the bond lattice) can serve only one of them
    ub = np.zeros(n_units, dtype=np.int64)
    sh_node = np.empty(8, dtype=np.int64)
    sh_u1 = np.empty(8, dtype=np.int64)
    sh_u2 = np.empty(8, dtype=np.int64)
    nsh = 0
    for a in range(n_att):
        K = att_comp[a]
        if K < 0 or unit_of[K] < 0:
            continue
        U = unit_of[K]
        key = ep * 4096 + U
        s = att_src[a]
        if mark[s] != key:
            mark[s] = key
            ub[U] += 1
        if cstamp[s] != -ep:
            cstamp[s] = -ep
            comp[s] = U
        elif comp[s] >= 0 and comp[s] != U and nsh < 8:
            sh_node[nsh] = s
            sh_u1[nsh] = comp[s]
            sh_u2[nsh] = U
            comp[s] = -1
            nsh += 1
    kmax = 0
    for i in range(seqs.shape[0]):
        if seq_len[i] > kmax:
            kmax = seq_len[i]
    exact = np.full(n_units, -1, dtype=np.int64)
    caps = np.empty(n_units, dtype=np.int64)
    ubm = np.empty(n_units, dtype=np.int64)
    lo = np.empty(n_units, dtype=np.int64)
    drop = np.full(8, -1, dtype=np.int64)

    for i in range(seqs.shape[0]):
        k = seq_len[i]
        seq = seqs[i]
        out[i] = 0
        if not _feasible(seq, k, unit_color, ub, n_units):
            continue
        for assign in range(1 << nsh):
            for U in range(n_units):
                ubm[U] = ub[U]
            for j in range(nsh):
                loser = sh_u2[j] if (assign >> j) & 1 == 0 else sh_u1[j]
                drop[j] = loser
                ubm[loser] -= 1
            if not _feasible(seq, k, unit_color, ubm, n_units):
                continue
            for U in range(n_units):
                lo[U] = 1 if ubm[U] > 0 else 0
            if _feasible(seq, k, unit_color, lo, n_units):
                out[i] = 1
                break
            for U in range(n_units):
                if ubm[U] <= 1:
                    caps[U] = ubm[U]
                    continue
                touched_unit = False
                for j in range(nsh):
                    if drop[j] == U:
                        touched_unit = True
                if not touched_unit and exact[U] >= 0:
                    caps[U] = exact[U]
                    continue
                ctr[1] += 1
                tag = ctr[1]
                for K in range(ncomp):
                    if unit_of[K] == U:
                        for q in range(comp_lo[K], comp_hi[K]):
                            use[order[q]] = tag
                nsrc = 0
                srcs = np.empty(n_att, dtype=np.int64)
                for a in range(n_att):
                    K = att_comp[a]
                    if K >= 0 and unit_of[K] == U:
                        s = att_src[a]
                        skip = False
                        for j in range(nsh):
                            if drop[j] == U and sh_node[j] == s:
                                skip = True
                        if not skip and use[s] != tag:
                            use[s] = tag
                            srcs[nsrc] = s
                            nsrc += 1
                ctr[2] += 1
                reg_flow = reg.copy()
                reg_flow[5] = 0
                f = max_disjoint_paths(srcs[:nsrc], kmax, use, tag, reg_flow, node_elem,
                                       node_fixed, dual, x2, y2, adj_start, adj_node,
                                       adj_edge, adj_kind, eu, ev, bits, rs, touched, nt,
                                       fnext, fprev, fstamp, ctr[2], par, pstamp, ctr, queue)
                if not touched_unit:
                    exact[U] = f
                caps[U] = f
            if _feasible(seq, k, unit_color, caps, n_units):
                out[i] = 1
                break


# ---------------------------------------------------------------------------
# per-thread scratch space


class Workspace:
    """Scratch arrays for the search kernels; one per worker, never shared."""

    def __init__(self, ng, element_count: int, flow: bool = True):
        count = ng.node_count
        self.bits = np.full(element_count, UNKNOWN, dtype=np.uint8)
        self.touched = np.empty(element_count, dtype=np.int64)
        self.nt = np.zeros(1, dtype=np.int64)
        self.stamp = np.zeros(count, dtype=np.int64)
        self.queue = np.empty(2 * count if flow else count, dtype=np.int64)
        self.ctr = np.zeros(4, dtype=np.int64)
        self.rs = np.zeros(4, dtype=np.uint64)
        size = count if flow else 1
        self.use = np.zeros(size, dtype=np.int64)
        self.mark = np.zeros(size, dtype=np.int64)
        self.comp = np.zeros(size, dtype=np.int64)
        self.cstamp = np.zeros(size, dtype=np.int64)
        self.order = np.empty(size, dtype=np.int64)
        self.fnext = np.zeros(size, dtype=np.int64)
        self.fprev = np.zeros(size, dtype=np.int64)
        self.fstamp = np.zeros(size, dtype=np.int64)
        self.par = np.zeros(2 * size, dtype=np.int64)
        self.pstamp = np.zeros(2 * size, dtype=np.int64)

    def set_stream(self, master_seed: int, stream: int, threshold, always: bool):
        self.rs[0] = np.uint64(master_seed)
        self.rs[1] = np.uint64(stream)
        self.rs[2] = np.uint64(threshold)
        self.rs[3] = np.uint64(1 if always else 0)

    def load(self, occupied: np.ndarray):
        """Use a materialised configuration instead of lazy draws."""
        self.bits[:] = occupied
        self.nt[0] = 0
