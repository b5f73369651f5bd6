"""Compiled inner loops shared by the tree samplers and the parking pass.

Every kernel is a pure function of its array arguments; randomness is drawn
outside (numpy Generators) and fed in as plain integer buffers, which keeps
replicate streams reproducible and lets the same draws be re-parsed under
different caps.  Trees travel through these kernels as depth-first (preorder)
child-count sequences: a sequence d_0, d_1, ... encodes one tree per excursion,
the excursion ending at the first position where sum(d_i - 1) reaches -1.
"""

import numpy as np
from numba import njit

NO_DEPTH_LIMIT = np.int64(2**62)


@njit(cache=True, nogil=True)
def flux_stream(degs, labels, want, cap, max_depth, rem_stack, acc_stack,
                out_flux, out_size, out_occ, out_over, done):
    """Parse up to `want` trees from the draw buffers and park each one.

    degs / labels are consumed in lockstep, one label per vertex; vertices at
    depth == max_depth are forced leaves and consume no offspring draw.  A tree
    whose vertex count would exceed `cap` is abandoned in place (out_over set,
    out_flux -1).  Returns (trees_done, degs_used, labels_used); parsing stops
    early when a tree cannot be finished inside the buffers, in which case the
    partial tree's draws are left unconsumed for the caller to retry.
    """
    dpos = np.int64(0)
    lpos = np.int64(0)
    nd = degs.shape[0]
    nl = labels.shape[0]
    t = done
    while t < want:
        d0 = dpos
        l0 = lpos
        sp = np.int64(0)
        vcount = np.int64(0)
        root_flux = np.int64(-1)
        root_occ = False
        overflow = False
        starved = False
        # open the root
        if lpos >= nl or (max_depth > 0 and dpos >= nd):
            return t, d0, l0
        lab = labels[lpos]
        lpos += 1
        if max_depth == 0:
            deg = np.int64(0)
        else:
            deg = degs[dpos]
            dpos += 1
        vcount = np.int64(1)
        rem_stack[0] = deg
        acc_stack[0] = lab
        sp = 1
        while sp > 0:
            if rem_stack[sp - 1] == 0:
                f = acc_stack[sp - 1]
                sp -= 1
                if f >= 1:
                    out = f - 1
                    occ = True
                else:
                    out = np.int64(0)
                    occ = False
                if sp == 0:
                    root_flux = out
                    root_occ = occ
                else:
                    acc_stack[sp - 1] += out
            else:
                rem_stack[sp - 1] -= 1
                if vcount >= cap:
                    overflow = True
                    break
                if lpos >= nl or (sp < max_depth and dpos >= nd):
                    starved = True
                    break
                lab = labels[lpos]
                lpos += 1
                if sp >= max_depth:
                    deg = np.int64(0)
                else:
                    deg = degs[dpos]
                    dpos += 1
                vcount += 1
                rem_stack[sp] = deg
                acc_stack[sp] = lab
                sp += 1
        if starved:
            return t, d0, l0
        if overflow:
            out_flux[t] = -1
            out_size[t] = vcount
            out_occ[t] = 0
            out_over[t] = 1
        else:
            out_flux[t] = root_flux
            out_size[t] = vcount
            out_occ[t] = 1 if root_occ else 0
            out_over[t] = 0
        t += 1
    return t, dpos, lpos


@njit(cache=True, nogil=True)
def sizes_stream(degs, want, cap, out_size, out_over, done):
    """Excursion lengths only: per-tree vertex counts from a draw buffer.

    Same consumption contract as flux_stream but without labels or stacks.
    """
    pos = np.int64(0)
    nd = degs.shape[0]
    t = done
    while t < want:
        p0 = pos
        s = np.int64(0)
        n = np.int64(0)
        overflow = False
        starved = False
        while True:
            if n >= cap:
                overflow = True
                break
            if pos >= nd:
                starved = True
                break
            s += degs[pos] - 1
            pos += 1
            n += 1
            if s < 0:
                break
        if starved:
            return t, p0
        out_size[t] = n
        out_over[t] = 1 if overflow else 0
        t += 1
    return t, pos


@njit(cache=True, nogil=True)
def collect_degrees_stream(degs, want, budget, max_depth, stack, out_degs,
                           out_size, done, out_pos0):
    """Like sizes_stream but also emits each tree's (depth-censored) preorder
    child counts, packed consecutively into out_degs starting at out_pos0.

    `budget` bounds the combined vertex count of all trees emitted by this
    call (a shared cap across grafts); `stack` is caller-provided workspace of
    at least budget+2 int64.  Returns (trees_done, degs_used, out_pos,
    overflowed) where overflowed means the shared budget ran out mid-parse.
    """
    dpos = np.int64(0)
    nd = degs.shape[0]
    opos = out_pos0
    t = done
    while t < want:
        d0 = dpos
        o0 = opos
        sp = np.int64(0)
        vcount = np.int64(0)
        starved = False
        overflow = False
        if max_depth > 0 and dpos >= nd:
            return t, d0, o0, False
        if opos >= budget:
            return t, d0, o0, True
        if max_depth == 0:
            deg = np.int64(0)
        else:
            deg = degs[dpos]
            dpos += 1
        out_degs[opos] = deg
        opos += 1
        vcount = np.int64(1)
        stack[0] = deg
        sp = 1
        while sp > 0:
            if stack[sp - 1] == 0:
                sp -= 1
            else:
                stack[sp - 1] -= 1
                if opos >= budget:
                    overflow = True
                    break
                if sp < max_depth and dpos >= nd:
                    starved = True
                    break
                if sp >= max_depth:
                    deg = np.int64(0)
                else:
                    deg = degs[dpos]
                    dpos += 1
                out_degs[opos] = deg
                opos += 1
                vcount += 1
                stack[sp] = deg
                sp += 1
        if starved:
            return t, d0, o0, False
        if overflow:
            return t, d0, o0, True
        out_size[t] = vcount
        t += 1
    return t, dpos, opos, False


@njit(cache=True, nogil=True)
def top_shape_count_stream(degs, want, cap, h0, k, open_vc, out_count,
                           out_size, out_over, done):
    """Per tree, count vertices sitting at depth h0 whose descendant subtree
    (vertex included) has exactly k vertices.  Consumption as sizes_stream.
    """
    dpos = np.int64(0)
    nd = degs.shape[0]
    t = done
    while t < want:
        d0 = dpos
        sp = np.int64(0)
        vcount = np.int64(0)
        count = np.int64(0)
        overflow = False
        starved = False
        if dpos >= nd:
            return t, d0
        deg = degs[dpos]
        dpos += 1
        vcount = np.int64(1)
        # reuse open_vc as two interleaved stacks: remaining children and
        # the vertex count at open time
        open_vc[0] = deg
        open_vc[1] = vcount
        sp = 1
        while sp > 0:
            if open_vc[2 * (sp - 1)] == 0:
                sz = vcount - open_vc[2 * (sp - 1) + 1] + 1
                sp -= 1
                if sp == h0 and sz == k:
                    count += 1
            else:
                open_vc[2 * (sp - 1)] -= 1
                if vcount >= cap:
                    overflow = True
                    break
                if dpos >= nd:
                    starved = True
                    break
                deg = degs[dpos]
                dpos += 1
                vcount += 1
                open_vc[2 * sp] = deg
                open_vc[2 * sp + 1] = vcount
                sp += 1
        if starved:
            return t, d0
        out_size[t] = vcount
        if overflow:
            out_count[t] = -1
            out_over[t] = 1
        else:
            out_count[t] = count
            out_over[t] = 0
        t += 1
    return t, dpos


@njit(cache=True, nogil=True)
def parents_from_degrees(degs, offset, root_parent, out_parent):
    """Parent indices for a preorder child-count sequence.

    Vertex i of the sequence becomes node offset+i; the root's parent is
    root_parent (-1 for a free-standing tree).
    """
    n = degs.shape[0]
    stack = np.empty(n + 1, dtype=np.int64)
    out_parent[offset] = root_parent
    stack[0] = degs[0]
    own = np.empty(n + 1, dtype=np.int64)
    own[0] = offset
    sp = 1
    v = np.int64(1)
    while sp > 0:
        if stack[sp - 1] == 0:
            sp -= 1
        else:
            stack[sp - 1] -= 1
            out_parent[offset + v] = own[sp - 1]
            stack[sp] = degs[v]
            own[sp] = offset + v
            sp += 1
            v += 1
    return v


@njit(cache=True, nogil=True)
def parents_from_packed_degrees(degs_packed, sizes, root_parents, offset0,
                                out_parent):
    """Parent arrays for a batch of preorder trees packed back to back.

    Tree g occupies nodes [offset0 + cum_sizes[g], ...); its root is attached
    to root_parents[g].
    """
    pos = np.int64(0)
    offset = offset0
    for g in range(sizes.shape[0]):
        n = sizes[g]
        parents_from_degrees(degs_packed[pos:pos + n], offset, root_parents[g],
                             out_parent)
        pos += n
        offset += n
    return offset


@njit(cache=True, nogil=True)
def park_pass(parent, counts, order):
    """One bottom-up parking sweep.

    `order` must list every node, parents before children.  Returns
    (flux, occupied uint8 array, edge_flux array); edge_flux[v] is the car
    count crossing the edge from v to its parent, and at the root it is the
    outgoing flux itself.
    """
    n = parent.shape[0]
    acc = counts.copy()
    occupied = np.zeros(n, dtype=np.uint8)
    edge_flux = np.zeros(n, dtype=np.int64)
    flux = np.int64(0)
    for i in range(n - 1, -1, -1):
        v = order[i]
        tot = acc[v]
        if tot >= 1:
            occupied[v] = 1
            out = tot - 1
        else:
            out = np.int64(0)
        edge_flux[v] = out
        p = parent[v]
        if p < 0:
            flux = out
        else:
            acc[p] += out
    return flux, occupied, edge_flux


@njit(cache=True, nogil=True)
def reachable_sums(gens, smax):
    """Unbounded-knapsack reachability of every s in [0, smax] using the
    generator set `gens` (positive integers)."""
    reach = np.zeros(smax + 1, dtype=np.uint8)
    reach[0] = 1
    for j in range(gens.shape[0]):
        a = gens[j]
        for s in range(a, smax + 1):
            if reach[s - a]:
                reach[s] = 1
    return reach


def warm_up():
    """Trigger compilation of every kernel on tiny inputs (idempotent)."""
    degs = np.array([2, 0, 0], dtype=np.int64)
    labs = np.array([1, 0, 2], dtype=np.int64)
    rem = np.empty(8, dtype=np.int64)
    acc = np.empty(8, dtype=np.int64)
    f = np.empty(1, dtype=np.int64)
    s = np.empty(1, dtype=np.int64)
    o = np.empty(1, dtype=np.uint8)
    ov = np.empty(1, dtype=np.uint8)
    flux_stream(degs, labs, 1, 10, NO_DEPTH_LIMIT, rem, acc, f, s, o, ov, 0)
    sizes_stream(degs, 1, 10, s, ov, 0)
    out_d = np.empty(8, dtype=np.int64)
    ws = np.empty(10, dtype=np.int64)
    collect_degrees_stream(degs, 1, 8, NO_DEPTH_LIMIT, ws, out_d, s, 0, 0)
    ovc = np.empty(16, dtype=np.int64)
    cnt = np.empty(1, dtype=np.int64)
    top_shape_count_stream(degs, 1, 10, 0, 3, ovc, cnt, s, ov, 0)
    par = np.empty(3, dtype=np.int64)
    parents_from_degrees(degs, 0, -1, par)
    parents_from_packed_degrees(degs, np.array([3], dtype=np.int64),
                                np.array([-1], dtype=np.int64), 0, par)
    park_pass(par, labs, np.arange(3, dtype=np.int64))
    reachable_sums(np.array([2], dtype=np.int64), 4)
