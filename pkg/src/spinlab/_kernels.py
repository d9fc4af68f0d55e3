"""numba kernels shared by the enumeration, sampling and search modules.

Integer histograms are used wherever possible so that block-parallel runs
reduce to bit-identical totals regardless of thread count.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True)
def _ctz(x):
    c = 0
    while (x & 1) == 0:
        x >>= 1
        c += 1
    return c


@njit(cache=True)
def expansion_scan(N, ptr, idx, lo, hi):
    """Min over subsets S with lo <= |S| <= hi of (edges leaving S)/|S|.
    Adjacency must not contain self-loops."""
    inside = np.zeros(N, dtype=np.bool_)
    cnt_in = np.zeros(N, dtype=np.int64)
    size = 0
    cross = 0
    best = np.inf
    best_mask = 0
    mask = 0
    total = 1 << N
    for i in range(1, total):
        v = _ctz(i)
        deg = ptr[v + 1] - ptr[v]
        a = cnt_in[v]
        if inside[v]:
            cross -= (deg - a) - a
            inside[v] = False
            size -= 1
            for p in range(ptr[v], ptr[v + 1]):
                cnt_in[idx[p]] -= 1
        else:
            cross += (deg - a) - a
            inside[v] = True
            size += 1
            for p in range(ptr[v], ptr[v + 1]):
                cnt_in[idx[p]] += 1
        mask ^= (1 << v)
        if lo <= size <= hi:
            r = cross / size
            if r < best:
                best = r
                best_mask = mask
    return best, best_mask


@njit(cache=True)
def _maxcut_block(N, ptr, idx, fixed_bits, nfree):
    # vertices >= nfree are fixed by fixed_bits; vertices < nfree are scanned
    side = np.zeros(N, dtype=np.int8)
    for v in range(nfree, N):
        side[v] = (fixed_bits >> (v - nfree)) & 1
    cut = 0
    for v in range(N):
        for p in range(ptr[v], ptr[v + 1]):
            u = idx[p]
            if u > v and side[u] != side[v]:
                cut += 1
    best = cut
    total = 1 << nfree
    for i in range(1, total):
        v = _ctz(i)
        for p in range(ptr[v], ptr[v + 1]):
            u = idx[p]
            if u != v:
                if side[u] == side[v]:
                    cut += 1
                else:
                    cut -= 1
        side[v] ^= 1
        if cut > best:
            best = cut
    return best


@njit(cache=True, parallel=True)
def maxcut_scan(N, ptr, idx, high_bits):
    """Maximum cut with vertex N-1 pinned to side 0. The next ``high_bits``
    vertices below it are split across parallel blocks."""
    nfree = N - 1 - high_bits
    nblocks = 1 << high_bits
    out = np.zeros(nblocks, dtype=np.int64)
    for b in prange(nblocks):
        out[b] = _maxcut_block(N, ptr, idx, b, nfree)
    return out.max()


@njit(cache=True)
def _phase_index(S, ncopies):
    ph = 0
    for c in range(ncopies):
        if S[c] < 0:
            ph |= (1 << c)
    return ph


@njit(cache=True)
def _ising_block(n, ptr, idx, tau, copy, ncopies, wpos, high, nlow, hist):
    spin = np.empty(n, dtype=np.int8)
    for v in range(n):
        if v >= nlow:
            spin[v] = 1 if ((high >> (v - nlow)) & 1) else -1
        else:
            spin[v] = -1
    agree = 0
    nplus = 0
    pat = 0
    S = np.zeros(max(ncopies, 1), dtype=np.int64)
    for v in range(n):
        if spin[v] == 1:
            nplus += 1
            if wpos[v] >= 0:
                pat |= (1 << wpos[v])
        if ncopies > 0:
            S[copy[v]] += tau[v] * spin[v]
        for p in range(ptr[v], ptr[v + 1]):
            u = idx[p]
            if u > v and spin[u] == spin[v]:
                agree += 1
    hist[pat, _phase_index(S, ncopies), agree, nplus] += 1
    total = 1 << nlow
    for i in range(1, total):
        v = _ctz(i)
        sv = spin[v]
        for p in range(ptr[v], ptr[v + 1]):
            if spin[idx[p]] == sv:
                agree -= 1
            else:
                agree += 1
        spin[v] = -sv
        nplus -= sv
        if ncopies > 0:
            S[copy[v]] -= 2 * tau[v] * sv
        if wpos[v] >= 0:
            pat ^= (1 << wpos[v])
        hist[pat, _phase_index(S, ncopies), agree, nplus] += 1


@njit(cache=True, parallel=True)
def ising_dos(n, ptr, idx, tau, copy, ncopies, wpos, npat, nedges, high_bits):
    """Histogram of (watched pattern, phase vector, #agreeing edges, #plus
    spins) over all 2^n configurations. Self-loops must be removed from the
    adjacency beforehand."""
    nph = 1 << ncopies
    nlow = n - high_bits
    nblocks = 1 << high_bits
    out = np.zeros((nblocks, npat, nph, nedges + 1, n + 1), dtype=np.int64)
    for b in prange(nblocks):
        _ising_block(n, ptr, idx, tau, copy, ncopies, wpos, b, nlow, out[b])
    return out.sum(axis=0)


@njit(cache=True)
def _hc_record(hist, pat, S, ncopies, size):
    hist[pat, _phase_index(S, ncopies), size] += 1


@njit(cache=True)
def _hc_branch(start, n, nbr, forbidden, tau, copy, ncopies, wpos, hist):
    # all independent sets whose smallest vertex is ``start``
    nc = max(ncopies, 1)
    blocked = np.zeros(n + 1, dtype=np.int64)
    cand = np.zeros(n + 1, dtype=np.int64)
    size = np.zeros(n + 1, dtype=np.int64)
    pats = np.zeros(n + 1, dtype=np.int64)
    S = np.zeros((n + 1, nc), dtype=np.int64)
    base = np.zeros(nc, dtype=np.int64)
    if ncopies > 0:
        for v in range(n):
            base[copy[v]] -= tau[v]
    # depth 0 holds {start}
    blocked[0] = forbidden | nbr[start] | (1 << start)
    cand[0] = start + 1
    size[0] = 1
    pats[0] = (1 << wpos[start]) if wpos[start] >= 0 else 0
    for c in range(nc):
        S[0, c] = base[c]
    if ncopies > 0:
        S[0, copy[start]] += 2 * tau[start]
    _hc_record(hist, pats[0], S[0], ncopies, 1)
    depth = 0
    while depth >= 0:
        u = cand[depth]
        b = blocked[depth]
        while u < n and ((b >> u) & 1):
            u += 1
        if u >= n:
            depth -= 1
            continue
        cand[depth] = u + 1
        d2 = depth + 1
        blocked[d2] = b | nbr[u] | (1 << u)
        cand[d2] = u + 1
        size[d2] = size[depth] + 1
        pats[d2] = pats[depth] | ((1 << wpos[u]) if wpos[u] >= 0 else 0)
        for c in range(nc):
            S[d2, c] = S[depth, c]
        if ncopies > 0:
            S[d2, copy[u]] += 2 * tau[u]
        _hc_record(hist, pats[d2], S[d2], ncopies, size[d2])
        depth = d2


@njit(cache=True, parallel=True)
def hardcore_dos(n, nbr, forbidden, tau, copy, ncopies, wpos, npat, nblocks):
    """Histogram of (watched pattern, phase vector, set size) over all
    independent sets. ``nbr`` holds int64 neighbor bitmasks (n <= 62)."""
    nph = 1 << ncopies
    out = np.zeros((nblocks, npat, nph, n + 1), dtype=np.int64)
    nc = max(ncopies, 1)
    S0 = np.zeros(nc, dtype=np.int64)
    if ncopies > 0:
        for v in range(n):
            S0[copy[v]] -= tau[v]
    out[0, 0, _phase_index(S0, ncopies), 0] += 1   # empty set
    for blk in prange(nblocks):
        for start in range(blk, n, nblocks):
            if not ((forbidden >> start) & 1):
                _hc_branch(start, n, nbr, forbidden, tau, copy, ncopies, wpos, out[blk])
    return out.sum(axis=0)


@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def gibbs_run(kind, spin, ptr, idx, loops, tau, beta, field, lam, n_sweeps,
              burn_in, watch, record_states, seed):
    """Random-site heat-bath dynamics. ``kind`` 0 = Ising (field B, coupling
    beta), 1 = hard-core (fugacity lam). ``spin`` holds +-1 and is updated in
    place. Returns per-sweep sum(tau*sigma), watched spins and state codes
    after burn-in."""
    np.random.seed(seed)
    n = spin.shape[0]
    kept = n_sweeps - burn_in
    mags = np.zeros(kept, dtype=np.int64)
    watched = np.zeros((kept, watch.shape[0]), dtype=np.int8)
    codes = np.full(kept, -1, dtype=np.int64)
    p_occ = lam / (1.0 + lam)
    for s in range(n_sweeps):
        for _ in range(n):
            v = np.random.randint(0, n)
            if kind == 1:
                if loops[v] > 0:
                    spin[v] = -1
                    continue
                free = True
                for p in range(ptr[v], ptr[v + 1]):
                    if spin[idx[p]] == 1:
                        free = False
                        break
                if free and np.random.random() < p_occ:
                    spin[v] = 1
                else:
                    spin[v] = -1
            else:
                h = field
                for p in range(ptr[v], ptr[v + 1]):
                    h += beta * spin[idx[p]]
                # P(+) = e^h / (e^h + e^-h)
                if np.random.random() < 1.0 / (1.0 + np.exp(-2.0 * h)):
                    spin[v] = 1
                else:
                    spin[v] = -1
        if s >= burn_in:
            r = s - burn_in
            m = 0
            for v in range(n):
                m += tau[v] * spin[v]
            mags[r] = m
            for w in range(watch.shape[0]):
                watched[r, w] = spin[watch[w]]
            if record_states:
                code = 0
                for v in range(n):
                    if spin[v] == 1:
                        code |= (1 << v)
                codes[r] = code
    return mags, watched, codes
