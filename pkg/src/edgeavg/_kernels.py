"""Compiled inner loops.

Every kernel draws from a ``numpy.random.Generator`` passed in by the caller
(numba reproduces numpy's ``random()`` bit-for-bit), or from a buffer of raw
32-bit words filled by numpy. The pure-Python engines in ``dynamics`` and
``fragmentation`` mirror these loops and serve as test oracles.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

REFRESH_EVENTS = 1_000_000
_TWO32 = 4294967296


# ---------------------------------------------------------------- clocks

@njit(cache=True)
def next_event_nb(rng, count):
    u = rng.random()
    wait = -math.log1p(-u) / count
    k = int(rng.random() * count)
    if k >= count:
        k = count - 1
    return wait, k


@njit(cache=True, inline="always")
def _bounded(bits, pos, s):
    """Lemire's multiply-shift draw on [0, s); returns (value, new_pos) or (-1, pos)."""
    n = bits.shape[0]
    while pos < n:
        prod = np.uint64(bits[pos]) * np.uint64(s)
        pos += 1
        low = prod & np.uint64(0xFFFFFFFF)
        if low < np.uint64(s):
            thresh = np.uint64((_TWO32 - s) % s)
            if low < thresh:
                continue
        return np.int64(prod >> np.uint64(32)), pos
    return np.int64(-1), pos


# ---------------------------------------------------------------- min/max index

@njit(cache=True)
def tree_build(values):
    n = values.shape[0]
    size = 1
    while size < n:
        size *= 2
    tmin = np.full(2 * size, np.inf)
    tmax = np.full(2 * size, -np.inf)
    for i in range(n):
        tmin[size + i] = values[i]
        tmax[size + i] = values[i]
    for i in range(size - 1, 0, -1):
        tmin[i] = min(tmin[2 * i], tmin[2 * i + 1])
        tmax[i] = max(tmax[2 * i], tmax[2 * i + 1])
    return tmin, tmax, size


@njit(cache=True)
def tree_set(tmin, tmax, size, i, value):
    j = size + i
    tmin[j] = value
    tmax[j] = value
    j //= 2
    while j >= 1:
        a = min(tmin[2 * j], tmin[2 * j + 1])
        b = max(tmax[2 * j], tmax[2 * j + 1])
        if a == tmin[j] and b == tmax[j]:
            break
        tmin[j] = a
        tmax[j] = b
        j //= 2


# ---------------------------------------------------------------- forward process

@njit(cache=True)
def forward_kernel(f, eu, ev, tmin, tmax, size, fs, t_max, obs, snap_slot, eps, stop_at_consensus,
                   rng, out_osc, out_h, out_sum, snaps):
    """Advance the opinion profile ``f`` in place.

    ``fs`` holds [time, sum, h, tau, events] on entry and exit (tau is NaN
    until consensus). Returns the number of observations written.
    """
    m = eu.shape[0]
    t = fs[0]
    s = fs[1]
    h = fs[2]
    tau = fs[3]
    events = fs[4]
    nobs = obs.shape[0]
    k = 0
    use_eps = not math.isnan(eps)
    while True:
        wait, e = next_event_nb(rng, m)
        tn = t + wait
        while k < nobs and obs[k] < tn:
            out_osc[k] = tmax[1] - tmin[1]
            out_h[k] = h
            out_sum[k] = s
            if snap_slot[k] >= 0:
                snaps[snap_slot[k], :] = f
            k += 1
        if tn > t_max:
            break
        a = eu[e]
        b = ev[e]
        x = f[a]
        y = f[b]
        avg = 0.5 * (x + y)
        d = x - y
        h -= 0.5 * d * d
        s += 2.0 * avg - x - y
        f[a] = avg
        f[b] = avg
        tree_set(tmin, tmax, size, a, avg)
        tree_set(tmin, tmax, size, b, avg)
        t = tn
        events += 1
        if use_eps and math.isnan(tau) and tmax[1] - tmin[1] <= eps:
            tau = t
            if stop_at_consensus:
                break
    fs[0] = t
    fs[1] = s
    fs[2] = h
    fs[3] = tau
    fs[4] = events
    return k


# ---------------------------------------------------------------- fragmentation, finite graph

@njit(cache=True, inline="always")
def _ring_energy_delta(m, indptr, nbr, a, b, avg):
    x = m[a]
    y = m[b]
    d = 0.0
    for j in range(indptr[a], indptr[a + 1]):
        w = nbr[j]
        if w != b:
            mw = m[w]
            d += (avg - mw) ** 2 - (x - mw) ** 2
    for j in range(indptr[b], indptr[b + 1]):
        w = nbr[j]
        if w != a:
            mw = m[w]
            d += (avg - mw) ** 2 - (y - mw) ** 2
    return d - (x - y) ** 2


@njit(cache=True)
def energy_finite(m, eu, ev):
    e = 0.0
    for i in range(eu.shape[0]):
        d = m[eu[i]] - m[ev[i]]
        e += d * d
    return e


@njit(cache=True)
def mass_finite_kernel(m, eu, ev, indptr, nbr, bits, pos, n_rings, fst, ist, check, q_floor):
    """Apply up to ``n_rings`` uniformly chosen edge rings to the mass vector.

    ``fst`` = [q, energy]; ``ist`` = [support, violations, events, since_refresh].
    Energy is only maintained when ``check`` is set; then every visited state
    with q >= q_floor is tested against energy >= q^3/8. Returns
    (rings_done, pos); fewer rings than requested means the bit buffer ran out.
    """
    ne = eu.shape[0]
    q = fst[0]
    en = fst[1]
    support = ist[0]
    viol = ist[1]
    since = ist[3]
    nbits = bits.shape[0]
    done = 0
    while done < n_rings:
        if nbits - pos < 64:
            break
        e, pos = _bounded(bits, pos, ne)
        if e < 0:
            break
        a = eu[e]
        b = ev[e]
        x = m[a]
        y = m[b]
        if x != y:
            avg = 0.5 * (x + y)
            d = x - y
            q -= 0.5 * d * d
            if check:
                en += _ring_energy_delta(m, indptr, nbr, a, b, avg)
            if x == 0.0 or y == 0.0 or avg == 0.0:
                support += 2 * (avg > 0.0) - (x > 0.0) - (y > 0.0)
            m[a] = avg
            m[b] = avg
        done += 1
        since += 1
        if since >= REFRESH_EVENTS:
            q = np.sum(m * m)
            if check:
                en = energy_finite(m, eu, ev)
            since = 0
        if check and q >= q_floor and en < q * q * q / 8.0:
            viol += 1
    fst[0] = q
    fst[1] = en
    ist[0] = support
    ist[1] = viol
    ist[2] += done
    ist[3] = since
    return done, pos


# ---------------------------------------------------------------- fragmentation, support-local on Z

@njit(cache=True)
def z_refresh(m, L, R):
    q = 0.0
    e = 0.0
    for i in range(L - 1, R + 2):
        q += m[i] * m[i]
        if i <= R:
            d = m[i] - m[i + 1]
            e += d * d
    return q, e


@njit(cache=True)
def mass_z_kernel(m, bits, pos, rng, fst, ist, t_stop, floor, check):
    """Support-local fragmentation on Z, window array ``m`` with zero padding.

    The support is the index interval [L, R]. Its R - L inner edges ring as a
    Poisson process; the two boundary edges ring at total rate 2 and are the
    only way the support grows. Between boundary rings the inner-ring count
    over a span is Poisson and the rung edges are i.i.d. uniform, which is the
    same law as drawing one Exp(#active) wait per event.

    A boundary ring that would put mass <= ``floor`` on a new vertex is
    dropped; the mass it would have moved is added to ``fst[3]``, which
    bounds the L1 distance to the untruncated process on the same clocks.

    fst = [t, q, energy, dropped, segment_end]
    ist = [L, R, violations, events, pending_inner, pending_boundary, since_refresh]
    Returns (status, pos): 0 reached t_stop, 1 bit buffer exhausted,
    2 window too small.
    """
    # running values live in locals; array state is written back on return
    t = fst[0]
    q = fst[1]
    en = fst[2]
    dropped = fst[3]
    seg = fst[4]
    L = ist[0]
    R = ist[1]
    viol = ist[2]
    events = ist[3]
    pend = ist[4]
    boundary = ist[5]
    since = ist[6]
    status = 0
    nbits = bits.shape[0]
    while True:
        inner = R - L
        while pend > 0:
            if nbits - pos < 64:
                status = 1
                break
            k, pos = _bounded(bits, pos, inner)
            if k < 0:
                status = 1
                break
            a = L + k
            x = m[a]
            y = m[a + 1]
            avg = 0.5 * (x + y)
            d = x - y
            q -= 0.5 * d * d
            if check:
                p = m[a - 1]
                r = m[a + 2]
                en += (p - avg) ** 2 + (avg - r) ** 2 - (p - x) ** 2 - d * d - (y - r) ** 2
            m[a] = avg
            m[a + 1] = avg
            pend -= 1
            events += 1
            since += 1
            if since >= REFRESH_EVENTS:
                q, e_new = z_refresh(m, L, R)
                if check:
                    en = e_new
                since = 0
            if check and en < q * q * q / 8.0:
                viol += 1
        if status != 0:
            break
        if seg > t:
            t = seg
        if boundary == 1:
            boundary = 0
            events += 1
            if rng.random() < 0.5:
                a = L - 1
                edge_mass = m[L]
            else:
                a = R
                edge_mass = m[R]
            if 0.5 * edge_mass > floor:
                x = m[a]
                y = m[a + 1]
                avg = 0.5 * (x + y)
                d = x - y
                q -= 0.5 * d * d
                if check:
                    p = m[a - 1]
                    r = m[a + 2]
                    en += (p - avg) ** 2 + (avg - r) ** 2 - (p - x) ** 2 - d * d - (y - r) ** 2
                m[a] = avg
                m[a + 1] = avg
                if a < L:
                    L -= 1
                else:
                    R += 1
                if check and en < q * q * q / 8.0:
                    viol += 1
            else:
                dropped += edge_mass
        if t >= t_stop:
            break
        if L < 2 or R > m.shape[0] - 3:
            status = 2
            break
        tb = t - math.log1p(-rng.random()) / 2.0
        if tb < t_stop:
            seg = tb
            boundary = 1
        else:
            seg = t_stop
            boundary = 0
        if R > L:
            pend = rng.poisson((R - L) * (seg - t))
    fst[0] = t
    fst[1] = q
    fst[2] = en
    fst[3] = dropped
    fst[4] = seg
    ist[0] = L
    ist[1] = R
    ist[2] = viol
    ist[3] = events
    ist[4] = pend
    ist[5] = boundary
    ist[6] = since
    return status, pos


# ---------------------------------------------------------------- random walk

@njit(cache=True)
def walk_kernel(indptr, nbr, origin, t, rng, count):
    out = np.empty(count, dtype=np.int64)
    for r in range(count):
        v = origin
        s = 0.0
        while True:
            deg = indptr[v + 1] - indptr[v]
            wait, k = next_event_nb(rng, deg)
            s += wait
            if s > t:
                break
            if rng.random() < 0.5:
                v = nbr[indptr[v] + k]
        out[r] = v
    return out
