"""Numba kernel for the continuous-imaginary-time worm algorithm.

Configurations are stored as per-site circular doubly-linked event lists.
An event toggles the occupation of its site at its time; kinds are
KINK (paired hop between neighbour sites), HEAD and TAIL (worm ends).
ev_occ holds the occupation immediately after the event, so occupations
alternate around each site ring. Every site always carries an even number
of events, which keeps worldlines periodic in beta at all times.

Update menu: OPEN in the diagonal sector; CLOSE / TIMESHIFT / INSERTKINK /
DELETEKINK (equal weight) in the worm sector. Kinks are created and removed
only next to the worm head, and no move ever flips the occupation adjacent
to a surviving event, so each kink's particle-flow direction (recorded for
the winding counters) is fixed at insertion time.

Weights: t_hop per kink, exp(sum_i V_i * occupied_length_i) for the
diagonal part, and a constant c_w for worm-sector configurations. Proposal
densities are written out move by move; acceptance is Metropolis on the
weight x proposal ratio.

The RNG is xoshiro256** with its state in a plain uint64 array, so runs
checkpoint and resume exactly.
"""

from __future__ import annotations

import numpy as np
from numba import njit

KIND_KINK = 0
KIND_HEAD = 1
KIND_TAIL = 2

OK = 0
NEED_GROW = 1

_U = np.uint64
_DBL = 1.0 / 9007199254740992.0  # 2**-53

# meta_i slots
M_FREE_TOP = 0
M_NKINKS = 1
M_WINDX = 2
M_WINDY = 3
M_HEAD = 4
M_TAIL = 5
# meta_f slots
F_SL = 0
F_SV = 1

# acceptance counter layout: [attempt, accept] x [open, close, shift, ins, del]
C_OPEN = 0
C_CLOSE = 2
C_SHIFT = 4
C_INS = 6
C_DEL = 8


@njit(cache=True, inline="always")
def _rotl(x, k):
    return _U((x << k) | (x >> (_U(64) - k)))


@njit(cache=True, inline="always")
def _next_u64(rng):
    s0, s1, s2, s3 = rng[0], rng[1], rng[2], rng[3]
    result = _U(_rotl(_U(s1 * _U(5)), _U(7)) * _U(9))
    t = _U(s1 << _U(17))
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, _U(45))
    rng[0], rng[1], rng[2], rng[3] = s0, s1, s2, s3
    return result


@njit(cache=True, inline="always")
def _rand(rng):
    return float(_next_u64(rng) >> _U(11)) * _DBL


@njit(cache=True, inline="always")
def _randint(rng, n):
    return int(_rand(rng) * n) % n


@njit(cache=True, inline="always")
def _wrap(x, beta):
    y = x % beta
    if y < 0.0:
        y += beta
    return y


@njit(cache=True)
def _covering(site, tau, ev_time, ev_next, site_anchor, site_nev):
    """Event with the largest time <= tau; the global max if none is <= tau."""
    e = site_anchor[site]
    best = -1
    best_t = -1.0
    gmax = -1
    gmax_t = -1.0
    for _ in range(site_nev[site]):
        t = ev_time[e]
        if t <= tau and t > best_t:
            best = e
            best_t = t
        if t > gmax_t:
            gmax = e
            gmax_t = t
        e = ev_next[e]
    return best if best >= 0 else gmax


@njit(cache=True)
def _gap(site, tau, sigma, skip1, skip2, beta, ev_time, ev_next, site_anchor, site_nev):
    """Distance from tau to the nearest event in direction sigma, skipping ids."""
    e = site_anchor[site]
    w = beta
    for _ in range(site_nev[site]):
        if e != skip1 and e != skip2:
            if sigma > 0:
                d = _wrap(ev_time[e] - tau, beta)
            else:
                d = _wrap(tau - ev_time[e], beta)
            if 0.0 < d < w:
                w = d
        e = ev_next[e]
    return w


@njit(cache=True)
def _arc_clean(site, tau, d, sigma, skip, beta, ev_time, ev_next, site_anchor, site_nev):
    """True when site has no events (other than `skip`) with
    0 <= offset <= d from tau in direction sigma."""
    e = site_anchor[site]
    for _ in range(site_nev[site]):
        if e != skip:
            if sigma > 0:
                off = _wrap(ev_time[e] - tau, beta)
            else:
                off = _wrap(tau - ev_time[e], beta)
            if off <= d or off >= beta - 1e-15:
                return False
        e = ev_next[e]
    return True


@njit(cache=True)
def _occ_at(site, tau, ev_time, ev_next, ev_occ, site_anchor, site_nev, site_base):
    if site_nev[site] == 0:
        return int(site_base[site])
    return int(ev_occ[_covering(site, tau, ev_time, ev_next, site_anchor, site_nev)])


@njit(cache=True)
def _insert_event(
    site, tau, kind, occ, meta_i, free_stack,
    ev_time, ev_site, ev_next, ev_prev, ev_kind, ev_partner, ev_occ, ev_dx, ev_dy,
    site_anchor, site_nev,
):
    meta_i[M_FREE_TOP] -= 1
    e = free_stack[meta_i[M_FREE_TOP]]
    ev_time[e] = tau
    ev_site[e] = site
    ev_kind[e] = kind
    ev_partner[e] = -1
    ev_occ[e] = occ
    ev_dx[e] = 0
    ev_dy[e] = 0
    if site_nev[site] == 0:
        ev_next[e] = e
        ev_prev[e] = e
        site_anchor[site] = e
    else:
        cov = _covering(site, tau, ev_time, ev_next, site_anchor, site_nev)
        nxt = ev_next[cov]
        ev_next[cov] = e
        ev_prev[e] = cov
        ev_next[e] = nxt
        ev_prev[nxt] = e
    site_nev[site] += 1
    return e


@njit(cache=True)
def _remove_event(
    e, meta_i, free_stack, ev_next, ev_prev, ev_site, site_anchor, site_nev
):
    site = ev_site[e]
    if site_nev[site] == 1:
        site_anchor[site] = -1
    else:
        p = ev_prev[e]
        n = ev_next[e]
        ev_next[p] = n
        ev_prev[n] = p
        if site_anchor[site] == e:
            site_anchor[site] = n
    site_nev[site] -= 1
    free_stack[meta_i[M_FREE_TOP]] = e
    meta_i[M_FREE_TOP] += 1


@njit(cache=True)
def _attempt(
    beta, t_hop, c_w, n_sites, lat_l, V, nbr, ndx, ndy,
    ev_time, ev_site, ev_next, ev_prev, ev_kind, ev_partner, ev_occ, ev_dx, ev_dy,
    site_anchor, site_nev, site_base, free_stack, meta_i, meta_f, rng, counters,
):
    head = meta_i[M_HEAD]

    if head < 0:
        # ---- OPEN ----------------------------------------------------------
        counters[C_OPEN] += 1
        i = _randint(rng, n_sites)
        tau_t = _rand(rng) * beta
        sigma = 1 if _rand(rng) < 0.5 else -1
        nev = site_nev[i]
        if nev == 0:
            w = beta
            n_arc = int(site_base[i])
        else:
            cov = _covering(i, tau_t, ev_time, ev_next, site_anchor, site_nev)
            if ev_time[cov] == tau_t:
                return
            w = _gap(i, tau_t, sigma, -1, -1, beta,
                     ev_time, ev_next, site_anchor, site_nev)
            n_arc = int(ev_occ[cov])
        u = _rand(rng)
        if u <= 0.0:
            return
        d = u * w
        tau_h = _wrap(tau_t + sigma * d, beta)
        if tau_h == tau_t:
            return
        dsv = V[i] * d * (1.0 - 2.0 * n_arc)
        amb = 0.5 if nev == 0 else 1.0
        ratio = c_w * np.exp(dsv) * 0.25 * amb * n_sites * beta * 2.0 * w
        if ratio < 1.0 and _rand(rng) >= ratio:
            return
        if sigma > 0:
            tl = _insert_event(i, tau_t, KIND_TAIL, 1 - n_arc, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy, site_anchor, site_nev)
            hd = _insert_event(i, tau_h, KIND_HEAD, n_arc, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy, site_anchor, site_nev)
        else:
            hd = _insert_event(i, tau_h, KIND_HEAD, 1 - n_arc, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy, site_anchor, site_nev)
            tl = _insert_event(i, tau_t, KIND_TAIL, n_arc, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy, site_anchor, site_nev)
        meta_i[M_HEAD] = hd
        meta_i[M_TAIL] = tl
        meta_f[F_SL] += d * (1.0 - 2.0 * n_arc)
        meta_f[F_SV] += dsv
        counters[C_OPEN + 1] += 1
        return

    tail = meta_i[M_TAIL]
    move = _randint(rng, 4)

    if move == 0:
        # ---- CLOSE ---------------------------------------------------------
        counters[C_CLOSE] += 1
        i = ev_site[head]
        if ev_site[tail] != i:
            return
        up_ok = ev_next[tail] == head    # arc tail -> head upward is clean
        dn_ok = ev_prev[tail] == head    # arc head -> tail upward is clean
        if not up_ok and not dn_ok:
            return
        both = up_ok and dn_ok
        if both:
            use_up = _rand(rng) < 0.5
        else:
            use_up = up_ok
        if use_up:
            lo = tail
            hi = head
        else:
            lo = head
            hi = tail
        d = _wrap(ev_time[hi] - ev_time[lo], beta)
        nev = site_nev[i]
        if nev == 2:
            d_eff = d if d > 0.0 else beta
        else:
            d_eff = d
        n_in = int(ev_occ[lo])
        dsv = V[i] * d_eff * (1.0 - 2.0 * n_in)
        tau_t = ev_time[tail]
        sigma_rev = 1 if use_up else -1
        if nev == 2:
            w_rev = beta
        else:
            w_rev = _gap(i, tau_t, sigma_rev, head, tail, beta,
                         ev_time, ev_next, site_anchor, site_nev)
        q_fwd = 0.25 * (0.5 if both else 1.0)
        q_rev = (1.0 / n_sites) * (1.0 / beta) * 0.5 * (1.0 / w_rev)
        ratio = (1.0 / c_w) * np.exp(dsv) * q_rev / q_fwd
        if ratio < 1.0 and _rand(rng) >= ratio:
            return
        outside = int(ev_occ[hi])
        _remove_event(head, meta_i, free_stack, ev_next, ev_prev, ev_site,
                      site_anchor, site_nev)
        _remove_event(tail, meta_i, free_stack, ev_next, ev_prev, ev_site,
                      site_anchor, site_nev)
        if site_nev[i] == 0:
            site_base[i] = outside
        meta_i[M_HEAD] = -1
        meta_i[M_TAIL] = -1
        meta_f[F_SL] += d_eff * (1.0 - 2.0 * n_in)
        meta_f[F_SV] += dsv
        counters[C_CLOSE + 1] += 1
        return

    if move == 1:
        # ---- TIMESHIFT -----------------------------------------------------
        counters[C_SHIFT] += 1
        e = head if _rand(rng) < 0.5 else tail
        i = ev_site[e]
        p = ev_prev[e]
        n = ev_next[e]
        if p == n and p != e:
            w = beta
        elif p == e:
            return  # sole event on a site cannot occur; guard anyway
        else:
            w = _wrap(ev_time[n] - ev_time[p], beta)
        t_prev = ev_time[p]
        a_old = _wrap(ev_time[e] - t_prev, beta)
        a_new = _rand(rng) * w
        if a_new <= 0.0 or a_new == a_old:
            return
        if a_new > a_old:
            length = a_new - a_old
            q = int(ev_occ[e])
            dsv = V[i] * length * (1.0 - 2.0 * q)
            dsl = length * (1.0 - 2.0 * q)
        else:
            length = a_old - a_new
            qq = 1 - int(ev_occ[e])
            dsv = V[i] * length * (1.0 - 2.0 * qq)
            dsl = length * (1.0 - 2.0 * qq)
        if dsv < 0.0 and _rand(rng) >= np.exp(dsv):
            return
        ev_time[e] = _wrap(t_prev + a_new, beta)
        meta_f[F_SL] += dsl
        meta_f[F_SV] += dsv
        counters[C_SHIFT + 1] += 1
        return

    if move == 2:
        # ---- INSERTKINK ----------------------------------------------------
        counters[C_INS] += 1
        if t_hop <= 0.0:
            return
        i = ev_site[head]
        tau_h = ev_time[head]
        direction = _randint(rng, 4)
        j = nbr[i, direction]
        sigma = 1 if _rand(rng) < 0.5 else -1
        if sigma > 0:
            w = _wrap(ev_time[ev_next[head]] - tau_h, beta)
        else:
            w = _wrap(tau_h - ev_time[ev_prev[head]], beta)
        if w <= 0.0:
            w = beta  # head's ring neighbours coincide: full window
        u = _rand(rng)
        if u <= 0.0:
            return
        d = u * w
        tau_k = _wrap(tau_h + sigma * d, beta)
        a = int(ev_occ[head]) if sigma > 0 else 1 - int(ev_occ[head])
        # site j must be clean on the closed arc and oppositely occupied
        if not _arc_clean(j, tau_h, d, sigma, -1, beta,
                          ev_time, ev_next, site_anchor, site_nev):
            return
        if site_nev[j] == 0:
            b = int(site_base[j])
        else:
            covj = _covering(j, tau_h, ev_time, ev_next, site_anchor, site_nev)
            if ev_time[covj] == tau_h:
                return
            b = int(ev_occ[covj])
        if b != 1 - a:
            return
        dsv = (V[i] - V[j]) * d * (1.0 - 2.0 * a)
        ratio = 4.0 * w * t_hop * np.exp(dsv)
        if ratio < 1.0 and _rand(rng) >= ratio:
            return
        _remove_event(head, meta_i, free_stack, ev_next, ev_prev, ev_site,
                      site_anchor, site_nev)
        if sigma > 0:
            ki = _insert_event(i, tau_k, KIND_KINK, a, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy,
                               site_anchor, site_nev)
            kj = _insert_event(j, tau_k, KIND_KINK, b, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy,
                               site_anchor, site_nev)
            hd = _insert_event(j, tau_h, KIND_HEAD, 1 - b, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy,
                               site_anchor, site_nev)
        else:
            ki = _insert_event(i, tau_k, KIND_KINK, 1 - a, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy,
                               site_anchor, site_nev)
            kj = _insert_event(j, tau_k, KIND_KINK, 1 - b, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy,
                               site_anchor, site_nev)
            hd = _insert_event(j, tau_h, KIND_HEAD, b, meta_i, free_stack,
                               ev_time, ev_site, ev_next, ev_prev, ev_kind,
                               ev_partner, ev_occ, ev_dx, ev_dy,
                               site_anchor, site_nev)
        ev_partner[ki] = kj
        ev_partner[kj] = ki
        if sigma > 0:
            sign = 1 if a == 0 else -1
        else:
            sign = 1 if a == 1 else -1
        ev_dx[ki] = sign * ndx[direction]
        ev_dy[ki] = sign * ndy[direction]
        meta_i[M_WINDX] += ev_dx[ki]
        meta_i[M_WINDY] += ev_dy[ki]
        meta_i[M_NKINKS] += 1
        meta_i[M_HEAD] = hd
        meta_f[F_SV] += dsv
        counters[C_INS + 1] += 1
        return

    # ---- DELETEKINK --------------------------------------------------------
    counters[C_DEL] += 1
    jj = ev_site[head]
    tau_h = ev_time[head]
    s = 1 if _rand(rng) < 0.5 else -1
    adj = ev_next[head] if s > 0 else ev_prev[head]
    if ev_kind[adj] != KIND_KINK:
        return
    kj = adj
    ki = ev_partner[kj]
    i = ev_site[ki]
    tau_k = ev_time[kj]
    if s > 0:
        d = _wrap(tau_k - tau_h, beta)
    else:
        d = _wrap(tau_h - tau_k, beta)
    if d <= 0.0:
        return
    if not _arc_clean(i, tau_h, d, s, ki, beta,
                      ev_time, ev_next, site_anchor, site_nev):
        return
    if s > 0:
        a_cur = 1 - int(ev_occ[ki])
        b_cur = int(ev_occ[head])
    else:
        a_cur = int(ev_occ[ki])
        b_cur = 1 - int(ev_occ[head])
    dsv = V[i] * d * (1.0 - 2.0 * a_cur) + V[jj] * d * (1.0 - 2.0 * b_cur)
    w_rev = _gap(i, tau_h, s, ki, -1, beta, ev_time, ev_next, site_anchor, site_nev)
    ratio = np.exp(dsv) / (4.0 * w_rev * t_hop)
    if ratio < 1.0 and _rand(rng) >= ratio:
        return
    # the displacement lives on whichever side was the origin at insertion
    meta_i[M_WINDX] -= ev_dx[ki] + ev_dx[kj]
    meta_i[M_WINDY] -= ev_dy[ki] + ev_dy[kj]
    _remove_event(ki, meta_i, free_stack, ev_next, ev_prev, ev_site,
                  site_anchor, site_nev)
    _remove_event(kj, meta_i, free_stack, ev_next, ev_prev, ev_site,
                  site_anchor, site_nev)
    _remove_event(head, meta_i, free_stack, ev_next, ev_prev, ev_site,
                  site_anchor, site_nev)
    if site_nev[jj] == 0:
        site_base[jj] = 1 - b_cur  # the flipped arc now covers the circle
    occ_head = 1 - a_cur if s > 0 else a_cur
    hd = _insert_event(i, tau_h, KIND_HEAD, occ_head, meta_i, free_stack,
                       ev_time, ev_site, ev_next, ev_prev, ev_kind,
                       ev_partner, ev_occ, ev_dx, ev_dy, site_anchor, site_nev)
    meta_i[M_HEAD] = hd
    meta_i[M_NKINKS] -= 1
    meta_f[F_SV] += dsv
    counters[C_DEL + 1] += 1
    return


@njit(cache=True)
def run_sweeps(
    beta, t_hop, c_w, n_sites, lat_l, V, nbr, ndx, ndy,
    ev_time, ev_site, ev_next, ev_prev, ev_kind, ev_partner, ev_occ, ev_dx, ev_dy,
    site_anchor, site_nev, site_base, free_stack, meta_i, meta_f, rng, counters,
    n_sweeps, attempts_per_sweep, start_attempt, sweep_offset, total_sweeps,
    acc, acc_count, n_bins, occ_hist, track_patterns, measure_every,
):
    """Run sweeps, measuring in the diagonal sector at sweep boundaries
    (every measure_every-th sweep).

    Returns (sweeps_completed, attempt_position, status); NEED_GROW asks the
    caller to enlarge the event arrays and resume from exactly that point,
    so the update stream for a given seed is independent of capacity.
    """
    att0 = start_attempt
    for sw in range(n_sweeps):
        a = att0
        att0 = 0
        while a < attempts_per_sweep:
            if meta_i[M_FREE_TOP] < 4:
                return sw, a, NEED_GROW
            _attempt(
                beta, t_hop, c_w, n_sites, lat_l, V, nbr, ndx, ndy,
                ev_time, ev_site, ev_next, ev_prev, ev_kind, ev_partner,
                ev_occ, ev_dx, ev_dy, site_anchor, site_nev, site_base,
                free_stack, meta_i, meta_f, rng, counters,
            )
            a += 1
        if (
            meta_i[M_HEAD] < 0
            and n_bins > 0
            and (sweep_offset + sw + 1) % measure_every == 0
        ):
            b = (sweep_offset + sw) * n_bins // total_sweeps
            if b >= n_bins:
                b = n_bins - 1
            wx = meta_i[M_WINDX] / lat_l
            wy = meta_i[M_WINDY] / lat_l
            acc[b, 0] += meta_f[F_SL] / (beta * n_sites)
            acc[b, 1] += wx * wx + wy * wy
            acc[b, 2] += -(meta_i[M_NKINKS] + meta_f[F_SV]) / beta
            acc[b, 3] += meta_i[M_NKINKS]
            acc_count[b] += 1
            if track_patterns:
                pat = 0
                for site in range(n_sites):
                    occ = site_base[site]
                    if site_nev[site] > 0:
                        cov = _covering(site, 0.0, ev_time, ev_next,
                                        site_anchor, site_nev)
                        occ = ev_occ[cov]
                    if occ:
                        pat |= 1 << site
                occ_hist[pat] += 1
    return n_sweeps, 0, OK
