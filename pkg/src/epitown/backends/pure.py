"""Pure NumPy contact kernel; the reference for the compiled core.

Draw protocol, which the compiled backend replicates draw for draw:

- Locations are processed in ascending location id (the CSR order built by
  the engine), components in order worker-worker, worker-visitor,
  visitor-visitor.
- A component with n pairs and effective rate r consumes n uniforms (pair
  index order: row-major upper triangle for same-role, row-major worker x
  visitor for cross) unless r is 0 (nothing selected) or >= 1 (all pairs
  selected); in both edge cases no uniforms are consumed.
- Minimum-contact top-ups then consume one uniform per added contact:
  members are scanned in ascending slot order (workers before visitors on
  the cross component), candidates are the not-yet-partnered slots in
  ascending order, and each pick removes candidate floor(u * len) with a
  swap-from-the-end.
- Transmission applies per component after its contact list is final: one
  pass infecting the first element of each pair, then a pass infecting the
  second, so survival products multiply in the same order everywhere.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def _apply_transmission(day_surv, susceptible, infectious, trans, aa, bb):
    for x, y in ((aa, bb), (bb, aa)):
        mask = (susceptible[x] != 0) & (infectious[y] != 0)
        if mask.any():
            np.multiply.at(day_surv, x[mask], 1.0 - trans[y[mask]])


def _decode_same_role(sel, m):
    row_len = np.arange(m - 1, 0, -1)
    row_end = np.cumsum(row_len)
    i = np.searchsorted(row_end, sel, side="right")
    row_start = row_end - row_len
    j = sel - row_start[i] + i + 1
    return i, j


def _bernoulli_pairs(rate, n_pairs, rng):
    """Selected pair indices for one component; consumes the agreed draws."""
    if n_pairs <= 0 or rate <= 0.0:
        return np.empty(0, dtype=np.int64)
    if rate >= 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    u = rng.random(n_pairs)
    return np.flatnonzero(u < rate)


def _topup_same_role(members, ii, jj, min_c, rng, out_i, out_j):
    m = len(members)
    if min_c <= 0 or m < 2:
        return
    deg = np.bincount(np.concatenate([ii, jj]), minlength=m)
    extra_i: list[int] = []
    extra_j: list[int] = []
    adj = None
    for s in range(m):
        if deg[s] >= min_c:
            continue
        if adj is None:
            adj = np.zeros((m, m), dtype=bool)
            adj[ii, jj] = True
            adj[jj, ii] = True
            for a, b in zip(extra_i, extra_j):
                adj[a, b] = True
                adj[b, a] = True
        cand_mask = ~adj[s]
        cand_mask[s] = False
        cand = list(np.flatnonzero(cand_mask))
        while deg[s] < min_c and cand:
            k = int(rng.random() * len(cand))
            t = cand[k]
            cand[k] = cand[-1]
            cand.pop()
            extra_i.append(s)
            extra_j.append(int(t))
            adj[s, t] = True
            adj[t, s] = True
            deg[s] += 1
            deg[t] += 1
    out_i.extend(extra_i)
    out_j.extend(extra_j)


def _topup_cross(n_w, n_v, ii, jj, min_c, rng, out_i, out_j):
    if min_c <= 0 or n_w == 0 or n_v == 0:
        return
    deg_w = np.bincount(ii, minlength=n_w)
    deg_v = np.bincount(jj, minlength=n_v)
    adj = None

    def ensure_adj():
        nonlocal adj
        if adj is None:
            adj = np.zeros((n_w, n_v), dtype=bool)
            adj[ii, jj] = True
            for a, b in zip(out_i[base:], out_j[base:]):
                adj[a, b] = True

    base = len(out_i)
    for s in range(n_w):
        if deg_w[s] >= min_c:
            continue
        ensure_adj()
        cand = list(np.flatnonzero(~adj[s]))
        while deg_w[s] < min_c and cand:
            k = int(rng.random() * len(cand))
            t = cand[k]
            cand[k] = cand[-1]
            cand.pop()
            out_i.append(s)
            out_j.append(int(t))
            adj[s, t] = True
            deg_w[s] += 1
            deg_v[t] += 1
    for t in range(n_v):
        if deg_v[t] >= min_c:
            continue
        ensure_adj()
        cand = list(np.flatnonzero(~adj[:, t]))
        while deg_v[t] < min_c and cand:
            k = int(rng.random() * len(cand))
            s = cand[k]
            cand[k] = cand[-1]
            cand.pop()
            out_i.append(int(s))
            out_j.append(t)
            adj[s, t] = True
            deg_w[s] += 1
            deg_v[t] += 1


def contact_hour(
    sorted_persons: np.ndarray,
    starts: np.ndarray,
    ends: np.ndarray,
    wends: np.ndarray,
    rates: np.ndarray,
    mins: np.ndarray,
    susceptible: np.ndarray,
    infectious: np.ndarray,
    trans: np.ndarray,
    day_surv: np.ndarray,
    collect: bool,
    rng: np.random.Generator,
):
    """Sample one hour of contacts for every active location.

    ``sorted_persons`` holds everyone present, ordered by (location, role,
    person id); location k occupies [starts[k], ends[k]) with visitors
    beginning at wends[k].  Updates ``day_surv`` in place, returns
    (contact count, pair arrays).  The pair arrays are empty unless
    ``collect`` is set.
    """
    n_contacts = 0
    coll_a: list[np.ndarray] = []
    coll_b: list[np.ndarray] = []
    n_active = len(starts)

    for k in range(n_active):
        s0 = int(starts[k])
        s1 = int(ends[k])
        we = int(wends[k])
        workers = sorted_persons[s0:we]
        visitors = sorted_persons[we:s1]
        for c in range(3):
            rate = float(rates[k, c])
            min_c = int(mins[k, c])
            if c == 0:
                members = workers
            elif c == 2:
                members = visitors
            if c in (0, 2):
                m = len(members)
                n_pairs = m * (m - 1) // 2
                sel = _bernoulli_pairs(rate, n_pairs, rng)
                if len(sel):
                    ii, jj = _decode_same_role(sel, m)
                else:
                    ii = jj = np.empty(0, dtype=np.int64)
                extra_i: list[int] = []
                extra_j: list[int] = []
                _topup_same_role(members, ii, jj, min_c, rng, extra_i, extra_j)
                if extra_i:
                    ii = np.concatenate([ii, np.array(extra_i, dtype=np.int64)])
                    jj = np.concatenate([jj, np.array(extra_j, dtype=np.int64)])
                if len(ii) == 0:
                    continue
                aa = members[ii].astype(np.int32)
                bb = members[jj].astype(np.int32)
            else:
                n_w = len(workers)
                n_v = len(visitors)
                n_pairs = n_w * n_v
                sel = _bernoulli_pairs(rate, n_pairs, rng)
                if len(sel):
                    ii = sel // n_v
                    jj = sel % n_v
                else:
                    ii = jj = np.empty(0, dtype=np.int64)
                extra_i: list[int] = []
                extra_j: list[int] = []
                _topup_cross(n_w, n_v, ii, jj, min_c, rng, extra_i, extra_j)
                if extra_i:
                    ii = np.concatenate([ii, np.array(extra_i, dtype=np.int64)])
                    jj = np.concatenate([jj, np.array(extra_j, dtype=np.int64)])
                if len(ii) == 0:
                    continue
                aa = workers[ii].astype(np.int32)
                bb = visitors[jj].astype(np.int32)
            n_contacts += len(aa)
            _apply_transmission(day_surv, susceptible, infectious, trans, aa, bb)
            if collect:
                coll_a.append(aa)
                coll_b.append(bb)

    if collect and coll_a:
        pa = np.concatenate(coll_a)
        pb = np.concatenate(coll_b)
    else:
        pa = np.empty(0, dtype=np.int32)
        pb = np.empty(0, dtype=np.int32)
    return n_contacts, pa, pb
