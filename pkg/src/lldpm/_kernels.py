"""Compiled inner loops.

Randomness never originates here: callers pass pre-drawn uniforms generated
from a ``numpy.random.Generator`` so results are reproducible and independent
of numba's internal RNG state.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True, nogil=True)
def cluster_logml(count, total, sumsq, tau2, sigma02, mu):
    """Log marginal likelihood of a Gaussian cluster from sufficient statistics.

    Equal to the textbook posterior-completion form but written around the
    deviations from ``mu`` so it stays accurate as ``sigma02 -> 0``.
    """
    denom = count * sigma02 + tau2
    dev = total - count * mu
    dev_sq = sumsq - 2.0 * mu * total + count * mu * mu
    quad = (dev_sq - sigma02 * dev * dev / denom) / tau2
    return -0.5 * count * (LOG_2PI + math.log(tau2)) + 0.5 * math.log(tau2 / denom) - 0.5 * quad


@njit(cache=True, nogil=True)
def canonicalize_row(labels, out):
    n = labels.shape[0]
    mapping = np.full(n + 1, -1, dtype=np.int64)
    # raw labels are assumed to lie in [0, n]
    nxt = 0
    for i in range(n):
        lab = labels[i]
        if mapping[lab] < 0:
            mapping[lab] = nxt
            nxt += 1
        out[i] = mapping[lab]
    return nxt


@njit(cache=True, nogil=True)
def crp_sample_batch(n, theta, sigma, uniforms):
    """Sequential 2-CRP draws; one row of ``uniforms`` per partition."""
    m = uniforms.shape[0]
    out = np.zeros((m, n), dtype=np.int64)
    sizes = np.zeros(n, dtype=np.int64)
    for r in range(m):
        sizes[:] = 0
        k = 0
        for i in range(n):
            u = uniforms[r, i] * (theta + i)
            acc = 0.0
            chosen = k
            for j in range(k):
                acc += sizes[j] - sigma
                if u < acc:
                    chosen = j
                    break
            out[r, i] = chosen
            sizes[chosen] += 1
            if chosen == k:
                k += 1
    return out


@njit(cache=True, nogil=True)
def eppf_batch(labels, theta, sigma):
    """Log EPPF of each canonical row of ``labels``."""
    m, n = labels.shape
    out = np.empty(m)
    sizes = np.zeros(n, dtype=np.int64)
    for r in range(m):
        sizes[:] = 0
        k = 0
        for i in range(n):
            c = labels[r, i]
            sizes[c] += 1
            if c + 1 > k:
                k = c + 1
        out[r] = eppf_from_sizes(sizes[:k], n, theta, sigma)
    return out


@njit(cache=True, nogil=True)
def eppf_from_sizes(sizes, n, theta, sigma):
    k = sizes.shape[0]
    lp = 0.0
    if sigma == 0.0:
        lp = k * math.log(theta) + math.lgamma(theta) - math.lgamma(theta + n)
        for j in range(k):
            lp += math.lgamma(sizes[j])
        return lp
    for j in range(1, k):
        lp += math.log(theta + j * sigma)
    lp -= math.lgamma(theta + n) - math.lgamma(theta + 1.0)
    g1 = math.lgamma(1.0 - sigma)
    for j in range(k):
        lp += math.lgamma(sizes[j] - sigma) - g1
    return lp


@njit(cache=True, nogil=True)
def loglik_matrix(labels, Y, tau2, sigma02, mu):
    """log p(Y[:, t] | partition) for every row of ``labels`` and every column t."""
    m, n = labels.shape
    T = Y.shape[1]
    out = np.zeros((m, T))
    counts = np.zeros(n)
    sums = np.zeros(n)
    sumsq = np.zeros(n)
    for r in range(m):
        k = 0
        for i in range(n):
            if labels[r, i] + 1 > k:
                k = labels[r, i] + 1
        for t in range(T):
            for j in range(k):
                counts[j] = 0.0
                sums[j] = 0.0
                sumsq[j] = 0.0
            for i in range(n):
                c = labels[r, i]
                y = Y[i, t]
                counts[c] += 1.0
                sums[c] += y
                sumsq[c] += y * y
            acc = 0.0
            for j in range(k):
                acc += cluster_logml(counts[j], sums[j], sumsq[j], tau2, sigma02, mu)
            out[r, t] = acc
    return out


@njit(cache=True, nogil=True)
def allocation_sampler(y, init, theta, sigma, tau2, sigma02, mu, n_iter, burnin, thin, uniforms):
    """One-unit-at-a-time collapsed Gibbs sampler for a single column.

    Targets p(pi | y) proportional to EPPF(pi) * prod_j m(y_{C_j}). Returns
    the canonical labels of every ``thin``-th sweep after ``burnin``.
    """
    n = y.shape[0]
    labels = init.copy()
    counts = np.zeros(n + 1)
    sums = np.zeros(n + 1)
    sumsq = np.zeros(n + 1)
    for i in range(n):
        c = labels[i]
        counts[c] += 1.0
        sums[c] += y[i]
        sumsq[c] += y[i] * y[i]
    n_keep = 0
    for it in range(burnin, n_iter):
        if (it - burnin) % thin == 0:
            n_keep += 1
    out = np.zeros((n_keep, n), dtype=np.int64)
    logw = np.empty(n + 1)
    slots = np.empty(n + 1, dtype=np.int64)
    row = 0
    for it in range(n_iter):
        for i in range(n):
            c = labels[i]
            yi = y[i]
            counts[c] -= 1.0
            sums[c] -= yi
            sumsq[c] -= yi * yi
            # enumerate occupied slots plus one empty slot
            k = 0
            empty = -1
            for s in range(n + 1):
                if counts[s] > 0.0:
                    slots[k] = s
                    k += 1
                elif empty < 0:
                    empty = s
            mx = -np.inf
            for j in range(k):
                s = slots[j]
                lw = math.log(counts[s] - sigma)
                lw += cluster_logml(counts[s] + 1.0, sums[s] + yi, sumsq[s] + yi * yi, tau2, sigma02, mu)
                lw -= cluster_logml(counts[s], sums[s], sumsq[s], tau2, sigma02, mu)
                logw[j] = lw
                if lw > mx:
                    mx = lw
            new_w = theta + k * sigma
            if new_w > 0.0:
                lw = math.log(new_w) + cluster_logml(1.0, yi, yi * yi, tau2, sigma02, mu)
            else:
                lw = -np.inf
            logw[k] = lw
            if lw > mx:
                mx = lw
            tot = 0.0
            for j in range(k + 1):
                logw[j] = math.exp(logw[j] - mx)
                tot += logw[j]
            u = uniforms[it, i] * tot
            acc = 0.0
            choice = k
            for j in range(k + 1):
                acc += logw[j]
                if u < acc:
                    choice = j
                    break
            if choice == k:
                c = empty
            else:
                c = slots[choice]
            labels[i] = c
            counts[c] += 1.0
            sums[c] += yi
            sumsq[c] += yi * yi
        if it >= burnin and (it - burnin) % thin == 0:
            canonicalize_row(labels, out[row])
            row += 1
    return out


@njit(cache=True, nogil=True)
def _catalogue_pick(t, u, cat_ids, cat_off):
    m = cat_off[t + 1] - cat_off[t]
    j = int(u * m)
    if j >= m:
        j = m - 1
    return cat_ids[cat_off[t] + j]


@njit(cache=True, nogil=True)
def _bridge_update(t, ids, gammas, etas, loglik, logprior, log_g, cat_ids, cat_off, u_term, u_cat):
    """Draw (pi_t, gamma_t, gamma_{t+1}) from their joint conditional.

    Four outcomes: keep the left partition with the right link open or
    closed, a fresh catalogue draw, or copy the right partition.
    """
    nxt = ids[t + 1]
    e1 = etas[t + 1]
    lw = np.full(4, -np.inf)
    if t == 0:
        lw[2] = log_g[0] + math.log(e1) + logprior[nxt]
        lw[3] = logprior[nxt] + loglik[nxt, 0] + math.log1p(-e1)
    else:
        e0 = etas[t]
        prv = ids[t - 1]
        keep = math.log1p(-e0) + loglik[prv, t]
        lw[0] = keep + math.log(e1) + logprior[nxt]
        if prv == nxt:
            lw[1] = keep + math.log1p(-e1)
        lw[2] = math.log(e0) + log_g[t] + math.log(e1) + logprior[nxt]
        lw[3] = math.log(e0) + logprior[nxt] + loglik[nxt, t] + math.log1p(-e1)
    mx = lw.max()
    w = np.exp(lw - mx)
    target = u_term * w.sum()
    k = 3
    acc = 0.0
    for j in range(4):
        acc += w[j]
        if target < acc:
            k = j
            break
    if k <= 1:
        ids[t] = ids[t - 1]
        gammas[t] = 0
        gammas[t + 1] = 1 - k
    elif k == 2:
        ids[t] = _catalogue_pick(t, u_cat, cat_ids, cat_off)
        if t > 0:
            gammas[t] = 1
        gammas[t + 1] = 1
    else:
        ids[t] = nxt
        if t > 0:
            gammas[t] = 1
        gammas[t + 1] = 0


@njit(cache=True, nogil=True)
def chain_sweep(ids, gammas, etas, order, loglik, logprior, log_g, cat_ids, cat_off, u, copy_move):
    """Joint (partition, indicator) updates over every time in ``order``.

    ``ids`` index rows of the partition table; ``gammas[0]`` and ``etas[0]``
    are unused. ``u`` holds three uniforms per visited time.
    """
    T = ids.shape[0]
    for s in range(order.shape[0]):
        t = order[s]
        if copy_move and t < T - 1:
            _bridge_update(t, ids, gammas, etas, loglik, logprior, log_g, cat_ids, cat_off, u[s, 0], u[s, 1])
            continue
        if t < T - 1 and gammas[t + 1] == 0:
            ids[t] = ids[t + 1]
        elif t == 0:
            ids[0] = _catalogue_pick(0, u[s, 1], cat_ids, cat_off)
        else:
            eta = etas[t]
            lk = math.log1p(-eta) + loglik[ids[t - 1], t] if eta < 1.0 else -np.inf
            lc = math.log(eta) + log_g[t] if eta > 0.0 else -np.inf
            if lk == -np.inf:
                p_keep = 0.0
            elif lc == -np.inf:
                p_keep = 1.0
            else:
                p_keep = 1.0 / (1.0 + math.exp(lc - lk))
            if u[s, 0] < p_keep:
                ids[t] = ids[t - 1]
            else:
                ids[t] = _catalogue_pick(t, u[s, 1], cat_ids, cat_off)
        if t >= 1:
            if ids[t] != ids[t - 1]:
                gammas[t] = 1
            else:
                eta = etas[t]
                a = eta * math.exp(logprior[ids[t]])
                pr = a / (a + 1.0 - eta)
                gammas[t] = 1 if u[s, 2] < pr else 0


@njit(cache=True, nogil=True)
def chain_reshuffle(ids, gammas, loglik, logprior, counts, cat_ids, cat_off, m_sir, correct, u_cand, u_pick):
    """Refresh the shared partition of every run of zero indicators.

    Returns the number of blocks whose candidate weights all underflowed.
    """
    T = ids.shape[0]
    cand = np.empty(m_sir * T, dtype=np.int64)
    logw = np.empty(m_sir * T)
    n_fail = 0
    lo = 0
    while lo < T:
        hi = lo + 1
        while hi < T and gammas[hi] == 0:
            hi += 1
        d = hi - lo
        if d == 1:
            ids[lo] = _catalogue_pick(lo, u_pick[lo], cat_ids, cat_off)
            lo = hi
            continue
        nc = m_sir * d
        mx = -np.inf
        for j in range(d):
            for c in range(m_sir):
                r = j * m_sir + c
                cand[r] = _catalogue_pick(lo + j, u_cand[lo * m_sir + r], cat_ids, cat_off)
        for r in range(nc):
            pid = cand[r]
            lw = logprior[pid]
            for l in range(lo, hi):
                lw += loglik[pid, l]
            if correct:
                q = 0.0
                for l in range(lo, hi):
                    q += counts[pid, l] / (cat_off[l + 1] - cat_off[l])
                lw -= math.log(q / d)
            logw[r] = lw
            if lw > mx:
                mx = lw
        if mx == -np.inf or not math.isfinite(mx):
            n_fail += 1
            lo = hi
            continue
        tot = 0.0
        for r in range(nc):
            logw[r] = math.exp(logw[r] - mx)
            tot += logw[r]
        target = u_pick[lo] * tot
        acc = 0.0
        win = cand[nc - 1]
        for r in range(nc):
            acc += logw[r]
            if target < acc:
                win = cand[r]
                break
        for l in range(lo, hi):
            ids[l] = win
        lo = hi
    return n_fail
