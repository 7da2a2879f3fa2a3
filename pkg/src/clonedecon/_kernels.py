"""Compiled inner loops for the tempered samplers.

All state arrays here use 0-based genotype code indices, log-scale
abundances (column 0 is the background) and log-scale unscaled noise
weights; the normal-subclone weight is kept on the logit scale.  A chain
targets [p(x) * L(x)]^(1/delta) where L is the likelihood kernel of
whatever (possibly fractionally scaled) counts array it is given; the
log-scale random-walk Jacobians enter the acceptance ratios untempered.

Every sweep reseeds the thread-local generator from a value derived from
(master seed, stream tag, chain, sweep), so results are reproducible for
any thread count and schedule.  Densities must stay in sync with the
reference implementations in model.py (cross-checked by tests).
"""
import math

import numpy as np
from numba import njit, prange

# Sentinel for log(0): large enough to make any acceptance impossible,
# small enough that count-weighted sums never overflow to -inf.
_LOG_ZERO = -1e9

_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def derive_seeds(master: int, tag: int, n_chains: int, sweep: int) -> np.ndarray:
    """Per-(chain, sweep) RNG seeds via a splitmix64 finalizer."""
    chains = np.arange(n_chains, dtype=np.uint64)
    x = (np.uint64(master & 0xFFFFFFFFFFFFFFFF)
         + _SM64_GAMMA * np.uint64(tag + 1)
         + np.uint64(0x94D049BB133111EB) * np.uint64(sweep + 1)
         + np.uint64(0xBF58476D1CE4E5B9) * (chains + np.uint64(1)))
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    x = x ^ (x >> np.uint64(31))
    return (x & np.uint64(0x7FFFFFFF)).astype(np.int64)


@njit(cache=True)
def _safe_log(x):
    return math.log(x) if x > 0.0 else _LOG_ZERO


@njit(cache=True)
def _weights_row(ltheta_t, wstar_t, purity, out):
    """Normalized weights for one sample; scaled by (1 - wstar) in purity mode."""
    m = ltheta_t[0]
    for c in range(1, ltheta_t.size):
        if ltheta_t[c] > m:
            m = ltheta_t[c]
    total = 0.0
    for c in range(ltheta_t.size):
        out[c] = math.exp(ltheta_t[c] - m)
        total += out[c]
    scale = 1.0 / total
    if purity:
        scale *= 1.0 - 1.0 / (1.0 + math.exp(-wstar_t))
    for c in range(ltheta_t.size):
        out[c] *= scale


@njit(cache=True)
def _rho_from(lrho, out):
    for lo, hi in ((0, 4), (4, 6), (6, 8)):
        total = 0.0
        for g in range(lo, hi):
            out[g] = math.exp(lrho[g])
            total += out[g]
        for g in range(lo, hi):
            out[g] /= total


@njit(cache=True)
def _ptilde_row(z, w_t, rho, wstar_t, purity, match, out):
    """Category probabilities for one sample over all pairs: out is (K, 8)."""
    K = z.shape[0]
    C = z.shape[1]
    ws = 0.0
    if purity:
        ws = 1.0 / (1.0 + math.exp(-wstar_t))
    for k in range(K):
        for g in range(8):
            acc = w_t[0] * rho[g]
            for c in range(C):
                acc += w_t[c + 1] * match[g, z[k, c]]
            if purity:
                acc += ws * match[g, 0]
            out[k, g] = acc


@njit(cache=True)
def _loglik_row(counts_t, ptilde_t):
    total = 0.0
    K = counts_t.shape[0]
    for k in range(K):
        for g in range(8):
            n = counts_t[k, g]
            if n != 0.0:
                total += n * _safe_log(ptilde_t[k, g])
    return total


@njit(cache=True)
def chain_loglik(z, ltheta, lrho, lwstar, purity, counts, match):
    """Likelihood kernel sum n log ptilde for one chain state."""
    T = counts.shape[0]
    K = counts.shape[1]
    C = z.shape[1]
    w_t = np.empty(C + 1)
    rho = np.empty(8)
    pt = np.empty((K, 8))
    _rho_from(lrho, rho)
    total = 0.0
    for t in range(T):
        _weights_row(ltheta[t], lwstar[t], purity, w_t)
        _ptilde_row(z, w_t, rho, lwstar[t], purity, match, pt)
        total += _loglik_row(counts[t], pt)
    return total


@njit(cache=True)
def chain_logprior(z, pi, ltheta, lrho, lwstar, purity,
                   alpha, gamma, d, d0, d1, d1s, d2s, r):
    """Untempered joint log prior, including the geometric term for C."""
    K = z.shape[0]
    C = z.shape[1]
    T = ltheta.shape[0]
    total = C * math.log(1.0 - r) + math.log(r)
    bcoef = alpha / C
    for c in range(C):
        p1 = pi[c, 0]
        if p1 <= 0.0 or p1 >= 1.0:
            return -np.inf
        total += (bcoef - 1.0) * math.log(1.0 - p1) + math.log(bcoef)
        rest = 1.0 - p1
        for q in range(1, 10):
            tq = pi[c, q] / rest
            if tq <= 0.0:
                return -np.inf
            total += (gamma - 1.0) * math.log(tq)
        total += math.lgamma(9.0 * gamma) - 9.0 * math.lgamma(gamma)
    for c in range(C):
        for k in range(K):
            pq = pi[c, z[k, c]]
            total += _safe_log(pq)
    for t in range(T):
        for c in range(C + 1):
            shape = d0 if c == 0 else d
            lam = ltheta[t, c]
            total += (shape - 1.0) * lam - math.exp(lam) - math.lgamma(shape)
    for g in range(8):
        shape = d1 if g < 4 else 2.0 * d1
        lam = lrho[g]
        total += (shape - 1.0) * lam - math.exp(lam) - math.lgamma(shape)
    if purity:
        lbeta = math.lgamma(d1s) + math.lgamma(d2s) - math.lgamma(d1s + d2s)
        for t in range(T):
            s = 1.0 / (1.0 + math.exp(-lwstar[t]))
            if s <= 0.0 or s >= 1.0:
                return -np.inf
            total += (d1s - 1.0) * math.log(s) + (d2s - 1.0) * math.log(1.0 - s) - lbeta
    return total


@njit(cache=True)
def sweep_chain(z, pi, ltheta, lrho, lwstar, purity, counts, match, levels,
                alpha, gamma, d, d0, d1, d1s, d2s,
                theta_step, rho_step, wstar_step,
                delta, seed, theta_jacobian):
    """One full kernel sweep (genotypes, pi, abundances, noise, purity weight).

    Mutates the state arrays in place and returns the end-of-sweep
    (likelihood kernel, log prior), both untempered.
    """
    np.random.seed(seed)
    T = counts.shape[0]
    K = counts.shape[1]
    C = z.shape[1]
    inv = 1.0 / delta

    w = np.empty((T, C + 1))
    for t in range(T):
        _weights_row(ltheta[t], lwstar[t], purity, w[t])
    rho = np.empty(8)
    _rho_from(lrho, rho)
    ptilde = np.empty((T, K, 8))
    for t in range(T):
        _ptilde_row(z, w[t], rho, lwstar[t], purity, match, ptilde[t])

    # --- genotype codes, column by column (rows are independent given the rest)
    logits = np.empty(10)
    lv = np.empty(3)
    prob = np.empty(10)
    lpi = np.empty(10)
    for c in range(C):
        for q in range(10):
            lpi[q] = _safe_log(pi[c, q])
        for k in range(K):
            for q in range(10):
                logits[q] = lpi[q]
            for t in range(T):
                wc = w[t, c + 1]
                for g in range(8):
                    n = counts[t, k, g]
                    if n == 0.0:
                        continue
                    rest = ptilde[t, k, g] - wc * match[g, z[k, c]]
                    if rest < 0.0:
                        rest = 0.0
                    lv[0] = _safe_log(rest)
                    lv[1] = _safe_log(rest + 0.5 * wc)
                    lv[2] = _safe_log(rest + wc)
                    for q in range(10):
                        logits[q] += n * lv[levels[g, q]]
            m = logits[0]
            for q in range(1, 10):
                if logits[q] > m:
                    m = logits[q]
            total = 0.0
            for q in range(10):
                prob[q] = math.exp((logits[q] - m) * inv)
                total += prob[q]
            u = np.random.random() * total
            qnew = 9
            acc = 0.0
            for q in range(10):
                acc += prob[q]
                if u <= acc:
                    qnew = q
                    break
            qold = z[k, c]
            if qnew != qold:
                z[k, c] = qnew
                for t in range(T):
                    wc = w[t, c + 1]
                    if wc != 0.0:
                        for g in range(8):
                            ptilde[t, k, g] += wc * (match[g, qnew] - match[g, qold])

    # --- pi rows from the tempered conjugate conditional
    for c in range(C):
        m1 = 0
        mq = np.zeros(10)
        for k in range(K):
            mq[z[k, c]] += 1.0
        m1 = mq[0]
        a1 = m1 * inv + 1.0
        b1 = (K - m1 + alpha / C - 1.0) * inv + 1.0
        p1 = np.random.beta(a1, b1)
        total = 0.0
        for q in range(1, 10):
            shape = (mq[q] + gamma - 1.0) * inv + 1.0
            g_draw = np.random.gamma(shape, 1.0)
            pi[c, q] = g_draw
            total += g_draw
        pi[c, 0] = p1
        for q in range(1, 10):
            pi[c, q] *= (1.0 - p1) / total

    # --- per-sample likelihood cache, refreshed once per sweep
    ll = np.empty(T)
    for t in range(T):
        ll[t] = _loglik_row(counts[t], ptilde[t])

    # --- abundances: log-scale random walk, one coordinate at a time
    w_new = np.empty(C + 1)
    pt_new = np.empty((K, 8))
    for t in range(T):
        for c in range(C + 1):
            lam = ltheta[t, c]
            lam_new = np.random.normal(lam, theta_step)
            shape = d0 if c == 0 else d
            old = lam
            ltheta[t, c] = lam_new
            _weights_row(ltheta[t], lwstar[t], purity, w_new)
            ltheta[t, c] = old
            _ptilde_row(z, w_new, rho, lwstar[t], purity, match, pt_new)
            ll_new = _loglik_row(counts[t], pt_new)
            dlam = lam_new - lam
            logacc = inv * (ll_new - ll[t] + (shape - 1.0) * dlam
                            - math.exp(lam_new) + math.exp(lam))
            if theta_jacobian:
                logacc += dlam
            if math.log(np.random.random()) < logacc:
                ltheta[t, c] = lam_new
                ll[t] = ll_new
                for cc in range(C + 1):
                    w[t, cc] = w_new[cc]
                for k in range(K):
                    for g in range(8):
                        ptilde[t, k, g] = pt_new[k, g]

    # --- noise weights: only the proposal's coverage-case group is touched
    rho_new = np.empty(8)
    dll_t = np.empty(T)
    for g0 in range(8):
        lo = 0 if g0 < 4 else (4 if g0 < 6 else 6)
        hi = 4 if g0 < 4 else (6 if g0 < 6 else 8)
        shape = d1 if g0 < 4 else 2.0 * d1
        lam = lrho[g0]
        lam_new = np.random.normal(lam, rho_step)
        total = 0.0
        for g in range(lo, hi):
            rho_new[g] = math.exp(lam_new) if g == g0 else math.exp(lrho[g])
            total += rho_new[g]
        for g in range(lo, hi):
            rho_new[g] /= total
        dll = 0.0
        for t in range(T):
            dll_t[t] = 0.0
            w0 = w[t, 0]
            if w0 == 0.0:
                continue
            for k in range(K):
                for g in range(lo, hi):
                    n = counts[t, k, g]
                    if n == 0.0:
                        continue
                    p_new = ptilde[t, k, g] + w0 * (rho_new[g] - rho[g])
                    if p_new < 0.0:
                        p_new = 0.0
                    dll_t[t] += n * (_safe_log(p_new) - _safe_log(ptilde[t, k, g]))
            dll += dll_t[t]
        dlam = lam_new - lam
        logacc = inv * (dll + (shape - 1.0) * dlam
                        - math.exp(lam_new) + math.exp(lam)) + dlam
        if math.log(np.random.random()) < logacc:
            lrho[g0] = lam_new
            for t in range(T):
                w0 = w[t, 0]
                if w0 != 0.0:
                    for k in range(K):
                        for g in range(lo, hi):
                            p_new = ptilde[t, k, g] + w0 * (rho_new[g] - rho[g])
                            ptilde[t, k, g] = p_new if p_new > 0.0 else 0.0
                ll[t] += dll_t[t]
            for g in range(lo, hi):
                rho[g] = rho_new[g]

    # --- normal-subclone weight: logit-scale random walk per sample
    if purity:
        for t in range(T):
            u = lwstar[t]
            u_new = np.random.normal(u, wstar_step)
            s_old = 1.0 / (1.0 + math.exp(-u))
            s_new = 1.0 / (1.0 + math.exp(-u_new))
            old = lwstar[t]
            lwstar[t] = u_new
            _weights_row(ltheta[t], u_new, purity, w_new)
            lwstar[t] = old
            _ptilde_row(z, w_new, rho, u_new, purity, match, pt_new)
            ll_new = _loglik_row(counts[t], pt_new)
            dls = math.log(s_new) - math.log(s_old)
            dl1ms = math.log(1.0 - s_new) - math.log(1.0 - s_old)
            logacc = (inv * (ll_new - ll[t] + (d1s - 1.0) * dls + (d2s - 1.0) * dl1ms)
                      + dls + dl1ms)
            if math.log(np.random.random()) < logacc:
                lwstar[t] = u_new
                ll[t] = ll_new
                for cc in range(C + 1):
                    w[t, cc] = w_new[cc]
                for k in range(K):
                    for g in range(8):
                        ptilde[t, k, g] = pt_new[k, g]

    total_ll = 0.0
    for t in range(T):
        total_ll += ll[t]
    lp = chain_logprior(z, pi, ltheta, lrho, lwstar, purity,
                        alpha, gamma, d, d0, d1, d1s, d2s, r=0.5)
    return total_ll, lp


@njit(cache=True, parallel=True)
def sweep_ensemble(z_all, pi_all, ltheta_all, lrho_all, lwstar_all, purity,
                   counts, match, levels,
                   alpha, gamma, d, d0, d1, d1s, d2s,
                   theta_step, rho_step, wstar_step,
                   deltas, seeds, theta_jacobian, logliks, logpriors):
    """Sweep every chain of a ladder independently (one parallel step)."""
    for i in prange(deltas.size):
        ll, lp = sweep_chain(z_all[i], pi_all[i], ltheta_all[i], lrho_all[i],
                             lwstar_all[i], purity, counts, match, levels,
                             alpha, gamma, d, d0, d1, d1s, d2s,
                             theta_step, rho_step, wstar_step,
                             deltas[i], seeds[i], theta_jacobian)
        logliks[i] = ll
        logpriors[i] = lp
