"""Compiled trajectory engine.

Trajectories are advanced in blocks of ``BLOCK`` lanes so the no-jump update,
which dominates the cost, runs as a SIMD loop over lanes.  Jumps are rare and
are handled lane by lane outside that loop.

Jump sampling: instead of one uniform per step, each lane draws a threshold
``r`` and jumps at the first step where the running survival product
``prod(1 - dp_j)`` falls below it.  The conditional jump probability of step
``j`` is then exactly ``dp_j``, the same law as a per-step Bernoulli trial,
with two draws per jump instead of one per step.  The channel is chosen with
probability ``dp_down / dp`` at the jump step.

No fastmath: every lane computes with correctly rounded IEEE operations, so a
trajectory's output does not depend on its position inside a block.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64

from .streams import INIT, JUMP, MEASURE, MODE, substream_key, uniform

BLOCK = 32

MICRO, MACRO, IDEAL, GAUSSIAN = 0, 1, 2, 3
MODE_CODES = {"micro": MICRO, "macro": MACRO, "ideal": IDEAL, "gaussian": GAUSSIAN}

# out_int columns
I_INIT, I_FINAL, I_K0, I_KN, I_NUP, I_NDOWN = range(6)
N_INT = 6
# out_float columns
F_E0, F_EN, F_ENTROPY, F_FINAL_POP = range(4)
N_FLOAT = 4

# flag bits
FLAG_NONPOSITIVE_T = 1
FLAG_BOSE_POLE = 2
FLAG_EMPTY_UP = 4
FLAG_WAIT_FAILED = 8
FLAG_COARSE_STEP = 16

DP_LIMIT = 0.1
WAIT_LIMIT = 1 << 31

_JIT = dict(cache=True, nogil=True, error_model="numpy")


@njit(**_JIT)
def _rates(mode, k, E, n, gamma, g2, heat_cap, fermion, ideal_up, ideal_down, out):
    """Write (up, down) into ``out``; returns a flag bit on domain errors."""
    if mode == IDEAL:
        out[0] = ideal_up
        out[1] = ideal_down
        return 0
    if mode == GAUSSIAN:
        T = E / heat_cap
        if not T > 0.0:
            out[0] = 0.0
            out[1] = 0.0
            return FLAG_NONPOSITIVE_T
        x = math.exp(-1.0 / T)
        if fermion:
            denom = 1.0 + x
        else:
            denom = -math.expm1(-1.0 / T)
            if denom <= 1e-12:
                out[0] = 0.0
                out[1] = 0.0
                return FLAG_BOSE_POLE
        # no up-jump without a full quantum in the bath
        out[0] = g2 * x / denom if E > 1.0 else 0.0
        out[1] = g2 / denom
        return 0
    out[0] = gamma * k
    out[1] = gamma * (k + n)
    return 0


@njit(**_JIT)
def _pick_mode(nu, n, weight_offset, u):
    """Oscillator index drawn with probability proportional to ``nu_m + weight_offset``."""
    total = 0
    for m in range(n):
        total += nu[m] + weight_offset
    target = u * total
    acc = 0.0
    for m in range(n):
        acc += nu[m] + weight_offset
        if target < acc:
            return m
    return n - 1


@njit(**_JIT)
def _jump_entropy(mode, direction_down, k_pre, E_pre, n, gamma, g2, heat_cap, fermion,
                  ideal_up, ideal_down, scratch):
    if mode == MICRO:
        return 0.0
    if mode == MACRO:
        if direction_down:
            return math.log((k_pre + n) / (k_pre + 1.0))
        return math.log(k_pre / (k_pre + n - 1.0))
    if mode == IDEAL:
        if direction_down:
            return math.log(ideal_down / ideal_up)
        return math.log(ideal_up / ideal_down)
    _rates(mode, 0, E_pre, n, gamma, g2, heat_cap, fermion, ideal_up, ideal_down, scratch)
    fwd_up = scratch[0]
    fwd_down = scratch[1]
    if direction_down:
        _rates(mode, 0, E_pre + 1.0, n, gamma, g2, heat_cap, fermion, ideal_up, ideal_down, scratch)
        return math.log(fwd_down / scratch[0])
    _rates(mode, 0, E_pre - 1.0, n, gamma, g2, heat_cap, fermion, ideal_up, ideal_down, scratch)
    return math.log(fwd_up / scratch[1])


@njit(**_JIT)
def _advance(L, a, b, dt, x0, y0, x1, y1, gu, gd, surv, thr, dpu, dpd):
    """One no-jump Euler step for every lane; returns the number of lanes that crossed their threshold.

    ``a + i b = dt * lambda(t) e^{it}``.  The new amplitudes are
    ``(1 - i H dt) psi`` renormalised, with
    ``H = [[-i gu/2, lambda e^{-it}], [lambda e^{it}, -i gd/2]]``.
    """
    hits = 0
    for l in range(L):
        X0 = x0[l]
        Y0 = y0[l]
        X1 = x1[l]
        Y1 = y1[l]
        au = 1.0 - 0.5 * dt * gu[l]
        ad = 1.0 - 0.5 * dt * gd[l]
        nx0 = au * X0 + (a * Y1 - b * X1)
        ny0 = au * Y0 - (a * X1 + b * Y1)
        nx1 = ad * X1 + (a * Y0 + b * X0)
        ny1 = ad * Y1 + (b * Y0 - a * X0)
        du = dt * gu[l] * (X0 * X0 + Y0 * Y0)
        dd = dt * gd[l] * (X1 * X1 + Y1 * Y1)
        dpu[l] = du
        dpd[l] = dd
        s = surv[l] * (1.0 - (du + dd))
        surv[l] = s
        inv = 1.0 / math.sqrt(nx0 * nx0 + ny0 * ny0 + nx1 * nx1 + ny1 * ny1)
        x0[l] = nx0 * inv
        y0[l] = ny0 * inv
        x1[l] = nx1 * inv
        y1[l] = ny1 * inv
        hits += s < thr[l]
    return hits


@njit(**_JIT)
def run_trajectories(
    mode, n, beta, gamma,
    g2, heat_cap, e_mean, e_sigma, fermion,
    ideal_up, ideal_down,
    fixed_qubit, psi0,
    k_init,
    w_re, w_im, dt, nsteps,
    sample_idx, calorimetric,
    keys,
    out_int, out_float, out_pop, out_cal,
    ev_step, ev_down, ev_pre, ev_mode, ev_ds, ev_count,
    nu_init, flags,
):
    """Simulate ``len(keys)`` trajectories, ``BLOCK`` lanes at a time.

    ``fixed_qubit`` < 0 draws the initial qubit from the Gibbs state; otherwise
    ``psi0`` (complex[2]) is used.  ``k_init`` < 0 draws the calorimeter from
    the canonical ensemble.  Events are written while ``ev_count`` is below
    the event capacity and counted beyond it.
    """
    M = keys.shape[0]
    S = sample_idx.shape[0]
    cap = ev_step.shape[1]
    p_exc = math.exp(-beta) / (1.0 + math.exp(-beta))
    scratch = np.empty(2)

    x0 = np.empty(BLOCK)
    y0 = np.empty(BLOCK)
    x1 = np.empty(BLOCK)
    y1 = np.empty(BLOCK)
    gu = np.empty(BLOCK)
    gd = np.empty(BLOCK)
    surv = np.empty(BLOCK)
    thr = np.empty(BLOCK)
    dpu = np.empty(BLOCK)
    dpd = np.empty(BLOCK)
    kk = np.empty(BLOCK, dtype=np.int64)
    EE = np.empty(BLOCK)
    jctr = np.empty(BLOCK, dtype=np.int64)
    mctr = np.empty(BLOCK, dtype=np.int64)
    skey_jump = np.empty(BLOCK, dtype=np.uint64)
    skey_mode = np.empty(BLOCK, dtype=np.uint64)
    nu = np.zeros((BLOCK, n if mode == MICRO else 1), dtype=np.int64)
    active = np.empty(BLOCK, dtype=np.bool_)

    for b0 in range(0, M, BLOCK):
        L = min(BLOCK, M - b0)

        # ---- initial state
        for l in range(L):
            t = b0 + l
            key = keys[t]
            sk_init = substream_key(key, uint64(INIT))
            skey_jump[l] = substream_key(key, uint64(JUMP))
            skey_mode[l] = substream_key(key, uint64(MODE))
            jctr[l] = 0
            mctr[l] = 0
            flags[t] = 0
            ev_count[t] = 0

            u = uniform(sk_init, uint64(0))
            if fixed_qubit < 0:
                exc = u < p_exc
                x0[l] = 0.0 if exc else 1.0
                x1[l] = 1.0 if exc else 0.0
                y0[l] = 0.0
                y1[l] = 0.0
                out_int[t, I_INIT] = 1 if exc else 0
            else:
                x0[l] = psi0[0].real
                y0[l] = psi0[0].imag
                x1[l] = psi0[1].real
                y1[l] = psi0[1].imag
                out_int[t, I_INIT] = fixed_qubit

            kk[l] = 0
            EE[l] = 0.0
            if mode == GAUSSIAN:
                c = 1
                while True:
                    u1 = uniform(sk_init, uint64(c))
                    u2 = uniform(sk_init, uint64(c + 1))
                    c += 2
                    z = math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)
                    E = e_mean + e_sigma * z
                    if E > 0.0:
                        break
                EE[l] = E
            elif k_init >= 0:
                kk[l] = k_init
            elif mode != IDEAL:
                tot = 0
                for m in range(n):
                    u = uniform(sk_init, uint64(1 + m))
                    v = int(math.floor(math.log1p(-u) / -beta))
                    if mode == MICRO:
                        nu[l, m] = v
                        nu_init[t, m] = v
                    tot += v
                kk[l] = tot
            out_int[t, I_K0] = kk[l]
            out_int[t, I_NUP] = 0
            out_int[t, I_NDOWN] = 0
            out_float[t, F_E0] = EE[l]
            out_float[t, F_ENTROPY] = 0.0

            flags[t] |= _rates(mode, kk[l], EE[l], n, gamma, g2, heat_cap, fermion,
                               ideal_up, ideal_down, scratch)
            gu[l] = scratch[0]
            gd[l] = scratch[1]
            if dt * max(gu[l], gd[l]) >= DP_LIMIT:
                flags[t] |= FLAG_COARSE_STEP
            surv[l] = 1.0
            thr[l] = uniform(skey_jump[l], uint64(jctr[l]))
            jctr[l] += 1

        # ---- driven evolution
        sp = 0
        for j in range(nsteps + 1):
            while sp < S and sample_idx[sp] == j:
                for l in range(L):
                    out_pop[b0 + l, sp] = x1[l] * x1[l] + y1[l] * y1[l]
                    out_cal[b0 + l, sp] = EE[l] if mode == GAUSSIAN else kk[l]
                sp += 1
            if j == nsteps:
                break
            hits = _advance(L, dt * w_re[j], dt * w_im[j], dt, x0, y0, x1, y1,
                            gu, gd, surv, thr, dpu, dpd)
            if hits == 0:
                continue
            for l in range(L):
                if not surv[l] < thr[l]:
                    continue
                t = b0 + l
                dp = dpu[l] + dpd[l]
                down = uniform(skey_jump[l], uint64(jctr[l])) * dp < dpd[l]
                jctr[l] += 1
                k_pre = kk[l]
                E_pre = EE[l]
                m_idx = -1
                if down:
                    x0[l] = 1.0
                    x1[l] = 0.0
                    if mode == MICRO:
                        m_idx = _pick_mode(nu[l], n, 1, uniform(skey_mode[l], uint64(mctr[l])))
                        mctr[l] += 1
                        nu[l, m_idx] += 1
                    kk[l] += 1
                    EE[l] += 1.0
                    out_int[t, I_NDOWN] += 1
                else:
                    if mode != IDEAL and mode != GAUSSIAN and k_pre < 1:
                        flags[t] |= FLAG_EMPTY_UP
                    x0[l] = 0.0
                    x1[l] = 1.0
                    if mode == MICRO:
                        m_idx = _pick_mode(nu[l], n, 0, uniform(skey_mode[l], uint64(mctr[l])))
                        mctr[l] += 1
                        nu[l, m_idx] -= 1
                    kk[l] -= 1
                    EE[l] -= 1.0
                    out_int[t, I_NUP] += 1
                y0[l] = 0.0
                y1[l] = 0.0
                ds = _jump_entropy(mode, down, k_pre, E_pre, n, gamma, g2, heat_cap, fermion,
                                   ideal_up, ideal_down, scratch)
                out_float[t, F_ENTROPY] += ds
                e = ev_count[t]
                if e < cap:
                    ev_step[t, e] = j
                    ev_down[t, e] = down
                    ev_pre[t, e] = E_pre if mode == GAUSSIAN else k_pre
                    ev_mode[t, e] = m_idx
                    ev_ds[t, e] = ds
                ev_count[t] = e + 1

                flags[t] |= _rates(mode, kk[l], EE[l], n, gamma, g2, heat_cap, fermion,
                                   ideal_up, ideal_down, scratch)
                gu[l] = scratch[0]
                gd[l] = scratch[1]
                if dt * max(gu[l], gd[l]) >= DP_LIMIT:
                    flags[t] |= FLAG_COARSE_STEP
                surv[l] = 1.0
                thr[l] = uniform(skey_jump[l], uint64(jctr[l]))
                jctr[l] += 1

        for l in range(L):
            t = b0 + l
            out_int[t, I_KN] = kk[l]
            out_float[t, F_EN] = EE[l]
            out_float[t, F_FINAL_POP] = x1[l] * x1[l] + y1[l] * y1[l]

        # ---- final qubit measurement
        if not calorimetric:
            for l in range(L):
                t = b0 + l
                sk = substream_key(keys[t], uint64(MEASURE))
                out_int[t, I_FINAL] = 1 if uniform(sk, uint64(0)) < out_float[t, F_FINAL_POP] else 0
            continue

        # calorimetric: wait undriven for the first jump; its direction reveals the state
        n_active = 0
        for l in range(L):
            t = b0 + l
            active[l] = True
            n_active += 1
            # a zero-rate component can never jump; decided below once the other has drained
            if gu[l] == 0.0 and gd[l] == 0.0:
                flags[t] |= FLAG_WAIT_FAILED
                active[l] = False
                n_active -= 1
                out_int[t, I_FINAL] = -1
        waited = 0
        while n_active > 0:
            hits = _advance(L, 0.0, 0.0, dt, x0, y0, x1, y1, gu, gd, surv, thr, dpu, dpd)
            waited += 1
            for l in range(L):
                if not active[l]:
                    continue
                t = b0 + l
                decided = -1
                if surv[l] < thr[l]:
                    dp = dpu[l] + dpd[l]
                    down = uniform(skey_jump[l], uint64(jctr[l])) * dp < dpd[l]
                    jctr[l] += 1
                    decided = 1 if down else 0
                else:
                    p1 = x1[l] * x1[l] + y1[l] * y1[l]
                    if gu[l] == 0.0 and p1 < 1e-30:
                        decided = 0
                    elif gd[l] == 0.0 and 1.0 - p1 < 1e-30:
                        decided = 1
                if decided >= 0:
                    out_int[t, I_FINAL] = decided
                    active[l] = False
                    n_active -= 1
                    # park the lane: no further decay, threshold never reached
                    gu[l] = 0.0
                    gd[l] = 0.0
                    thr[l] = -1.0
            if waited >= WAIT_LIMIT:
                for l in range(L):
                    if active[l]:
                        flags[b0 + l] |= FLAG_WAIT_FAILED
                        out_int[b0 + l, I_FINAL] = -1
                break
