"""int64 kernels mirroring the fixed-point datapath bit for bit.

The readable model lives in ``membership``/``inference``/``controller``; these
jitted loops exist for throughput (grid sweeps, long pipeline streams, the
10**6-step closed loop). Rounding mode: 0 = floor, 1 = round half to even.
Widths are checked by the Python wrappers so that no intermediate exceeds
62 bits.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

RT, LT, TRI, LUTK = 0, 1, 2, 3
# parameter slots in the packed membership table
PC, PD, PE, PF, PM, PFALL, PRISE = range(7)


@njit(cache=True)
def shr(v, k, mode):
    """v / 2**k rounded to an integer (k <= 0 scales up)."""
    if k <= 0:
        return v << (-k)
    q = v >> k
    if mode == 0:
        return q
    rem = v - (q << k)
    half = np.int64(1) << (k - 1)
    if rem > half or (rem == half and (q & 1) == 1):
        q += 1
    return q


@njit(cache=True)
def sat(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True)
def round_float(y, mode):
    r = math.floor(y)
    if mode == 1:
        d = y - r
        if d > 0.5 or (d == 0.5 and (np.int64(r) & 1) == 1):
            r += 1.0
    return r


@njit(cache=True)
def quantize_float(x, frac, lo, hi, mode):
    """Real -> raw code with saturation (x * 2**frac is exact in float64)."""
    y = round_float(x * 2.0 ** frac, mode)
    if y <= lo:
        return lo
    if y >= hi:
        return hi
    return np.int64(y)


@njit(cache=True)
def mul_dyadic(q, num, s, mode):
    """round(q * num / 2**s) exactly, for |q| < 2**31 and |num| < 2**53.

    The product is split as Hh * 2**26 + lo with 0 <= lo < 2**26 so it never
    needs more than 64 bits. Results beyond 2**60 come back clamped there.
    """
    if s < 0:
        num = num << (-s)
        s = 0
    m26 = (np.int64(1) << 26) - 1
    a = num >> 26
    b = num & m26
    lop = q * b
    hh = q * a + (lop >> 26)
    lo = lop & m26
    if s >= 26:
        k = s - 26
        if k >= 60:
            # |q*num| < 2**85 <= 2**(s-1): rounds to 0, floors to -1 when negative
            if mode == 1 or hh >= 0:
                return np.int64(0)
            return np.int64(-1)
        f = hh >> k
        if mode == 0:
            return f
        rh = hh - (f << k)
        if k == 0:
            gt = lo > (np.int64(1) << 25)
            tie = lo == (np.int64(1) << 25)
        else:
            hk = np.int64(1) << (k - 1)
            gt = rh > hk or (rh == hk and lo > 0)
            tie = rh == hk and lo == 0
        if gt or (tie and (f & 1) == 1):
            f += 1
        return f
    k = 26 - s
    lim = np.int64(1) << (60 - k)
    if hh >= lim:
        return np.int64(1) << 60
    if hh <= -lim:
        return -(np.int64(1) << 60)
    f = (hh << k) + (lo >> s)
    if mode == 0 or s == 0:
        return f
    rem = lo & ((np.int64(1) << s) - 1)
    half = np.int64(1) << (s - 1)
    if rem > half or (rem == half and (f & 1) == 1):
        f += 1
    return f


@njit(cache=True)
def mu(x, kind, p, lutrow, N, T, mode):
    mx = (np.int64(1) << N) - 1
    if kind == LUTK:
        return lutrow[x + (np.int64(1) << N)]
    F = max(N, T)
    xa = x << (F - N)
    sh = F - T
    falling = kind == RT
    if kind == TRI:
        falling = xa >= (p[PM] << sh)
    if falling:
        c = p[PC] << sh
        d = p[PD] << sh
        if xa > d:
            return np.int64(0)
        if xa < c:
            return mx
        return sat(shr((d - xa) * p[PFALL], F + T - N, mode), 0, mx)
    e = p[PE] << sh
    f = p[PF] << sh
    if xa < e:
        return np.int64(0)
    if xa > f:
        return mx
    return sat(shr((xa - e) * p[PRISE], F + T - N, mode), 0, mx)


@njit(cache=True)
def stage_mfm(x0, x1, kinds, pars, luts, counts, N, T, mode, f):
    for j in range(counts[0]):
        f[0, j] = mu(x0, kinds[0, j], pars[0, j], luts[0, j], N, T, mode)
    for j in range(counts[1]):
        f[1, j] = mu(x1, kinds[1, j], pars[1, j], luts[1, j], N, T, mode)


@njit(cache=True)
def stage_om(f, counts, o):
    g = 0
    for l in range(counts[0]):
        for k in range(counts[1]):
            a = f[0, l]
            b = f[1, k]
            o[g] = a if a <= b else b
            g += 1


@njit(cache=True)
def tree_reduce(buf, n, width, is_signed):
    """Binary adder tree over buf[:n], saturating each level into its width."""
    while n > 1:
        width += 1
        if is_signed:
            lo = -(np.int64(1) << (width - 1))
            hi = (np.int64(1) << (width - 1)) - 1
        else:
            lo = np.int64(0)
            hi = (np.int64(1) << width) - 1
        half = n // 2
        for i in range(half):
            buf[i] = sat(buf[2 * i] + buf[2 * i + 1], lo, hi)
        if n % 2 == 1:
            buf[half] = sat(buf[n - 1], lo, hi)
            n = half + 1
        else:
            n = half
    return buf[0]


@njit(cache=True)
def stage_ofm(o, x0, x1, rA, rB, rC, N, T, mode, buf):
    """Weighted rules, NM/DM adder trees, float32 division. Returns (v_d, div0)."""
    G = o.shape[0]
    H = N + 3
    hlo = -(np.int64(1) << (H - 1))
    hhi = (np.int64(1) << (H - 1)) - 1
    for g in range(G):
        ta = sat(shr(rA[g] * x0, T, mode), hlo, hhi)
        tb = sat(shr(rB[g] * x1, T, mode), hlo, hhi)
        tc = sat(shr(rC[g], T - N, mode), hlo, hhi)
        s = sat(sat(ta + tb, hlo, hhi) + tc, hlo, hhi)
        buf[g] = sat(shr(o[g] * s, N, mode), hlo, hhi)
    a = tree_reduce(buf, G, H, True)
    for g in range(G):
        buf[g] = o[g]
    b = tree_reduce(buf, G, N, False)
    vlo = -(np.int64(1) << N)
    vhi = (np.int64(1) << N) - 1
    if b == 0:
        return np.int64(0), 1
    q = np.float32(a) / np.float32(b)
    return quantize_float(np.float64(q), N, vlo, vhi, mode), 0


@njit(cache=True)
def fim_raw(x0, x1, kinds, pars, luts, counts, rA, rB, rC, N, T, mode, f, o, buf):
    stage_mfm(x0, x1, kinds, pars, luts, counts, N, T, mode, f)
    stage_om(f, counts, o)
    return stage_ofm(o, x0, x1, rA, rB, rC, N, T, mode, buf)


@njit(cache=True)
def one_shot_batch(x0s, x1s, kinds, pars, luts, counts, rA, rB, rC, N, T, mode, out, flags):
    G = rA.shape[0]
    f = np.zeros((2, pars.shape[1]), dtype=np.int64)
    o = np.zeros(G, dtype=np.int64)
    buf = np.zeros(G, dtype=np.int64)
    for i in range(x0s.shape[0]):
        v, z = fim_raw(x0s[i], x1s[i], kinds, pars, luts, counts, rA, rB, rC, N, T, mode,
                       f, o, buf)
        out[i] = v
        flags[i] = z


@njit(cache=True)
def pipeline_advance(x0, x1, r0, r1f, r1x, r2o, r2x, r3,
                     kinds, pars, luts, counts, rA, rB, rC, N, T, mode, buf):
    """One clock of the 4-register pipeline; registers are updated in place.

    r0: (2,) input bank, r1f/r1x: MFM bank, r2o/r2x: OM bank, r3: (1,) OFM bank.
    Returns (emitted v_d, div0 flag of the OFM evaluated this clock).
    """
    out = r3[0]
    v, z = stage_ofm(r2o, r2x[0], r2x[1], rA, rB, rC, N, T, mode, buf)
    r3[0] = v
    stage_om(r1f, counts, r2o)
    r2x[0] = r1x[0]
    r2x[1] = r1x[1]
    stage_mfm(r0[0], r0[1], kinds, pars, luts, counts, N, T, mode, r1f)
    r1x[0] = r0[0]
    r1x[1] = r0[1]
    r0[0] = x0
    r0[1] = x1
    return out, z


@njit(cache=True)
def pipeline_batch(s0, s1, kinds, pars, luts, counts, rA, rB, rC, N, T, mode, out, flags):
    """Run each row of (B, L) input streams through a freshly reset pipeline."""
    B, L = s0.shape
    G = rA.shape[0]
    buf = np.zeros(G, dtype=np.int64)
    r0 = np.zeros(2, dtype=np.int64)
    r1f = np.zeros((2, pars.shape[1]), dtype=np.int64)
    r1x = np.zeros(2, dtype=np.int64)
    r2o = np.zeros(G, dtype=np.int64)
    r2x = np.zeros(2, dtype=np.int64)
    r3 = np.zeros(1, dtype=np.int64)
    for i in range(B):
        r0[:] = 0
        r1f[:, :] = 0
        r1x[:] = 0
        r2o[:] = 0
        r2x[:] = 0
        r3[:] = 0
        for n in range(L):
            v, z = pipeline_advance(s0[i, n], s1[i, n], r0, r1f, r1x, r2o, r2x, r3,
                                    kinds, pars, luts, counts, rA, rB, rC, N, T, mode, buf)
            out[i, n] = v
            flags[i, n] = z


@njit(cache=True)
def quantize_diff(a, b, frac, lo, hi, mode):
    """Raw code of the exact real a - b (no double rounding through the float difference)."""
    s = a - b
    # two-sum: s + err == a - b exactly
    bb = s - a
    err = (a - (s - bb)) + (-b - bb)
    y = s * 2.0 ** frac
    r = math.floor(y)
    if mode == 0:
        if r == y and err < 0:
            r -= 1.0
    else:
        d = y - r
        if d > 0.5:
            r += 1.0
        elif d == 0.5:
            if err > 0 or (err == 0 and (np.int64(r) & 1) == 1):
                r += 1.0
    if r <= lo:
        return lo
    if r >= hi:
        return hi
    return np.int64(r)


# -- controller -------------------------------------------------------------
# integer config vector layout (cfg_i)
CI_N, CI_T, CI_M, CI_G, CI_MODE, CI_ROUND, CI_KPN, CI_KPS, CI_KIN, CI_KIS, CI_VMIN, CI_VMAX = range(12)
CI_LEN = 12
# per-channel integer state layout (st): prev_e, v, flags(sat), flags(div0)
S_PREV, S_V, S_SATF, S_DIV0 = range(4)


@njit(cache=True)
def ipm(y, ysp, ymax, prev_e, cfg):
    """Returns (e, e_d, x0, x1, saturated_flag)."""
    N = cfg[CI_N]
    M = cfg[CI_M]
    mode = cfg[CI_ROUND]
    flag = 0
    if y > ymax:
        y = ymax
        flag = 1
    elif y < -ymax:
        y = -ymax
        flag = 1
    if ysp > ymax:
        ysp = ymax
        flag = 1
    elif ysp < -ymax:
        ysp = -ymax
        flag = 1
    mlo = -(np.int64(1) << (M - 1))
    mhi = (np.int64(1) << (M - 1)) - 1
    e = quantize_diff(ysp, y, N, mlo, mhi, mode)
    ed = e - prev_e  # s(M+1).N holds any difference of two sM.N codes
    vlo = -(np.int64(1) << N)
    vhi = (np.int64(1) << N) - 1
    x0 = sat(mul_dyadic(ed, cfg[CI_KPN], cfg[CI_KPS], mode), vlo, vhi)
    x1 = sat(mul_dyadic(e, cfg[CI_KIN], cfg[CI_KIS], mode), vlo, vhi)
    return e, ed, x0, x1, flag


@njit(cache=True)
def im(v, vd, cfg):
    return sat(v + vd, cfg[CI_VMIN], cfg[CI_VMAX])


# -- float64 reference inference --------------------------------------------
# breakpoint slots in the packed float table: c, d, e, f, m

@njit(cache=True)
def mu_real(x, kind, p):
    c, d, e, f, m = p[0], p[1], p[2], p[3], p[4]
    if kind == RT or (kind == TRI and x >= m):
        if x >= d:
            return 0.0
        if x <= c:
            return 1.0
        return (d - x) / (d - c)
    if x <= e:
        return 0.0
    if x >= f:
        return 1.0
    return (x - e) / (f - e)


@njit(cache=True)
def fim_float(x0, x1, kinds, fpars, counts, fA, fB, fC):
    """Weighted-average inference in double precision; returns (v, zero_denominator)."""
    num = 0.0
    den = 0.0
    for l in range(counts[0]):
        a = mu_real(x0, kinds[0, l], fpars[0, l])
        if a == 0.0:
            continue
        for k in range(counts[1]):
            b = mu_real(x1, kinds[1, k], fpars[1, k])
            o = a if a <= b else b
            g = l * counts[1] + k
            num += o * (fA[g] * x0 + fB[g] * x1 + fC[g])
            den += o
    if den == 0.0:
        return 0.0, 1
    return num / den, 0


@njit(cache=True)
def fim_float_batch(x0s, x1s, kinds, fpars, counts, fA, fB, fC, out, flags):
    for i in range(x0s.shape[0]):
        v, z = fim_float(x0s[i], x1s[i], kinds, fpars, counts, fA, fB, fC)
        out[i] = v
        flags[i] = z


# -- manipulator ------------------------------------------------------------
# packed plant parameters
P_L1, P_L2, P_M2, P_M3, P_J1, P_J2, P_J3, P_B1, P_B2, P_B3, P_G = range(11)
P_LEN = 11


@njit(cache=True)
def plant_terms(th, dth, p):
    """Inertia entries, velocity-product terms h and gravity vector."""
    L1, L2, m2, m3 = p[P_L1], p[P_L2], p[P_M2], p[P_M3]
    c2, s2 = math.cos(th[1]), math.sin(th[1])
    c3, s3 = math.cos(th[2]), math.sin(th[2])
    c23, s23 = math.cos(th[1] + th[2]), math.sin(th[1] + th[2])
    r2 = L1 * c2
    r3 = L1 * c2 + L2 * c23
    m11 = p[P_J1] + m2 * r2 * r2 + m3 * r3 * r3
    m22 = p[P_J2] + m2 * L1 * L1 + m3 * (L1 * L1 + L2 * L2 + 2.0 * L1 * L2 * c3)
    m23 = m3 * (L2 * L2 + L1 * L2 * c3)
    m33 = p[P_J3] + m3 * L2 * L2
    # partial derivatives of the inertia entries
    d11_2 = -2.0 * m2 * r2 * L1 * s2 - 2.0 * m3 * r3 * (L1 * s2 + L2 * s23)
    d11_3 = -2.0 * m3 * r3 * L2 * s23
    d22_3 = -2.0 * m3 * L1 * L2 * s3
    d23_3 = -m3 * L1 * L2 * s3
    w1, w2, w3 = dth[0], dth[1], dth[2]
    h1 = (d11_2 * w2 + d11_3 * w3) * w1
    h2 = d22_3 * w3 * w2 + d23_3 * w3 * w3 - 0.5 * d11_2 * w1 * w1
    h3 = d23_3 * w3 * w2 - 0.5 * (d11_3 * w1 * w1 + d22_3 * w2 * w2 + 2.0 * d23_3 * w2 * w3)
    g = p[P_G]
    g2 = g * (m2 * L1 * c2 + m3 * (L1 * c2 + L2 * c23))
    g3 = g * m3 * L2 * c23
    return m11, m22, m23, m33, h1, h2, h3, g2, g3


@njit(cache=True)
def plant_accel(th, dth, tau, p, out):
    m11, m22, m23, m33, h1, h2, h3, g2, g3 = plant_terms(th, dth, p)
    q1 = tau[0] - h1 - p[P_B1] * dth[0]
    q2 = tau[1] - h2 - g2 - p[P_B2] * dth[1]
    q3 = tau[2] - h3 - g3 - p[P_B3] * dth[2]
    out[0] = q1 / m11
    det = m22 * m33 - m23 * m23
    out[1] = (m33 * q2 - m23 * q3) / det
    out[2] = (m22 * q3 - m23 * q2) / det


@njit(cache=True)
def plant_energy(th, dth, p):
    m11, m22, m23, m33, h1, h2, h3, g2, g3 = plant_terms(th, dth, p)
    w1, w2, w3 = dth[0], dth[1], dth[2]
    kin = 0.5 * (m11 * w1 * w1 + m22 * w2 * w2 + 2.0 * m23 * w2 * w3 + m33 * w3 * w3)
    L1, L2 = p[P_L1], p[P_L2]
    z2 = L1 * math.sin(th[1])
    z3 = z2 + L2 * math.sin(th[1] + th[2])
    return kin + p[P_G] * (p[P_M2] * z2 + p[P_M3] * z3)


@njit(cache=True)
def rk4_step(th, dth, tau, p, h, work):
    """Advance (th, dth) in place by one fixed step h with constant torque."""
    k1v, k2v, k3v, k4v = work[0], work[1], work[2], work[3]
    k1a, k2a, k3a, k4a = work[4], work[5], work[6], work[7]
    tt, tw = work[8], work[9]
    for i in range(3):
        k1v[i] = dth[i]
    plant_accel(th, dth, tau, p, k1a)
    for i in range(3):
        tt[i] = th[i] + 0.5 * h * k1v[i]
        tw[i] = dth[i] + 0.5 * h * k1a[i]
        k2v[i] = tw[i]
    plant_accel(tt, tw, tau, p, k2a)
    for i in range(3):
        tt[i] = th[i] + 0.5 * h * k2v[i]
        tw[i] = dth[i] + 0.5 * h * k2a[i]
        k3v[i] = tw[i]
    plant_accel(tt, tw, tau, p, k3a)
    for i in range(3):
        tt[i] = th[i] + h * k3v[i]
        tw[i] = dth[i] + h * k3a[i]
        k4v[i] = tw[i]
    plant_accel(tt, tw, tau, p, k4a)
    for i in range(3):
        th[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
        dth[i] += h / 6.0 * (k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i])


@njit(cache=True)
def rk4_run(th, dth, tau, p, h, n_steps, energy):
    """Open-loop integration; records the energy before every step and at the end."""
    work = np.zeros((10, 3))
    for n in range(n_steps):
        energy[n] = plant_energy(th, dth, p)
        rk4_step(th, dth, tau, p, h, work)
    energy[n_steps] = plant_energy(th, dth, p)


# -- closed loop ------------------------------------------------------------
# float controller parameters: kp, ki, v_min, v_max
F_KP, F_KI, F_VMIN, F_VMAX = range(4)
DIVERGENCE_LIMIT = 1e6


@njit(cache=True)
def closed_loop(n_steps, h, p, th0, dth0, seg_start, seg_sp, y_scale, ymax,
                use_fixed, pipelined, cfg, kinds, pars, luts, counts, rA, rB, rC,
                fcfg, fpars, fA, fB, fC, log_every, log, counters):
    """Three independent controllers driving the manipulator.

    seg_start: (S,) first step of each set-point segment; seg_sp: (S, 3) set
    points in radians. Controllers see y = theta / y_scale. log rows hold
    t, theta (rad), set point (rad), tau. counters: [div0, input saturations,
    diverged step (-1 if none)]. Returns the number of rows written.
    """
    th = th0.copy()
    dth = dth0.copy()
    tau = np.zeros(3)
    work = np.zeros((10, 3))
    G = rA.shape[0]
    F = pars.shape[1]
    N = cfg[0, CI_N]
    # fixed-point state per joint
    prev_e = np.zeros(3, dtype=np.int64)
    acc = np.zeros(3, dtype=np.int64)
    f = np.zeros((2, F), dtype=np.int64)
    o = np.zeros(G, dtype=np.int64)
    buf = np.zeros(G, dtype=np.int64)
    r0 = np.zeros((3, 2), dtype=np.int64)
    r1f = np.zeros((3, 2, F), dtype=np.int64)
    r1x = np.zeros((3, 2), dtype=np.int64)
    r2o = np.zeros((3, G), dtype=np.int64)
    r2x = np.zeros((3, 2), dtype=np.int64)
    r3 = np.zeros((3, 1), dtype=np.int64)
    # float state per joint; delay line emulates the zero-state pipeline
    fprev = np.zeros(3)
    facc = np.zeros(3)
    v00, z00 = fim_float(0.0, 0.0, kinds, fpars, counts, fA, fB, fC)
    delay = np.zeros((3, 4))
    for j in range(3):
        delay[j, 3] = v00
    seg = 0
    rows = 0
    counters[2] = -1
    for n in range(n_steps):
        while seg + 1 < seg_start.shape[0] and n >= seg_start[seg + 1]:
            seg += 1
        for j in range(3):
            y = th[j] / y_scale
            ysp = seg_sp[seg, j] / y_scale
            if use_fixed:
                c = cfg[j]
                ie, ied, ix0, ix1, flag = ipm(y, ysp, ymax, prev_e[j], c)
                prev_e[j] = ie
                counters[1] += flag
                if pipelined:
                    ivd, iz = pipeline_advance(ix0, ix1, r0[j], r1f[j], r1x[j], r2o[j], r2x[j],
                                             r3[j], kinds, pars, luts, counts, rA, rB, rC,
                                             N, c[CI_T], c[CI_ROUND], buf)
                else:
                    ivd, iz = fim_raw(ix0, ix1, kinds, pars, luts, counts, rA, rB, rC,
                                    N, c[CI_T], c[CI_ROUND], f, o, buf)
                counters[0] += iz
                acc[j] = im(acc[j], ivd, c)
                tau[j] = acc[j] * 2.0 ** (-N)
            else:
                fc = fcfg[j]
                yc = min(max(y, -ymax), ymax)
                spc = min(max(ysp, -ymax), ymax)
                if yc != y or spc != ysp:
                    counters[1] += 1
                fe = spc - yc
                fx0 = min(max(fc[F_KP] * (fe - fprev[j]), -1.0), 1.0)
                fx1 = min(max(fc[F_KI] * fe, -1.0), 1.0)
                fprev[j] = fe
                fvd, fz = fim_float(fx0, fx1, kinds, fpars, counts, fA, fB, fC)
                if pipelined:
                    k = n % 4
                    out = delay[j, k]
                    delay[j, k] = fvd
                    fvd = out
                counters[0] += fz
                facc[j] = min(max(facc[j] + fvd, fc[F_VMIN]), fc[F_VMAX])
                tau[j] = facc[j]
        if n % log_every == 0:
            log[rows, 0] = n * h
            for j in range(3):
                log[rows, 1 + j] = th[j]
                log[rows, 4 + j] = seg_sp[seg, j]
                log[rows, 7 + j] = tau[j]
            rows += 1
        rk4_step(th, dth, tau, p, h, work)
        bad = False
        for j in range(3):
            if not (math.isfinite(th[j]) and math.isfinite(dth[j])) or abs(dth[j]) > DIVERGENCE_LIMIT:
                bad = True
        if bad:
            counters[2] = n
            return rows
    return rows
