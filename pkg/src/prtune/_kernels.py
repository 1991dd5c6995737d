"""Fixed-step RK4 loops compiled with numba.

All kernels take plain float arrays: ``A`` (n, n), ``B`` (n,), ``C`` (n,).
"""

import numpy as np
from numba import njit

# relay_loop status codes
RUNNING = -1
TIMEOUT = 0
CONVERGED = 1
DECAYED = 2
CHATTER = 3


@njit(cache=True)
def _rk4_const(A, B, x, u, dt, k1, k2, k3, k4, tmp):
    """In-place RK4 step of ``x' = Ax + Bu`` with ``u`` held constant."""
    n = x.shape[0]
    for i in range(n):
        s = B[i] * u
        for j in range(n):
            s += A[i, j] * x[j]
        k1[i] = s
    for i in range(n):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    for i in range(n):
        s = B[i] * u
        for j in range(n):
            s += A[i, j] * tmp[j]
        k2[i] = s
    for i in range(n):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    for i in range(n):
        s = B[i] * u
        for j in range(n):
            s += A[i, j] * tmp[j]
        k3[i] = s
    for i in range(n):
        tmp[i] = x[i] + dt * k3[i]
    for i in range(n):
        s = B[i] * u
        for j in range(n):
            s += A[i, j] * tmp[j]
        k4[i] = s
    for i in range(n):
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def _dot(C, x):
    s = 0.0
    for i in range(x.shape[0]):
        s += C[i] * x[i]
    return s


@njit(cache=True)
def _advance(A, B, x, t0, t1, delay, ev_t, ev_u, head, tail, k1, k2, k3, k4, tmp):
    """Integrate from t0 to t1 under the delayed piecewise-constant input.

    Sub-steps are split exactly at the instants where a relay switch reaches
    the block input.  Returns the index of the event active at ``t1``.
    """
    tc = t0
    j = head
    while j + 1 < tail and ev_t[j + 1] + delay < t1:
        tb = ev_t[j + 1] + delay
        if tb > tc:
            _rk4_const(A, B, x, ev_u[j], tb - tc, k1, k2, k3, k4, tmp)
            tc = tb
        j += 1
    if t1 > tc:
        _rk4_const(A, B, x, ev_u[j], t1 - tc, k1, k2, k3, k4, tmp)
    return j


@njit(cache=True)
def relay_loop(A, B, C, delay, h, r, d, b0, bias_gain, max_steps, settle_cycles,
               cycle_tol, min_cycle_steps, decay_floor, grace, hold, record):
    """Relay feedback loop ``u = d*sign(r - y) + b`` driving a delayed LTI block.

    The relay is held in its initial position until ``t = hold``.

    Returns ``(status, n_steps, cycles, b, rec)`` where ``cycles`` has rows
    ``(t_end, period, amplitude, mean_e, bias)`` and ``rec`` rows
    ``(t, e, u, y)`` when ``record`` is set.
    """
    n = A.shape[0]
    x = np.zeros(n)
    x0 = np.zeros(n)
    k1 = np.zeros(n)
    k2 = np.zeros(n)
    k3 = np.zeros(n)
    k4 = np.zeros(n)
    tmp = np.zeros(n)

    cap = 1024
    ev_t = np.empty(cap)
    ev_u = np.empty(cap)
    # pseudo-event: zero input before t = 0
    ev_t[0] = -1e300
    ev_u[0] = 0.0
    head = 0
    tail = 1

    b = b0
    y = 0.0
    e = r - y
    cur = 1.0 if e >= 0.0 else -1.0
    ev_t[tail] = 0.0
    ev_u[tail] = d * cur + b
    tail += 1

    max_cycles = 4096
    cycles = np.zeros((max_cycles, 5))
    n_cyc = 0
    t_rise = -1.0
    ymax = -np.inf
    ymin = np.inf
    e_int = 0.0

    if record:
        rec = np.zeros((max_steps + 1, 4))
        rec[0, 0] = 0.0
        rec[0, 1] = e
        rec[0, 2] = d * cur + b
        rec[0, 3] = y
    else:
        rec = np.zeros((1, 4))

    status = TIMEOUT
    k = 0
    while k < max_steps:
        t0 = k * h
        t1 = (k + 1) * h
        for i in range(n):
            x0[i] = x[i]
        jn = _advance(A, B, x, t0, t1, delay, ev_t, ev_u, head, tail, k1, k2, k3, k4, tmp)
        y1 = _dot(C, x)
        e1 = r - y1
        s1 = cur
        if e1 > 0.0:
            s1 = 1.0
        elif e1 < 0.0:
            s1 = -1.0
        if t1 <= hold:
            s1 = cur
        finished_cycle = False
        if s1 != cur:
            theta = e / (e - e1)
            if theta < 0.0:
                theta = 0.0
            elif theta > 1.0:
                theta = 1.0
            t_sw = t0 + theta * h
            e_int += 0.5 * e * theta * h
            cur = s1
            if cur > 0.0:
                # rising crossing closes a cycle
                if t_rise >= 0.0:
                    if n_cyc == max_cycles:
                        half = max_cycles // 2
                        for i in range(half):
                            for c in range(5):
                                cycles[i, c] = cycles[half + i, c]
                        n_cyc = half
                    period = t_sw - t_rise
                    mean_e = e_int / period
                    cycles[n_cyc, 0] = t_sw
                    cycles[n_cyc, 1] = period
                    cycles[n_cyc, 2] = 0.5 * (ymax - ymin)
                    cycles[n_cyc, 3] = mean_e
                    cycles[n_cyc, 4] = b
                    n_cyc += 1
                    finished_cycle = True
                    b += bias_gain * mean_e
                t_rise = t_sw
                ymax = -np.inf
                ymin = np.inf
                e_int = 0.0
            if tail == cap:
                if head > 0:
                    m = tail - head
                    for i in range(m):
                        ev_t[i] = ev_t[head + i]
                        ev_u[i] = ev_u[head + i]
                    jn -= head
                    head = 0
                    tail = m
                if tail == cap:
                    cap *= 2
                    nt = np.empty(cap)
                    nu = np.empty(cap)
                    nt[:tail] = ev_t[:tail]
                    nu[:tail] = ev_u[:tail]
                    ev_t = nt
                    ev_u = nu
            ev_t[tail] = t_sw
            ev_u[tail] = d * cur + b
            tail += 1
            if t_sw + delay < t1:
                for i in range(n):
                    x[i] = x0[i]
                jn = _advance(A, B, x, t0, t1, delay, ev_t, ev_u, head, tail, k1, k2, k3, k4, tmp)
                y1 = _dot(C, x)
                e1 = r - y1
            e_int += 0.5 * e1 * (1.0 - theta) * h
        else:
            e_int += 0.5 * (e + e1) * h
        head = jn
        y = y1
        e = e1
        k += 1
        if y > ymax:
            ymax = y
        if y < ymin:
            ymin = y
        if record:
            rec[k, 0] = t1
            rec[k, 1] = e
            rec[k, 2] = ev_u[tail - 1]
            rec[k, 3] = y

        if finished_cycle and n_cyc >= settle_cycles:
            lo = n_cyc - settle_cycles
            a_min = np.inf
            a_max = -np.inf
            p_min = np.inf
            p_max = -np.inf
            a_sum = 0.0
            p_sum = 0.0
            bias_ok = True
            decreasing = True
            for i in range(lo, n_cyc):
                a = cycles[i, 2]
                p = cycles[i, 1]
                a_min = min(a_min, a)
                a_max = max(a_max, a)
                p_min = min(p_min, p)
                p_max = max(p_max, p)
                a_sum += a
                p_sum += p
                if i > lo and not (a < cycles[i - 1, 2]):
                    decreasing = False
            a_mean = a_sum / settle_cycles
            p_mean = p_sum / settle_cycles
            for i in range(lo, n_cyc):
                if abs(cycles[i, 3]) > cycle_tol * a_mean:
                    bias_ok = False
            if t1 > grace and p_max < min_cycle_steps * h:
                status = CHATTER
                break
            if t1 > grace and decreasing and cycles[n_cyc - 1, 2] < decay_floor:
                status = DECAYED
                break
            if (p_min >= min_cycle_steps * h and a_max - a_min <= cycle_tol * a_mean
                    and p_max - p_min <= cycle_tol * p_mean and bias_ok):
                status = CONVERGED
                break
    return status, k, cycles[:n_cyc].copy(), b, rec[: (k + 1 if record else 1)].copy()


@njit(cache=True)
def tracking_loop(Ac, Bc, Cc, Dc, Ag, Bg, Cg, nd, h, a_r, w_r, n_steps, blowup):
    """Unity-feedback loop: PR controller ``(Ac, Bc, Cc, Dc)`` then plant with
    an input delay of ``nd`` whole steps.  Reference ``a_r*sin(w_r*t)``.

    Returns ``(n_done, unstable, rec)`` with ``rec`` rows ``(t, r, e, u, y)``.
    The delayed plant input at half steps is linearly interpolated from the
    stored input history.
    """
    nc = Ac.shape[0]
    ng = Ag.shape[0]
    nx = nc + ng
    x = np.zeros(nx)
    k1 = np.zeros(nx)
    k2 = np.zeros(nx)
    k3 = np.zeros(nx)
    k4 = np.zeros(nx)
    tmp = np.zeros(nx)
    rec = np.zeros((n_steps + 1, 5))

    for k in range(n_steps + 1):
        t = k * h
        y = 0.0
        for i in range(ng):
            y += Cg[i] * x[nc + i]
        rr = a_r * np.sin(w_r * t)
        e = rr - y
        u = Dc * e
        for i in range(nc):
            u += Cc[i] * x[i]
        rec[k, 0] = t
        rec[k, 1] = rr
        rec[k, 2] = e
        rec[k, 3] = u
        rec[k, 4] = y
        if not (abs(y) <= blowup):
            return k, True, rec[: k + 1].copy()
        if k == n_steps:
            break
        ud0 = 0.0
        ud1 = 0.0
        if nd > 0:
            if k - nd >= 0:
                ud0 = rec[k - nd, 3]
            if k - nd + 1 >= 0:
                ud1 = rec[k - nd + 1, 3]
        udh = 0.5 * (ud0 + ud1)
        for stage in range(4):
            if stage == 0:
                cst = 0.0
                for i in range(nx):
                    tmp[i] = x[i]
            elif stage == 1:
                cst = 0.5
                for i in range(nx):
                    tmp[i] = x[i] + 0.5 * h * k1[i]
            elif stage == 2:
                cst = 0.5
                for i in range(nx):
                    tmp[i] = x[i] + 0.5 * h * k2[i]
            else:
                cst = 1.0
                for i in range(nx):
                    tmp[i] = x[i] + h * k3[i]
            ts = t + cst * h
            ys = 0.0
            for i in range(ng):
                ys += Cg[i] * tmp[nc + i]
            es = a_r * np.sin(w_r * ts) - ys
            us = Dc * es
            for i in range(nc):
                us += Cc[i] * tmp[i]
            if nd > 0:
                if stage == 0:
                    us = ud0
                elif stage == 3:
                    us = ud1
                else:
                    us = udh
            if stage == 0:
                kk = k1
            elif stage == 1:
                kk = k2
            elif stage == 2:
                kk = k3
            else:
                kk = k4
            for i in range(nc):
                s = Bc[i] * es
                for j in range(nc):
                    s += Ac[i, j] * tmp[j]
                kk[i] = s
            for i in range(ng):
                s = Bg[i] * us
                for j in range(ng):
                    s += Ag[i, j] * tmp[nc + j]
                kk[nc + i] = s
        for i in range(nx):
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return n_steps, False, rec


@njit(cache=True)
def lti_response(A, B, C, D, u, h):
    """RK4 response of ``(A, B, C, D)`` to samples ``u`` on a uniform grid.

    The input between samples is linear, so the mid-step value is the
    average of its neighbours.
    """
    n = A.shape[0]
    m = u.shape[0]
    x = np.zeros(n)
    k1 = np.zeros(n)
    k2 = np.zeros(n)
    k3 = np.zeros(n)
    k4 = np.zeros(n)
    tmp = np.zeros(n)
    y = np.zeros(m)
    for k in range(m):
        y[k] = _dot(C, x) + D * u[k]
        if k == m - 1:
            break
        u0 = u[k]
        u1 = u[k + 1]
        uh = 0.5 * (u0 + u1)
        for i in range(n):
            s = B[i] * u0
            for j in range(n):
                s += A[i, j] * x[j]
            k1[i] = s
        for i in range(n):
            tmp[i] = x[i] + 0.5 * h * k1[i]
        for i in range(n):
            s = B[i] * uh
            for j in range(n):
                s += A[i, j] * tmp[j]
            k2[i] = s
        for i in range(n):
            tmp[i] = x[i] + 0.5 * h * k2[i]
        for i in range(n):
            s = B[i] * uh
            for j in range(n):
                s += A[i, j] * tmp[j]
            k3[i] = s
        for i in range(n):
            tmp[i] = x[i] + h * k3[i]
        for i in range(n):
            s = B[i] * u1
            for j in range(n):
                s += A[i, j] * tmp[j]
            k4[i] = s
        for i in range(n):
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return y
