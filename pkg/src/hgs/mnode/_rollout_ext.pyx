# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rollout kernel. Same contract and cache layout as ``_rollout_py``."""
import numpy as np

ctypedef long long i64


cdef inline void _gather(const i64[::1] par_kind, const i64[::1] par_off, const i64[::1] par_dim,
                         const i64[::1] par_widx, i64 p0, i64 p1, const double[::1] pv,
                         const double[:, ::1] s, const double[:, ::1] u, i64 b, double t,
                         double* x) noexcept nogil:
    cdef i64 p, d, k = 0, kind, off, dim, widx
    cdef double w
    for p in range(p0, p1):
        kind = par_kind[p]
        off = par_off[p]
        dim = par_dim[p]
        widx = par_widx[p]
        w = pv[widx] if widx >= 0 else 1.0
        if kind == 0:
            for d in range(dim):
                x[k] = w * s[b, off + d]
                k += 1
        elif kind == 1:
            for d in range(dim):
                x[k] = w * u[b, off + d]
                k += 1
        else:
            x[k] = w * t
            k += 1


def forward(plan, pv_in, s0_in, inputs_in, times_in, double dt, bint keep_cache=True):
    cdef const double[::1] pv = np.ascontiguousarray(pv_in, dtype=np.float64)
    cdef const double[:, :, ::1] inputs = np.ascontiguousarray(inputs_in, dtype=np.float64)
    cdef const double[::1] times = np.ascontiguousarray(times_in, dtype=np.float64)
    cdef const i64[::1] node_off = plan.node_off, node_dim = plan.node_dim, theta_ptr = plan.theta_ptr
    cdef const i64[::1] ldim_ptr = plan.ldim_ptr, ldims = plan.ldims, c_off = plan.c_off
    cdef const i64[::1] par_ptr = plan.par_ptr, par_kind = plan.par_kind, par_off = plan.par_off
    cdef const i64[::1] par_dim = plan.par_dim, par_widx = plan.par_widx
    cdef i64 q = inputs.shape[0], B = s0_in.shape[0], D = plan.state_dim
    cdef i64 CS = plan.cache_stride, W = plan.max_width, N = plan.n_nodes
    states_arr = np.empty((q + 1, B, D))
    states_arr[0] = s0_in
    cdef double[:, :, ::1] states = states_arr
    cache_arr = np.empty((q, B, CS)) if keep_cache else np.empty((1, 1, 1))
    cdef double[:, :, ::1] cache = cache_arr
    buf_arr = np.zeros(2 * W)
    cdef double[::1] buf = buf_arr
    cdef double* xa = &buf[0]
    cdef double* xb = &buf[W]
    cdef double* tmp
    cdef i64 h, b, n, d, k, i, j, nl, a_dim, o_dim, pos, col, off
    cdef double acc
    with nogil:
        for h in range(q):
            for b in range(B):
                for d in range(D):
                    states[h + 1, b, d] = states[h, b, d]
                for n in range(N):
                    _gather(par_kind, par_off, par_dim, par_widx, par_ptr[n], par_ptr[n + 1], pv,
                            states[h], inputs[h], b, times[h], xa)
                    nl = ldim_ptr[n + 1] - ldim_ptr[n] - 1
                    pos = theta_ptr[n]
                    col = c_off[n]
                    for k in range(nl):
                        a_dim = ldims[ldim_ptr[n] + k]
                        o_dim = ldims[ldim_ptr[n] + k + 1]
                        if keep_cache:
                            for i in range(a_dim):
                                cache[h, b, col + i] = xa[i]
                        col += a_dim
                        for j in range(o_dim):
                            xb[j] = pv[pos + a_dim * o_dim + j]
                        for i in range(a_dim):
                            acc = xa[i]
                            if acc != 0.0:
                                for j in range(o_dim):
                                    xb[j] += acc * pv[pos + i * o_dim + j]
                        if k < nl - 1:
                            for j in range(o_dim):
                                if xb[j] < 0.0:
                                    xb[j] = 0.0
                        pos += a_dim * o_dim + o_dim
                        tmp = xa
                        xa = xb
                        xb = tmp
                    off = node_off[n]
                    for d in range(node_dim[n]):
                        states[h + 1, b, off + d] += dt * xa[d]
    return states_arr, (cache_arr if keep_cache else None)


def backward(plan, pv_in, states_in, inputs_in, times_in, double dt, cache_in, gstates_in):
    cdef const double[::1] pv = np.ascontiguousarray(pv_in, dtype=np.float64)
    cdef const double[:, :, ::1] states = np.ascontiguousarray(states_in, dtype=np.float64)
    cdef const double[:, :, ::1] inputs = np.ascontiguousarray(inputs_in, dtype=np.float64)
    cdef const double[:, :, ::1] cache = np.ascontiguousarray(cache_in, dtype=np.float64)
    cdef const double[:, :, ::1] gstates = np.ascontiguousarray(gstates_in, dtype=np.float64)
    cdef const i64[::1] node_off = plan.node_off, node_dim = plan.node_dim, theta_ptr = plan.theta_ptr
    cdef const i64[::1] ldim_ptr = plan.ldim_ptr, ldims = plan.ldims, c_off = plan.c_off
    cdef const i64[::1] par_ptr = plan.par_ptr, par_kind = plan.par_kind, par_off = plan.par_off
    cdef const i64[::1] par_dim = plan.par_dim, par_widx = plan.par_widx
    cdef i64 q = inputs.shape[0], B = states.shape[1], D = plan.state_dim
    cdef i64 W = plan.max_width, N = plan.n_nodes
    dpv_arr = np.zeros(pv.shape[0])
    cdef double[::1] dpv = dpv_arr
    g_arr = np.array(gstates_in[q], dtype=np.float64, order="C")
    gn_arr = np.empty_like(g_arr)
    cdef double[:, ::1] g = g_arr
    cdef double[:, ::1] gn = gn_arr
    buf_arr = np.zeros(2 * W)
    cdef double[::1] buf = buf_arr
    cdef double* ga = &buf[0]
    cdef double* gb = &buf[W]
    cdef double* tmp
    # layer offsets of the current node: theta start and cache column of each layer input
    lw_arr = np.zeros(64, dtype=np.int64)
    lc_arr = np.zeros(64, dtype=np.int64)
    cdef i64[::1] lw = lw_arr
    cdef i64[::1] lc = lc_arr
    cdef i64 h, b, n, d, k, i, j, nl, a_dim, o_dim, pos, col, p, kind, poff, pdim, widx, wpos
    cdef double acc, gv, w, raw
    for n in range(N):
        if ldim_ptr[n + 1] - ldim_ptr[n] - 1 > 64:
            raise ValueError("too many MLP layers for the compiled kernel")
    with nogil:
        for h in range(q - 1, -1, -1):
            for b in range(B):
                for d in range(D):
                    gn[b, d] = g[b, d]
                for n in range(N):
                    nl = ldim_ptr[n + 1] - ldim_ptr[n] - 1
                    pos = theta_ptr[n]
                    col = c_off[n]
                    for k in range(nl):
                        a_dim = ldims[ldim_ptr[n] + k]
                        o_dim = ldims[ldim_ptr[n] + k + 1]
                        lw[k] = pos
                        lc[k] = col
                        pos += a_dim * o_dim + o_dim
                        col += a_dim
                    for d in range(node_dim[n]):
                        ga[d] = dt * g[b, node_off[n] + d]
                    for k in range(nl - 1, -1, -1):
                        a_dim = ldims[ldim_ptr[n] + k]
                        o_dim = ldims[ldim_ptr[n] + k + 1]
                        wpos = lw[k]
                        col = lc[k]
                        for j in range(o_dim):
                            dpv[wpos + a_dim * o_dim + j] += ga[j]
                        for i in range(a_dim):
                            acc = cache[h, b, col + i]
                            gv = 0.0
                            for j in range(o_dim):
                                dpv[wpos + i * o_dim + j] += acc * ga[j]
                                gv = gv + pv[wpos + i * o_dim + j] * ga[j]
                            if k > 0 and acc <= 0.0:
                                gv = 0.0
                            gb[i] = gv
                        tmp = ga
                        ga = gb
                        gb = tmp
                    col = 0
                    for p in range(par_ptr[n], par_ptr[n + 1]):
                        kind = par_kind[p]
                        poff = par_off[p]
                        pdim = par_dim[p]
                        widx = par_widx[p]
                        if kind == 2:
                            col += 1
                            continue
                        w = pv[widx] if widx >= 0 else 1.0
                        for d in range(pdim):
                            if kind == 0:
                                raw = states[h, b, poff + d]
                            else:
                                raw = inputs[h, b, poff + d]
                            if widx >= 0:
                                dpv[widx] += ga[col + d] * raw
                            if kind == 0:
                                gn[b, poff + d] += w * ga[col + d]
                        col += pdim
            for b in range(B):
                for d in range(D):
                    g[b, d] = gn[b, d] + gstates[h, b, d]
    return g_arr, dpv_arr
