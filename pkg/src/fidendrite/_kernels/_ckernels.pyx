# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_pykernels`` for semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport hypot, floor

cnp.import_array()

BACKEND = "cython"


def expand_pairs(U, V, sysmaps, c, double R, double tol, double rel_slack, double abs_slack):
    cdef const double[:] uar = U[0], uai = U[1], utr = U[2], uti = U[3], ur = U[5]
    cdef const double[:] var = V[0], vai = V[1], vtr = V[2], vti = V[3], vr = V[5]
    cdef const cnp.npy_bool[:] uf = U[4], vf = V[4]
    cdef const double[:] lr = sysmaps[0], li = sysmaps[1], ltr = sysmaps[2], lti = sysmaps[3]
    cdef const double[:] lrat = sysmaps[5]
    cdef const cnp.npy_bool[:] lf = sysmaps[4]
    cdef Py_ssize_t n = uar.shape[0], m = lr.shape[0]
    cdef double cr = c.real, ci = c.imag

    cdef Py_ssize_t i, k, nd = 0, na = 0, cnt = 0
    cdef cnp.ndarray[cnp.int64_t] done_a = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] done = done_a
    cdef Py_ssize_t cap = (n if n > 0 else 1) * m
    o_parent = np.empty(cap, dtype=np.int64)
    o_side = np.empty(cap, dtype=np.int8)
    o_letter = np.empty(cap, dtype=np.int16)
    o_u = [np.empty(cap) for _ in range(4)]
    o_uf = np.empty(cap, dtype=np.bool_)
    o_ur = np.empty(cap)
    o_v = [np.empty(cap) for _ in range(4)]
    o_vf = np.empty(cap, dtype=np.bool_)
    o_vr = np.empty(cap)
    cdef cnp.int64_t[:] p_parent = o_parent
    cdef cnp.int8_t[:] p_side = o_side
    cdef cnp.int16_t[:] p_letter = o_letter
    cdef double[:] pu0 = o_u[0], pu1 = o_u[1], pu2 = o_u[2], pu3 = o_u[3], pur = o_ur
    cdef double[:] pv0 = o_v[0], pv1 = o_v[1], pv2 = o_v[2], pv3 = o_v[3], pvr = o_vr
    cdef cnp.npy_bool[:] puf = o_uf, pvf = o_vf

    cdef double sar, sai, s_tr, s_ti, srr, oar, oai, otr, oti, orr
    cdef bint sf, of, splitu, nf
    cdef double bli, blti, nar, nai, ntr, nti, nr, sci, ccr, cci, ocr, oci, dist, reach

    for i in range(n):
        if 2.0 * R * ur[i] <= tol and 2.0 * R * vr[i] <= tol:
            done[nd] = i
            nd += 1
            continue
        splitu = ur[i] >= vr[i]
        if splitu:
            sar, sai, s_tr, s_ti, sf, srr = uar[i], uai[i], utr[i], uti[i], uf[i], ur[i]
            oar, oai, otr, oti, of, orr = var[i], vai[i], vtr[i], vti[i], vf[i], vr[i]
        else:
            sar, sai, s_tr, s_ti, sf, srr = var[i], vai[i], vtr[i], vti[i], vf[i], vr[i]
            oar, oai, otr, oti, of, orr = uar[i], uai[i], utr[i], uti[i], uf[i], ur[i]
        sci = -ci if of else ci
        ocr = (oar * cr - oai * sci) + otr
        oci = (oar * sci + oai * cr) + oti
        for k in range(m):
            if sf:
                bli = li[k] * -1.0
                blti = lti[k] * -1.0
            else:
                bli = li[k] * 1.0
                blti = lti[k] * 1.0
            nar = sar * lr[k] - sai * bli
            nai = sar * bli + sai * lr[k]
            ntr = (sar * ltr[k] - sai * blti) + s_tr
            nti = (sar * blti + sai * ltr[k]) + s_ti
            nf = sf != lf[k]
            nr = srr * lrat[k]
            sci = -ci if nf else ci
            ccr = (nar * cr - nai * sci) + ntr
            cci = (nar * sci + nai * cr) + nti
            dist = hypot(ccr - ocr, cci - oci)
            reach = (R * nr + R * orr) * (1.0 + rel_slack) + abs_slack
            if dist <= reach:
                p_parent[cnt] = i
                p_letter[cnt] = k + 1
                if splitu:
                    p_side[cnt] = 0
                    pu0[cnt] = nar; pu1[cnt] = nai; pu2[cnt] = ntr; pu3[cnt] = nti
                    puf[cnt] = nf; pur[cnt] = nr
                    pv0[cnt] = oar; pv1[cnt] = oai; pv2[cnt] = otr; pv3[cnt] = oti
                    pvf[cnt] = of; pvr[cnt] = orr
                else:
                    p_side[cnt] = 1
                    pv0[cnt] = nar; pv1[cnt] = nai; pv2[cnt] = ntr; pv3[cnt] = nti
                    pvf[cnt] = nf; pvr[cnt] = nr
                    pu0[cnt] = oar; pu1[cnt] = oai; pu2[cnt] = otr; pu3[cnt] = oti
                    puf[cnt] = of; pur[cnt] = orr
                cnt += 1

    U2 = (o_u[0][:cnt], o_u[1][:cnt], o_u[2][:cnt], o_u[3][:cnt], o_uf[:cnt], o_ur[:cnt])
    V2 = (o_v[0][:cnt], o_v[1][:cnt], o_v[2][:cnt], o_v[3][:cnt], o_vf[:cnt], o_vr[:cnt])
    return done_a[:nd], o_parent[:cnt], o_side[:cnt], o_letter[:cnt], U2, V2


def rasterize_disks(cx, cy, rad, double h, double rel_slack):
    cdef const double[:] x = np.ascontiguousarray(cx, dtype=np.float64)
    cdef const double[:] y = np.ascontiguousarray(cy, dtype=np.float64)
    cdef const double[:] r = np.ascontiguousarray(rad, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i, cnt = 0, cap
    cdef long long ix, iy, x0, x1, y0, y1
    cdef double rr, gx, gy, a, b
    if n == 0:
        return np.empty((0, 2), dtype=np.int64)
    cap = 16 * n + 16
    out = np.empty((cap, 2), dtype=np.int64)
    cdef cnp.int64_t[:, :] o = out
    for i in range(n):
        rr = r[i] * (1.0 + rel_slack)
        x0 = <long long>floor((x[i] - rr) / h)
        x1 = <long long>floor((x[i] + rr) / h)
        y0 = <long long>floor((y[i] - rr) / h)
        y1 = <long long>floor((y[i] + rr) / h)
        for ix in range(x0, x1 + 1):
            a = ix * h - x[i]
            b = x[i] - (ix + 1) * h
            gx = a if a > b else b
            if gx < 0.0:
                gx = 0.0
            for iy in range(y0, y1 + 1):
                a = iy * h - y[i]
                b = y[i] - (iy + 1) * h
                gy = a if a > b else b
                if gy < 0.0:
                    gy = 0.0
                if gx * gx + gy * gy <= rr * rr:
                    if cnt == cap:
                        cap *= 2
                        out = np.resize(out, (cap, 2))
                        o = out
                    o[cnt, 0] = ix
                    o[cnt, 1] = iy
                    cnt += 1
    return out[:cnt]
