"""Reference numpy implementation of the hot kernels.

The compiled module ``_ckernels`` exposes the same functions with the same
argument order and must agree with these to the last bit on finite inputs.
"""

import numpy as np

BACKEND = "python"


def _cmul(ar, ai, br, bi):
    return ar * br - ai * bi, ar * bi + ai * br


def _child_maps(ar, ai, at_r, at_i, f, r, lr, li, ltr, lti, lf, lrat):
    """Compose parent maps (N,) with system maps (m,) -> (N, m) arrays."""
    # conjugate the system map data where the parent reflects
    sgn = np.where(f, -1.0, 1.0)[:, None]
    bli = li[None, :] * sgn
    blti = lti[None, :] * sgn
    ar2, ai2 = ar[:, None], ai[:, None]
    nar, nai = _cmul(ar2, ai2, lr[None, :], bli)
    tr, ti = _cmul(ar2, ai2, ltr[None, :], blti)
    ntr = tr + at_r[:, None]
    nti = ti + at_i[:, None]
    nf = f[:, None] != lf[None, :]
    nr = r[:, None] * lrat[None, :]
    return nar, nai, ntr, nti, nf, nr


def _centers(ar, ai, tr, ti, f, cr, ci):
    sci = np.where(f, -ci, ci)
    xr, xi = _cmul(ar, ai, cr, sci)
    return xr + tr, xi + ti


def expand_pairs(U, V, sysmaps, c, R, tol, rel_slack, abs_slack):
    """One expansion round of a pair frontier.

    ``U`` and ``V`` are tuples ``(ar, ai, tr, ti, f, r)`` of 1-d arrays
    describing S_u and S_v for each pair.  ``sysmaps`` is the same layout for
    the m system maps.  Pairs whose both diameters ``2*R*r`` are <= tol are
    reported in ``done``.  Every other pair has its larger member (ties: u)
    replaced by its m children; children whose bounding disks are separated
    are dropped.

    Returns ``(done, parent, side, letter, U2, V2)`` where ``side`` is 0 when
    u was split and ``letter`` is the 1-based child letter.
    """
    uar, uai, utr, uti, uf, ur = U
    var, vai, vtr, vti, vf, vr = V
    lr, li, ltr, lti, lf, lrat = sysmaps
    m = lr.shape[0]
    cr, ci = c.real, c.imag

    du = 2.0 * R * ur
    dv = 2.0 * R * vr
    is_done = (du <= tol) & (dv <= tol)
    done = np.flatnonzero(is_done)
    act = np.flatnonzero(~is_done)
    split_u = ur[act] >= vr[act]

    def pick(a, b):
        return np.where(split_u, a[act], b[act])

    sar, sai, str_, sti, sf, sr = (pick(x, y) for x, y in zip(U, V))
    oar, oai, otr, oti, of, orr = (pick(y, x) for x, y in zip(U, V))

    nar, nai, ntr, nti, nf, nr = _child_maps(sar, sai, str_, sti, sf, sr, lr, li, ltr, lti, lf, lrat)
    # disk of each child and of the untouched member
    ccr, cci = _centers(nar, nai, ntr, nti, nf, cr, ci)
    ocr, oci = _centers(oar, oai, otr, oti, of, cr, ci)
    dist = np.hypot(ccr - ocr[:, None], cci - oci[:, None])
    reach = (R * nr + R * orr[:, None]) * (1.0 + rel_slack) + abs_slack
    keep = dist <= reach

    rows, cols = np.nonzero(keep)
    parent = act[rows]
    su = split_u[rows]
    side = np.where(su, 0, 1).astype(np.int8)
    letter = (cols + 1).astype(np.int16)

    child = tuple(x[rows, cols] for x in (nar, nai, ntr, nti, nf, nr))
    other = tuple(x[rows] for x in (oar, oai, otr, oti, of, orr))
    U2 = tuple(np.where(su, a, b) for a, b in zip(child, other))
    V2 = tuple(np.where(su, b, a) for a, b in zip(child, other))
    return done, parent, side, letter, U2, V2


def rasterize_disks(cx, cy, rad, h, rel_slack):
    """Integer cells (ix, iy) of the grid of size h meeting any of the disks.

    Cell (ix, iy) is the square [ix*h, (ix+1)*h] x [iy*h, (iy+1)*h].  The
    result may contain duplicates.
    """
    cx = np.asarray(cx, dtype=np.float64)
    cy = np.asarray(cy, dtype=np.float64)
    rad = np.asarray(rad, dtype=np.float64) * (1.0 + rel_slack)
    if cx.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    x0 = np.floor((cx - rad) / h).astype(np.int64)
    x1 = np.floor((cx + rad) / h).astype(np.int64)
    y0 = np.floor((cy - rad) / h).astype(np.int64)
    y1 = np.floor((cy + rad) / h).astype(np.int64)
    span = int(max((x1 - x0).max(), (y1 - y0).max())) + 1
    out = []
    offs = np.arange(span, dtype=np.int64)
    for dx in offs:
        ix = x0 + dx
        okx = ix <= x1
        # distance from center to the cell's x-extent
        gx = np.maximum(np.maximum(ix * h - cx, cx - (ix + 1) * h), 0.0)
        for dy in offs:
            iy = y0 + dy
            ok = okx & (iy <= y1)
            gy = np.maximum(np.maximum(iy * h - cy, cy - (iy + 1) * h), 0.0)
            ok &= gx * gx + gy * gy <= rad * rad
            if ok.any():
                out.append(np.stack([ix[ok], iy[ok]], axis=1))
    if not out:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(out)
