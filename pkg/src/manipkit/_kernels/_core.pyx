# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
# cython: initializedcheck=False
"""Compiled kernel implementations.

Mirrors _ref function-for-function with identical data layouts,
iteration order, and early-exit rules; keep the two in lockstep when
editing either. See _ref for the layout documentation.
"""

from libc.math cimport INFINITY, ceil, cos, fabs, sin, sqrt

import numpy as np

cdef double _TERNARY_TOL = 1e-12
cdef int _TERNARY_MAX = 200


# ------------------------------------------------------------ small math

cdef inline double _clamp01(double v) noexcept:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


cdef inline void _mat_vec(const double* R, const double* v, double* out) noexcept:
    out[0] = R[0] * v[0] + R[1] * v[1] + R[2] * v[2]
    out[1] = R[3] * v[0] + R[4] * v[1] + R[5] * v[2]
    out[2] = R[6] * v[0] + R[7] * v[1] + R[8] * v[2]


cdef inline void _mat_tvec(const double* R, const double* v, double* out) noexcept:
    # R transposed times v (column dots)
    out[0] = R[0] * v[0] + R[3] * v[1] + R[6] * v[2]
    out[1] = R[1] * v[0] + R[4] * v[1] + R[7] * v[2]
    out[2] = R[2] * v[0] + R[5] * v[1] + R[8] * v[2]


cdef inline void _mat_mul(const double* A, const double* B, double* out) noexcept:
    cdef int r, c
    for r in range(3):
        for c in range(3):
            out[r * 3 + c] = (
                A[r * 3] * B[c]
                + A[r * 3 + 1] * B[3 + c]
                + A[r * 3 + 2] * B[6 + c]
            )


cdef inline void _cross(const double* a, const double* b, double* out) noexcept:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _norm3(const double* v) noexcept:
    return sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


cdef void _rodrigues(const double* axis, double angle, double* R) noexcept:
    cdef double x = axis[0]
    cdef double y = axis[1]
    cdef double z = axis[2]
    cdef double c = cos(angle)
    cdef double s = sin(angle)
    cdef double t = 1.0 - c
    R[0] = c + t * x * x
    R[1] = t * x * y - s * z
    R[2] = t * x * z + s * y
    R[3] = t * x * y + s * z
    R[4] = c + t * y * y
    R[5] = t * y * z - s * x
    R[6] = t * x * z - s * y
    R[7] = t * y * z + s * x
    R[8] = c + t * z * z


cdef void _compose12(const double* a, const double* b, double* out) noexcept:
    # frame a then frame b in a's coordinates
    _mat_vec(a + 3, b, out)
    out[0] += a[0]
    out[1] += a[1]
    out[2] += a[2]
    _mat_mul(a + 3, b + 3, out + 3)


def frame_compose(double[:] a, double[:] b):
    """Compose two 12-float frames: a then b in a's coordinates."""
    cdef double ca[12]
    cdef double cb[12]
    cdef int i
    for i in range(12):
        ca[i] = a[i]
        cb[i] = b[i]
    out = np.empty(12)
    cdef double[::1] vo = out
    _compose12(ca, cb, &vo[0])
    return out


# ---------------------------------------------------------------- chains

cdef void _fk_core(
    int[::1] jkind, double[:, ::1] jaxis, double[:, ::1] jorigin,
    int[::1] qmap, double[:] base, double[:] q, double[:, ::1] frames,
) noexcept:
    cdef int nj = jkind.shape[0]
    cdef int i, k
    cdef double qv
    cdef double tmp[3]
    cdef double rot[9]
    cdef double Rj[9]
    for k in range(12):
        frames[0, k] = base[k]
    for i in range(nj):
        # p = p_parent + R_parent @ origin_p; R = R_parent @ origin_R
        _mat_vec(&frames[i, 3], &jorigin[i, 0], &frames[i + 1, 0])
        frames[i + 1, 0] += frames[i, 0]
        frames[i + 1, 1] += frames[i, 1]
        frames[i + 1, 2] += frames[i, 2]
        _mat_mul(&frames[i, 3], &jorigin[i, 3], Rj)
        if jkind[i] == 0:
            qv = q[qmap[i]]
            _rodrigues(&jaxis[i, 0], qv, rot)
            _mat_mul(Rj, rot, &frames[i + 1, 3])
        else:
            if jkind[i] == 1:
                qv = q[qmap[i]]
                tmp[0] = jaxis[i, 0] * qv
                tmp[1] = jaxis[i, 1] * qv
                tmp[2] = jaxis[i, 2] * qv
                _mat_vec(Rj, tmp, rot)  # reuse rot[0:3] as scratch
                frames[i + 1, 0] += rot[0]
                frames[i + 1, 1] += rot[1]
                frames[i + 1, 2] += rot[2]
            for k in range(9):
                frames[i + 1, 3 + k] = Rj[k]


def fk_frames(
    int[::1] jkind, double[:, ::1] jaxis, double[:, ::1] jorigin,
    int[::1] qmap, double[:] base, double[:] q,
):
    """World frame of every link, chain order; row 0 is the base link."""
    frames = np.empty((jkind.shape[0] + 1, 12))
    cdef double[:, ::1] vf = frames
    _fk_core(jkind, jaxis, jorigin, qmap, base, q, vf)
    return frames


def jacobian_from_frames(
    double[:, ::1] frames, int[::1] jkind, double[:, ::1] jaxis,
    double[:, ::1] jorigin, int[::1] qmap, double[:] ee,
):
    """Geometric Jacobian at the ee frame given fk_frames output."""
    cdef int nj = jkind.shape[0]
    cdef int dof = 0
    cdef int i, col
    for i in range(nj):
        if qmap[i] + 1 > dof:
            dof = qmap[i] + 1
    J = np.zeros((6, dof))
    cdef double[:, ::1] vj = J
    cdef double p_ee[3]
    cdef double pj[3]
    cdef double z[3]
    cdef double lin[3]
    cdef double diff[3]
    cdef double Rj[9]
    p_ee[0] = ee[0]
    p_ee[1] = ee[1]
    p_ee[2] = ee[2]
    for i in range(nj):
        if jkind[i] == 2:
            continue
        _mat_vec(&frames[i, 3], &jorigin[i, 0], pj)
        pj[0] += frames[i, 0]
        pj[1] += frames[i, 1]
        pj[2] += frames[i, 2]
        _mat_mul(&frames[i, 3], &jorigin[i, 3], Rj)
        _mat_vec(Rj, &jaxis[i, 0], z)
        col = qmap[i]
        if jkind[i] == 0:
            diff[0] = p_ee[0] - pj[0]
            diff[1] = p_ee[1] - pj[1]
            diff[2] = p_ee[2] - pj[2]
            _cross(z, diff, lin)
            vj[0, col] = lin[0]
            vj[1, col] = lin[1]
            vj[2, col] = lin[2]
            vj[3, col] = z[0]
            vj[4, col] = z[1]
            vj[5, col] = z[2]
        else:
            vj[0, col] = z[0]
            vj[1, col] = z[1]
            vj[2, col] = z[2]
    return J


# ---------------------------------------------------------------- shapes

cdef inline void _seg_endpoints(const double* desc, double* a, double* b) noexcept:
    # capsule axis is the rotation's z column
    cdef double hl = desc[13]
    cdef double ux = desc[5] * hl
    cdef double uy = desc[8] * hl
    cdef double uz = desc[11] * hl
    a[0] = desc[0] - ux
    a[1] = desc[1] - uy
    a[2] = desc[2] - uz
    b[0] = desc[0] + ux
    b[1] = desc[1] + uy
    b[2] = desc[2] + uz


cdef double _point_segment_dist(
    const double* p, const double* a, const double* b
) noexcept:
    cdef double ab[3]
    cdef double d[3]
    cdef double denom, t
    ab[0] = b[0] - a[0]
    ab[1] = b[1] - a[1]
    ab[2] = b[2] - a[2]
    denom = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2]
    if denom < 1e-18:
        t = 0.0
    else:
        t = _clamp01(
            ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] + (p[2] - a[2]) * ab[2])
            / denom
        )
    d[0] = p[0] - (a[0] + t * ab[0])
    d[1] = p[1] - (a[1] + t * ab[1])
    d[2] = p[2] - (a[2] + t * ab[2])
    return _norm3(d)


cdef double _segment_segment_dist(
    const double* p1, const double* q1, const double* p2, const double* q2
) noexcept:
    # closest points between segments (Ericson, Real-Time Collision Detection)
    cdef double d1[3]
    cdef double d2[3]
    cdef double r[3]
    cdef double w[3]
    cdef double a, b, c, e, f, denom, s, t
    cdef int k
    for k in range(3):
        d1[k] = q1[k] - p1[k]
        d2[k] = q2[k] - p2[k]
        r[k] = p1[k] - p2[k]
    a = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]
    e = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]
    f = d2[0] * r[0] + d2[1] * r[1] + d2[2] * r[2]
    if a < 1e-18 and e < 1e-18:
        return _norm3(r)
    if a < 1e-18:
        t = _clamp01(f / e)
        s = 0.0
    else:
        c = d1[0] * r[0] + d1[1] * r[1] + d1[2] * r[2]
        if e < 1e-18:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            b = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
            denom = a * e - b * b
            s = _clamp01((b * f - c * e) / denom) if denom > 1e-18 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    for k in range(3):
        w[k] = (p1[k] + d1[k] * s) - (p2[k] + d2[k] * t)
    return _norm3(w)


cdef double _point_box_signed(const double* p, const double* desc) noexcept:
    # positive outside, negative inside (max face slack)
    cdef double rel[3]
    cdef double local[3]
    cdef double excess[3]
    cdef double worst, acc
    cdef int k
    rel[0] = p[0] - desc[0]
    rel[1] = p[1] - desc[1]
    rel[2] = p[2] - desc[2]
    _mat_tvec(desc + 3, rel, local)
    worst = -INFINITY
    for k in range(3):
        excess[k] = fabs(local[k]) - desc[12 + k]
        if excess[k] > worst:
            worst = excess[k]
    if worst <= 0.0:
        return worst
    acc = 0.0
    for k in range(3):
        if excess[k] > 0.0:
            acc += excess[k] * excess[k]
    return sqrt(acc)


cdef inline double _point_box_unsigned(const double* p, const double* desc) noexcept:
    cdef double d = _point_box_signed(p, desc)
    return d if d > 0.0 else 0.0


cdef double _capsule_box_dist(const double* cap, const double* box) noexcept:
    cdef double a[3]
    cdef double b[3]
    cdef double probe[3]
    cdef double r = cap[12]
    cdef double lo = 0.0
    cdef double hi = 1.0
    cdef double fa, fb, m1, m2, f1, f2, best, mid, inside, v
    cdef int it, k
    _seg_endpoints(cap, a, b)
    fa = _point_box_unsigned(a, box)
    fb = _point_box_unsigned(b, box)
    # unsigned point-box distance is convex along the segment
    for it in range(_TERNARY_MAX):
        if hi - lo < _TERNARY_TOL:
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        for k in range(3):
            probe[k] = a[k] + (b[k] - a[k]) * m1
        f1 = _point_box_unsigned(probe, box)
        for k in range(3):
            probe[k] = a[k] + (b[k] - a[k]) * m2
        f2 = _point_box_unsigned(probe, box)
        if f1 < f2:
            hi = m2
        else:
            lo = m1
    mid = 0.5 * (lo + hi)
    for k in range(3):
        probe[k] = a[k] + (b[k] - a[k]) * mid
    best = _point_box_unsigned(probe, box)
    if fa < best:
        best = fa
    if fb < best:
        best = fb
    if best > 0.0:
        return best - r
    # segment reaches the box interior; depth reported as the capsule
    # radius plus the deepest-signed endpoint/midpoint probe (a bound,
    # not the exact MTV)
    inside = _point_box_signed(probe, box)
    v = _point_box_signed(a, box)
    if v < inside:
        inside = v
    v = _point_box_signed(b, box)
    if v < inside:
        inside = v
    if inside >= 0.0:
        inside = 0.0
    return inside - r


cdef void _sat_axis(
    const double* u, const double* ha, const double* hb,
    const double* C, const double* cvec,
    double* best_gap, double* min_overlap,
) noexcept:
    cdef double ra, rb, gap, w
    cdef int j
    ra = ha[0] * fabs(u[0]) + ha[1] * fabs(u[1]) + ha[2] * fabs(u[2])
    rb = 0.0
    for j in range(3):
        w = u[0] * C[j] + u[1] * C[3 + j] + u[2] * C[6 + j]
        rb += hb[j] * fabs(w)
    gap = fabs(cvec[0] * u[0] + cvec[1] * u[1] + cvec[2] * u[2]) - ra - rb
    if gap > best_gap[0]:
        best_gap[0] = gap
    if gap <= 0.0 and -gap < min_overlap[0]:
        min_overlap[0] = -gap


cdef double _box_box_dist(const double* da, const double* db) noexcept:
    cdef double C[9]
    cdef double cvec[3]
    cdef double rel[3]
    cdef double e[3]
    cdef double col[3]
    cdef double u[3]
    cdef double best_gap = -INFINITY
    cdef double min_overlap = INFINITY
    cdef double n
    cdef int i, j, r
    # C = Ra^T @ Rb (B's axes in A's frame); cvec = Ra^T @ (pb - pa)
    for i in range(3):
        for j in range(3):
            C[i * 3 + j] = (
                da[3 + i] * db[3 + j]
                + da[6 + i] * db[6 + j]
                + da[9 + i] * db[9 + j]
            )
    rel[0] = db[0] - da[0]
    rel[1] = db[1] - da[1]
    rel[2] = db[2] - da[2]
    _mat_tvec(da + 3, rel, cvec)
    for i in range(3):
        e[0] = 1.0 if i == 0 else 0.0
        e[1] = 1.0 if i == 1 else 0.0
        e[2] = 1.0 if i == 2 else 0.0
        _sat_axis(e, da + 12, db + 12, C, cvec, &best_gap, &min_overlap)
    for j in range(3):
        col[0] = C[j]
        col[1] = C[3 + j]
        col[2] = C[6 + j]
        _sat_axis(col, da + 12, db + 12, C, cvec, &best_gap, &min_overlap)
    for i in range(3):
        for j in range(3):
            e[0] = 1.0 if i == 0 else 0.0
            e[1] = 1.0 if i == 1 else 0.0
            e[2] = 1.0 if i == 2 else 0.0
            col[0] = C[j]
            col[1] = C[3 + j]
            col[2] = C[6 + j]
            _cross(e, col, u)
            n = _norm3(u)
            if n > 1e-9:
                for r in range(3):
                    u[r] /= n
                _sat_axis(u, da + 12, db + 12, C, cvec, &best_gap, &min_overlap)
    if best_gap > 0.0:
        return best_gap  # lower bound on the true distance
    return -min_overlap


cdef double _pair_dist(int ka, const double* da, int kb, const double* db) noexcept:
    cdef const double* tmp
    cdef int kt
    cdef double a1[3]
    cdef double b1[3]
    cdef double a2[3]
    cdef double b2[3]
    cdef double d[3]
    if ka > kb:
        kt = ka
        ka = kb
        kb = kt
        tmp = da
        da = db
        db = tmp
    if ka == 0:
        if kb == 0:
            d[0] = da[0] - db[0]
            d[1] = da[1] - db[1]
            d[2] = da[2] - db[2]
            return _norm3(d) - da[12] - db[12]
        if kb == 1:
            _seg_endpoints(db, a2, b2)
            return _point_segment_dist(da, a2, b2) - da[12] - db[12]
        return _point_box_signed(da, db) - da[12]
    if ka == 1:
        if kb == 1:
            _seg_endpoints(da, a1, b1)
            _seg_endpoints(db, a2, b2)
            return _segment_segment_dist(a1, b1, a2, b2) - da[12] - db[12]
        return _capsule_box_dist(da, db)
    return _box_box_dist(da, db)


def pair_distance(int ka, double[:] da, int kb, double[:] db):
    """Signed distance between two posed primitives; <= 0 means contact.
    Exact for sphere/capsule pairs and sphere-box; box pairs are exact as
    a boolean with a conservative (lower-bound) free distance."""
    cdef double ca[15]
    cdef double cb[15]
    cdef int i
    for i in range(15):
        ca[i] = da[i]
        cb[i] = db[i]
    return _pair_dist(ka, ca, kb, cb)


# -------------------------------------------------------------- auditing

cdef void _desc_aabb(int kind, const double* desc, double* lo, double* hi) noexcept:
    cdef double a[3]
    cdef double b[3]
    cdef double r, half
    cdef int k
    if kind == 0:
        r = desc[12]
        for k in range(3):
            lo[k] = desc[k] - r
            hi[k] = desc[k] + r
        return
    if kind == 1:
        _seg_endpoints(desc, a, b)
        r = desc[12]
        for k in range(3):
            lo[k] = (a[k] if a[k] < b[k] else b[k]) - r
            hi[k] = (a[k] if a[k] > b[k] else b[k]) + r
        return
    for k in range(3):
        half = (
            fabs(desc[3 + k * 3]) * desc[12]
            + fabs(desc[4 + k * 3]) * desc[13]
            + fabs(desc[5 + k * 3]) * desc[14]
        )
        lo[k] = desc[k] - half
        hi[k] = desc[k] + half


cdef double _bounds_slack(
    int kind, const double* desc, const double* blo, const double* bhi
) noexcept:
    # smallest margin between the shape's AABB and the bounds walls
    cdef double lo[3]
    cdef double hi[3]
    cdef double worst = INFINITY
    cdef double v
    cdef int k
    _desc_aabb(kind, desc, lo, hi)
    for k in range(3):
        v = lo[k] - blo[k]
        if v < worst:
            worst = v
        v = bhi[k] - hi[k]
        if v < worst:
            worst = v
    return worst


cdef inline void _make_desc(
    const double* frame, const double* offset, const double* dims, double* out
) noexcept:
    _compose12(frame, offset, out)
    out[12] = dims[0]
    out[13] = dims[1]
    out[14] = dims[2]


cdef int _cfg_core(
    int[::1] jkind, double[:, ::1] jaxis, double[:, ::1] jorigin,
    int[::1] qmap, double[:] base, double[:] q,
    int[::1] lkind, double[:, ::1] lparams, double[:, ::1] loffset,
    int ee_idx, double[:] ee_offset,
    int[::1] okind, double[:, ::1] odesc,
    int att_kind, double[:] att_params, double[:] att_tf,
    double[:] blo, double[:] bhi, int[:, ::1] spairs,
    double[:, ::1] frames, double[:, ::1] ldesc,
    int* out_ia, int* out_ib, double* out_clear,
) noexcept:
    cdef int nl = lkind.shape[0]
    cdef int no = okind.shape[0]
    cdef int has_att = att_kind >= 0
    cdef double adesc[15]
    cdef double ee[12]
    cdef double eoff[12]
    cdef double atf[12]
    cdef double apar[3]
    cdef double cblo[3]
    cdef double cbhi[3]
    cdef double clearance = INFINITY
    cdef double d
    cdef int i, j, k
    _fk_core(jkind, jaxis, jorigin, qmap, base, q, frames)
    for i in range(nl):
        if lkind[i] >= 0:
            _make_desc(&frames[i, 0], &loffset[i, 0], &lparams[i, 0], &ldesc[i, 0])
    if has_att:
        for k in range(12):
            eoff[k] = ee_offset[k]
            atf[k] = att_tf[k]
        for k in range(3):
            apar[k] = att_params[k]
        _compose12(&frames[ee_idx, 0], eoff, ee)
        _make_desc(ee, atf, apar, adesc)
    for k in range(3):
        cblo[k] = blo[k]
        cbhi[k] = bhi[k]

    for i in range(nl):
        if lkind[i] < 0:
            continue
        d = _bounds_slack(lkind[i], &ldesc[i, 0], cblo, cbhi)
        if d <= 0.0:
            out_ia[0] = i
            out_ib[0] = -1
            out_clear[0] = d
            return 2
        if d < clearance:
            clearance = d
    if has_att:
        d = _bounds_slack(att_kind, adesc, cblo, cbhi)
        if d <= 0.0:
            out_ia[0] = -2
            out_ib[0] = -1
            out_clear[0] = d
            return 2
        if d < clearance:
            clearance = d
    for i in range(nl):
        if lkind[i] < 0:
            continue
        for j in range(no):
            d = _pair_dist(lkind[i], &ldesc[i, 0], okind[j], &odesc[j, 0])
            if d <= 0.0:
                out_ia[0] = i
                out_ib[0] = j
                out_clear[0] = d
                return 1
            if d < clearance:
                clearance = d
    if has_att:
        for j in range(no):
            d = _pair_dist(att_kind, adesc, okind[j], &odesc[j, 0])
            if d <= 0.0:
                out_ia[0] = -2
                out_ib[0] = j
                out_clear[0] = d
                return 1
            if d < clearance:
                clearance = d
    for k in range(spairs.shape[0]):
        i = spairs[k, 0]
        j = spairs[k, 1]
        d = _pair_dist(lkind[i], &ldesc[i, 0], lkind[j], &ldesc[j, 0])
        if d <= 0.0:
            out_ia[0] = i
            out_ib[0] = j
            out_clear[0] = d
            return 3
        if d < clearance:
            clearance = d
    out_ia[0] = -1
    out_ib[0] = -1
    out_clear[0] = clearance
    return 0


def config_check(
    int[::1] jkind, double[:, ::1] jaxis, double[:, ::1] jorigin,
    int[::1] qmap, double[:] base, double[:] q,
    int[::1] lkind, double[:, ::1] lparams, double[:, ::1] loffset,
    int ee_idx, double[:] ee_offset,
    int[::1] okind, double[:, ::1] odesc,
    int att_kind, double[:] att_params, double[:] att_tf,
    double[:] blo, double[:] bhi, int[:, ::1] spairs,
):
    """Full collision audit of one configuration; see _ref.config_check."""
    frames = np.empty((jkind.shape[0] + 1, 12))
    ldesc = np.empty((lkind.shape[0], 15))
    cdef double[:, ::1] vf = frames
    cdef double[:, ::1] vl = ldesc
    cdef int ia, ib
    cdef double clearance
    cdef int code = _cfg_core(
        jkind, jaxis, jorigin, qmap, base, q,
        lkind, lparams, loffset, ee_idx, ee_offset,
        okind, odesc, att_kind, att_params, att_tf,
        blo, bhi, spairs, vf, vl, &ia, &ib, &clearance,
    )
    return code, ia, ib, clearance


def edge_check(
    int[::1] jkind, double[:, ::1] jaxis, double[:, ::1] jorigin,
    int[::1] qmap, double[:] base,
    int[::1] lkind, double[:, ::1] lparams, double[:, ::1] loffset,
    int ee_idx, double[:] ee_offset,
    int[::1] okind, double[:, ::1] odesc,
    int att_kind, double[:] att_params, double[:] att_tf,
    double[:] blo, double[:] bhi, int[:, ::1] spairs,
    double[:] q_from, double[:] q_to, double resolution,
):
    """Validate the straight joint-space segment at spacing <= resolution,
    endpoints included; see _ref.edge_check."""
    cdef int dofn = q_from.shape[0]
    frames = np.empty((jkind.shape[0] + 1, 12))
    ldesc = np.empty((lkind.shape[0], 15))
    delta = np.empty(dofn)
    qbuf = np.empty(dofn)
    cdef double[:, ::1] vf = frames
    cdef double[:, ::1] vl = ldesc
    cdef double[::1] vd = delta
    cdef double[::1] vq = qbuf
    cdef double span = 0.0
    cdef double t
    cdef int n, i, k, code
    cdef int ia, ib
    cdef double clearance
    for k in range(dofn):
        vd[k] = q_to[k] - q_from[k]
        if fabs(vd[k]) > span:
            span = fabs(vd[k])
    if span > 0.0:
        n = <int>ceil(span / resolution)
        if n < 1:
            n = 1
    else:
        n = 0
    for i in range(n + 1):
        t = (<double>i) / n if n else 0.0
        for k in range(dofn):
            vq[k] = q_from[k] + vd[k] * t
        code = _cfg_core(
            jkind, jaxis, jorigin, qmap, base, vq,
            lkind, lparams, loffset, ee_idx, ee_offset,
            okind, odesc, att_kind, att_params, att_tf,
            blo, bhi, spairs, vf, vl, &ia, &ib, &clearance,
        )
        if code != 0:
            return 0, code, ia, ib
    return 1, 0, -1, -1
