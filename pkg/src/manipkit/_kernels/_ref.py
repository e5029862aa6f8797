"""Reference kernel implementations (pure numpy).

The compiled backend (_core) mirrors this module function-for-function
with identical iteration order and early-exit rules; keep the two in
lockstep when editing either.

Data layouts shared by both backends:
  frame (12,): world position xyz + row-major 3x3 rotation
  shape descriptor (15,): frame (12) + per-kind dimensions (3)
  shape kinds: 0 sphere (d0=radius), 1 capsule (d0=radius, d1=half
  length, axis local z), 2 box (d0..d2 half-extents). Cylinders are
  converted to enclosing capsules before reaching this layer.
  joint kinds: 0 revolute, 1 prismatic, 2 fixed.

config_check return codes: 0 free, 1 obstacle hit, 2 out of bounds,
3 self collision. ia is a link index (-2 means the attached object),
ib an obstacle array index or second link index. Distance <= 0 counts
as collision everywhere (tangency collides).
"""

import numpy as np

_TERNARY_TOL = 1e-12
_TERNARY_MAX = 200


def _rodrigues(axis, angle):
    x, y, z = axis
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    return np.array(
        [
            [c + t * x * x, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, c + t * y * y, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, c + t * z * z],
        ]
    )


def frame_compose(a, b):
    """Compose two 12-float frames: a then b in a's coordinates."""
    out = np.empty(12)
    Ra = a[3:].reshape(3, 3)
    out[:3] = a[:3] + Ra @ b[:3]
    out[3:] = (Ra @ b[3:].reshape(3, 3)).reshape(9)
    return out


def fk_frames(jkind, jaxis, jorigin, qmap, base, q):
    """World frame of every link, chain order; row 0 is the base link."""
    nj = jkind.shape[0]
    frames = np.empty((nj + 1, 12))
    frames[0] = base
    for i in range(nj):
        pp = frames[i, :3]
        Rp = frames[i, 3:].reshape(3, 3)
        p = pp + Rp @ jorigin[i, :3]
        R = Rp @ jorigin[i, 3:].reshape(3, 3)
        k = jkind[i]
        if k == 0:
            R = R @ _rodrigues(jaxis[i], q[qmap[i]])
        elif k == 1:
            p = p + R @ (jaxis[i] * q[qmap[i]])
        frames[i + 1, :3] = p
        frames[i + 1, 3:] = R.reshape(9)
    return frames


def jacobian_from_frames(frames, jkind, jaxis, jorigin, qmap, ee):
    """Geometric Jacobian at the ee frame given fk_frames output."""
    nj = jkind.shape[0]
    dof = int(qmap.max()) + 1 if nj else 0
    J = np.zeros((6, dof))
    p_ee = ee[:3]
    for i in range(nj):
        if jkind[i] == 2:
            continue
        Rp = frames[i, 3:].reshape(3, 3)
        pj = frames[i, :3] + Rp @ jorigin[i, :3]
        z = (Rp @ jorigin[i, 3:].reshape(3, 3)) @ jaxis[i]
        col = qmap[i]
        if jkind[i] == 0:
            J[:3, col] = np.cross(z, p_ee - pj)
            J[3:, col] = z
        else:
            J[:3, col] = z
    return J


# ---------------------------------------------------------------- shapes


def _seg_endpoints(desc):
    p = desc[:3]
    axis = desc[3:12].reshape(3, 3)[:, 2]
    hl = desc[13]
    return p - axis * hl, p + axis * hl


def _point_segment_dist(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom < 1e-18 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _segment_segment_dist(p1, q1, p2, q2):
    # closest points between segments (Ericson, Real-Time Collision Detection)
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a < 1e-18 and e < 1e-18:
        return float(np.linalg.norm(r))
    if a < 1e-18:
        t = np.clip(f / e, 0.0, 1.0)
        s = 0.0
    else:
        c = float(d1 @ r)
        if e < 1e-18:
            t = 0.0
            s = np.clip(-c / a, 0.0, 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-18 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t = 1.0
                s = np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm((p1 + d1 * s) - (p2 + d2 * t)))


def _point_box_signed(p, desc):
    """Signed distance point to box: positive outside, negative inside
    (max face slack)."""
    R = desc[3:12].reshape(3, 3)
    local = R.T @ (p - desc[:3])
    h = desc[12:15]
    excess = np.abs(local) - h
    if np.all(excess <= 0.0):
        return float(np.max(excess))
    outside = np.maximum(excess, 0.0)
    return float(np.linalg.norm(outside))


def _point_box_unsigned(p, desc):
    d = _point_box_signed(p, desc)
    return d if d > 0.0 else 0.0


def _capsule_box_dist(cap, box):
    a, b = _seg_endpoints(cap)
    r = cap[12]
    # unsigned point-box distance is convex along the segment
    lo, hi = 0.0, 1.0
    fa = _point_box_unsigned(a, box)
    fb = _point_box_unsigned(b, box)
    for _ in range(_TERNARY_MAX):
        if hi - lo < _TERNARY_TOL:
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = _point_box_unsigned(a + (b - a) * m1, box)
        f2 = _point_box_unsigned(a + (b - a) * m2, box)
        if f1 < f2:
            hi = m2
        else:
            lo = m1
    best = min(
        fa, fb, _point_box_unsigned(a + (b - a) * 0.5 * (lo + hi), box)
    )
    if best > 0.0:
        return best - r
    # segment reaches the box interior; depth reported as the capsule
    # radius plus the deepest-signed endpoint/midpoint probe (a bound,
    # not the exact MTV)
    mid = a + (b - a) * 0.5 * (lo + hi)
    inside = min(
        _point_box_signed(a, box),
        _point_box_signed(b, box),
        _point_box_signed(mid, box),
    )
    return (inside if inside < 0.0 else 0.0) - r


def _box_box_dist(da, db):
    pa = da[:3]
    Ra = da[3:12].reshape(3, 3)
    ha = da[12:15]
    pb = db[:3]
    Rb = db[3:12].reshape(3, 3)
    hb = db[12:15]
    C = Ra.T @ Rb  # B's axes in A's frame
    c = Ra.T @ (pb - pa)
    axes = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        axes.append(e)
    for j in range(3):
        axes.append(C[:, j].copy())
    for i in range(3):
        for j in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            u = np.cross(e, C[:, j])
            n = float(np.linalg.norm(u))
            if n > 1e-9:
                axes.append(u / n)
    best_gap = -np.inf
    min_overlap = np.inf
    for u in axes:
        ra = float(ha @ np.abs(u))
        rb = float(hb @ np.abs(u.T @ C))
        gap = abs(float(c @ u)) - ra - rb
        if gap > best_gap:
            best_gap = gap
        if gap <= 0.0 and -gap < min_overlap:
            min_overlap = -gap
    if best_gap > 0.0:
        return best_gap  # lower bound on the true distance
    return -min_overlap


def pair_distance(ka, da, kb, db):
    """Signed distance between two posed primitives; <= 0 means contact.
    Exact for sphere/capsule pairs and sphere-box; box pairs are exact as
    a boolean with a conservative (lower-bound) free distance."""
    if ka > kb:
        ka, kb, da, db = kb, ka, db, da
    if ka == 0:
        if kb == 0:
            return float(np.linalg.norm(da[:3] - db[:3])) - da[12] - db[12]
        if kb == 1:
            a, b = _seg_endpoints(db)
            return _point_segment_dist(da[:3], a, b) - da[12] - db[12]
        return _point_box_signed(da[:3], db) - da[12]
    if ka == 1:
        if kb == 1:
            a1, b1 = _seg_endpoints(da)
            a2, b2 = _seg_endpoints(db)
            return _segment_segment_dist(a1, b1, a2, b2) - da[12] - db[12]
        return _capsule_box_dist(da, db)
    return _box_box_dist(da, db)


def _desc_aabb(kind, desc):
    p = desc[:3]
    if kind == 0:
        r = desc[12]
        return p - r, p + r
    if kind == 1:
        a, b = _seg_endpoints(desc)
        r = desc[12]
        return np.minimum(a, b) - r, np.maximum(a, b) + r
    R = desc[3:12].reshape(3, 3)
    half = np.abs(R) @ desc[12:15]
    return p - half, p + half


def _bounds_slack(kind, desc, blo, bhi):
    """Smallest margin between the shape's AABB and the bounds walls;
    <= 0 means touching or outside."""
    lo, hi = _desc_aabb(kind, desc)
    return float(min(np.min(lo - blo), np.min(bhi - hi)))


def _make_desc(frame, offset, dims, out):
    Rf = frame[3:].reshape(3, 3)
    out[:3] = frame[:3] + Rf @ offset[:3]
    out[3:12] = (Rf @ offset[3:].reshape(3, 3)).reshape(9)
    out[12:15] = dims


def config_check(
    jkind, jaxis, jorigin, qmap, base, q,
    lkind, lparams, loffset,
    ee_idx, ee_offset,
    okind, odesc,
    att_kind, att_params, att_tf,
    blo, bhi, spairs,
):
    """Full collision audit of one configuration.

    Check order (shared with the compiled backend): link bounds, attached
    bounds, link-obstacle, attached-obstacle, self pairs. First hit wins;
    a free result carries the minimum clearance over every pair checked.
    Returns (code, ia, ib, clearance).
    """
    frames = fk_frames(jkind, jaxis, jorigin, qmap, base, q)
    nl = lkind.shape[0]
    no = okind.shape[0]
    ldesc = np.empty((nl, 15))
    for i in range(nl):
        if lkind[i] >= 0:
            _make_desc(frames[i], loffset[i], lparams[i], ldesc[i])
    adesc = np.empty(15)
    has_att = att_kind >= 0
    if has_att:
        ee = frame_compose(frames[ee_idx], ee_offset)
        _make_desc(ee, att_tf, att_params, adesc)

    clearance = np.inf
    for i in range(nl):
        if lkind[i] < 0:
            continue
        d = _bounds_slack(lkind[i], ldesc[i], blo, bhi)
        if d <= 0.0:
            return 2, i, -1, d
        clearance = min(clearance, d)
    if has_att:
        d = _bounds_slack(att_kind, adesc, blo, bhi)
        if d <= 0.0:
            return 2, -2, -1, d
        clearance = min(clearance, d)
    for i in range(nl):
        if lkind[i] < 0:
            continue
        for j in range(no):
            d = pair_distance(lkind[i], ldesc[i], okind[j], odesc[j])
            if d <= 0.0:
                return 1, i, j, d
            clearance = min(clearance, d)
    if has_att:
        for j in range(no):
            d = pair_distance(att_kind, adesc, okind[j], odesc[j])
            if d <= 0.0:
                return 1, -2, j, d
            clearance = min(clearance, d)
    for k in range(spairs.shape[0]):
        i, j = spairs[k, 0], spairs[k, 1]
        d = pair_distance(lkind[i], ldesc[i], lkind[j], ldesc[j])
        if d <= 0.0:
            return 3, int(i), int(j), d
        clearance = min(clearance, d)
    return 0, -1, -1, float(clearance)


def edge_check(
    jkind, jaxis, jorigin, qmap, base,
    lkind, lparams, loffset,
    ee_idx, ee_offset,
    okind, odesc,
    att_kind, att_params, att_tf,
    blo, bhi, spairs,
    q_from, q_to, resolution,
):
    """Validate the straight joint-space segment at spacing <= resolution,
    endpoints included. Returns (ok, code, ia, ib) with the first
    violation encountered walking from q_from to q_to."""
    delta = q_to - q_from
    span = float(np.max(np.abs(delta))) if delta.size else 0.0
    n = max(1, int(np.ceil(span / resolution))) if span > 0.0 else 0
    for i in range(n + 1):
        t = i / n if n else 0.0
        code, ia, ib, _ = config_check(
            jkind, jaxis, jorigin, qmap, base, q_from + delta * t,
            lkind, lparams, loffset, ee_idx, ee_offset,
            okind, odesc, att_kind, att_params, att_tf,
            blo, bhi, spairs,
        )
        if code != 0:
            return 0, code, ia, ib
    return 1, 0, -1, -1
