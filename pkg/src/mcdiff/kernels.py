"""Numba kernels for the Brownian particle simulator.

The random stream is counter-based: every (seed, replication, molecule)
triple seeds an independent splitmix64 stream, so results are bit-identical
regardless of thread count or scheduling.  Molecules far from every
absorbing sphere advance several base time steps at once (Gaussian
increments compose exactly, and specular folding at a plane is exact by
the reflection principle, so only proximity to a receiver or one of its
mirror images limits the jump).  The jump is sized so that a receiver
contact mid-jump would be beyond seven standard deviations of the
combined increment.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_REP_SALT = np.uint64(0xA24BAED4963EE407)
_MOL_SALT = np.uint64(0x9FB21C651E98DF25)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53

FOLD_LIMIT = 16
_TWO_PI = 6.283185307179586


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _stream_seed(seed, rep, mol):
    s = _mix64(np.uint64(seed) ^ (np.uint64(rep) * _REP_SALT))
    return _mix64(s ^ (np.uint64(mol) * _MOL_SALT))


@njit(cache=True, inline="always")
def _next_uniform(state):
    # splitmix64; returns (new_state, u) with u in (0, 1]
    state = state + _GOLDEN
    z = _mix64(state)
    return state, (float(z >> _S11) + 1.0) * _INV53


@njit(cache=True)
def _resolve_segment(px, py, pz, qx, qy, qz, planes, rects, spheres, out):
    """Event-ordered resolution of one displacement segment.

    Folds the segment at reflector crossings (specular), stops at the
    earliest absorbing-sphere entry.  Returns the receiver index if
    absorbed, -1 if moved, -2 if the fold limit was exhausted.  ``out``
    receives the final position (x, y, z) and, when absorbed, the fraction
    of the original segment consumed before entry (out[3]).
    """
    gdone = 0.0
    folds = 0
    while True:
        dx = qx - px
        dy = qy - py
        dz = qz - pz
        dd = dx * dx + dy * dy + dz * dz

        s_sph = 2.0
        idx_sph = -1
        for si in range(spheres.shape[0]):
            fx = px - spheres[si, 0]
            fy = py - spheres[si, 1]
            fz = pz - spheres[si, 2]
            rr = spheres[si, 3]
            cc = fx * fx + fy * fy + fz * fz - rr * rr
            if cc <= 0.0:
                s_sph = 0.0
                idx_sph = si
                break
            if dd == 0.0:
                continue
            bb = fx * dx + fy * dy + fz * dz
            disc = bb * bb - dd * cc
            if disc < 0.0:
                continue
            s = (-bb - np.sqrt(disc)) / dd
            if 0.0 <= s <= 1.0 and s < s_sph:
                s_sph = s
                idx_sph = si

        s_ref = 2.0
        ref_nx = 0.0
        ref_ny = 0.0
        ref_nz = 0.0
        ref_off = 0.0  # normal . plane_point for reflection
        for pi in range(planes.shape[0]):
            nx = planes[pi, 3]
            ny = planes[pi, 4]
            nz = planes[pi, 5]
            off = planes[pi, 0] * nx + planes[pi, 1] * ny + planes[pi, 2] * nz
            da = px * nx + py * ny + pz * nz - off
            db = qx * nx + qy * ny + qz * nz - off
            if db < 0.0 and da > db:
                s = da / (da - db)
                if s < 0.0:
                    s = 0.0
                if s < s_ref:
                    s_ref = s
                    ref_nx = nx
                    ref_ny = ny
                    ref_nz = nz
                    ref_off = off
        for ri in range(rects.shape[0]):
            nx = rects[ri, 3]
            ny = rects[ri, 4]
            nz = rects[ri, 5]
            off = rects[ri, 0] * nx + rects[ri, 1] * ny + rects[ri, 2] * nz
            da = px * nx + py * ny + pz * nz - off
            db = qx * nx + qy * ny + qz * nz - off
            if da * db < 0.0:
                s = da / (da - db)
                if s < s_ref:
                    hx = px + s * dx - rects[ri, 0]
                    hy = py + s * dy - rects[ri, 1]
                    hz = pz + s * dz - rects[ri, 2]
                    u = hx * rects[ri, 6] + hy * rects[ri, 7] + hz * rects[ri, 8]
                    v = hx * rects[ri, 9] + hy * rects[ri, 10] + hz * rects[ri, 11]
                    if abs(u) <= rects[ri, 12] and abs(v) <= rects[ri, 13]:
                        s_ref = s
                        ref_nx = nx
                        ref_ny = ny
                        ref_nz = nz
                        ref_off = off

        if idx_sph >= 0 and s_sph <= s_ref:
            out[0] = px + s_sph * dx
            out[1] = py + s_sph * dy
            out[2] = pz + s_sph * dz
            out[3] = gdone + s_sph * (1.0 - gdone)
            return idx_sph
        if s_ref <= 1.0:
            folds += 1
            hx = px + s_ref * dx
            hy = py + s_ref * dy
            hz = pz + s_ref * dz
            if folds > FOLD_LIMIT:
                out[0] = hx
                out[1] = hy
                out[2] = hz
                out[3] = gdone
                return -2
            dq = qx * ref_nx + qy * ref_ny + qz * ref_nz - ref_off
            qx = qx - 2.0 * dq * ref_nx
            qy = qy - 2.0 * dq * ref_ny
            qz = qz - 2.0 * dq * ref_nz
            gdone = gdone + s_ref * (1.0 - gdone)
            px = hx
            py = hy
            pz = hz
            continue
        out[0] = qx
        out[1] = qy
        out[2] = qz
        out[3] = 1.0
        return -1


@njit(cache=True, parallel=True)
def simulate_replication(
    tx,
    planes,
    rects,
    spheres,
    guards,
    n_molecules,
    n_steps,
    sigma,
    jump_cap,
    seed,
    rep,
    absorb_receiver,
    absorb_step,
    fold_exhausted,
):
    """One replication: all molecules from emission to absorption or timeout.

    ``absorb_receiver[m]`` is the receiver index (or -1 if the molecule
    survived) and ``absorb_step[m]`` the 1-based step index at whose end the
    absorption is recorded.  ``fold_exhausted[m]`` counts fold-limit hits.
    """
    seven_sigma = 7.0 * sigma
    for mol in prange(n_molecules):
        state = _stream_seed(seed, rep, mol)
        spare = 0.0
        have_spare = False
        x = tx[0]
        y = tx[1]
        z = tx[2]
        out = np.empty(4)
        absorb_receiver[mol] = -1
        absorb_step[mol] = -1
        fold_exhausted[mol] = 0
        step = 0
        while step < n_steps:
            # guards = receivers plus their mirror images; reflectors do
            # not limit the jump because specular folding is exact.
            dmin = 1e300
            for si in range(guards.shape[0]):
                fx = x - guards[si, 0]
                fy = y - guards[si, 1]
                fz = z - guards[si, 2]
                d = np.sqrt(fx * fx + fy * fy + fz * fz) - guards[si, 3]
                if d < dmin:
                    dmin = d

            k = 1
            if dmin > seven_sigma:
                ratio = dmin / seven_sigma
                k = int(ratio * ratio)
                if k < 1:
                    k = 1
            if k > jump_cap:
                k = jump_cap
            if k > n_steps - step:
                k = n_steps - step
            sig = sigma * np.sqrt(float(k))

            # three Gaussian increments (Box-Muller, spare cached)
            if have_spare:
                g0 = spare
                state, u1 = _next_uniform(state)
                state, u2 = _next_uniform(state)
                r = np.sqrt(-2.0 * np.log(u1))
                g1 = r * np.cos(_TWO_PI * u2)
                g2 = r * np.sin(_TWO_PI * u2)
                have_spare = False
            else:
                state, u1 = _next_uniform(state)
                state, u2 = _next_uniform(state)
                r = np.sqrt(-2.0 * np.log(u1))
                g0 = r * np.cos(_TWO_PI * u2)
                g1 = r * np.sin(_TWO_PI * u2)
                state, u1 = _next_uniform(state)
                state, u2 = _next_uniform(state)
                r = np.sqrt(-2.0 * np.log(u1))
                g2 = r * np.cos(_TWO_PI * u2)
                spare = r * np.sin(_TWO_PI * u2)
                have_spare = True

            qx = x + sig * g0
            qy = y + sig * g1
            qz = z + sig * g2
            res = _resolve_segment(x, y, z, qx, qy, qz, planes, rects, spheres, out)
            if res >= 0:
                sub = int(np.ceil(out[3] * k))
                if sub < 1:
                    sub = 1
                if sub > k:
                    sub = k
                absorb_receiver[mol] = res
                absorb_step[mol] = step + sub
                break
            if res == -2:
                fold_exhausted[mol] += 1
            x = out[0]
            y = out[1]
            z = out[2]
            step += k
