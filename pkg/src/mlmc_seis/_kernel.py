"""Numba time-stepping kernel for the 2-D P-SV velocity-stress scheme.

Second order in space and time on the standard staggered layout: normal
stresses and material rows at integer nodes, shear stress at half-half
nodes, vx at (node z, half x), vz at (half z, node x).  The free surface
at z = 0 uses the stress-image condition (tzz = 0, antisymmetric txz) and
the reduced normal-stress update on the surface row.  Attenuation adds
per-mechanism memory fields driven by the unrelaxed stress rates.

All arrays are float64 and mutated in place; one call advances steps
[n0, n1) and records receiver velocities.  Single-threaded on purpose:
one forward solve is one unit of measured work.
"""

import numba


@numba.njit(cache=True)
def _damp(a, gx, gz, wx, wb):
    nzf, nxf = a.shape
    wx = min(wx, nxf)
    for j in range(nzf):
        for i in range(wx):
            a[j, i] *= gx[i]
        for i in range(nxf - wx, nxf):
            a[j, i] *= gx[i]
    for j in range(max(0, nzf - wb), nzf):
        gj = gz[j]
        for i in range(nxf):
            a[j, i] *= gj


@numba.njit(cache=True)
def run_steps(
    vx, vz, txx, tzz, txz,
    bx, bz, lm, lam, mu_h, surf_a,
    y_n, y_h, rxx, rzz, rxz, c1, c2,
    gxn, gxh, gzn, gzh, wx, wb,
    sj_n, si_n, sw_n, sj_h, si_h, sw_h, mxx, mzz, mxz, ds,
    rvx_j, rvx_i, rvx_w, rvz_j, rvz_i, rvz_w, rvzx_j, rvzx_i, rvzx_w,
    rec_vx, rec_vz,
    cdt, n0, n1,
):
    nz, nx = txx.shape
    n_mech = c1.shape[0]
    n_rec = rec_vx.shape[0]

    for n in range(n0, n1):
        # Symmetric split damping: half-step factors surround the
        # conservative update, which keeps the absorber impedance-matched
        # to second order (damping the full increment instead reflects
        # at the few-percent level).
        _damp(vx, gxh, gzn, wx, wb)
        _damp(vz, gxn, gzh, wx, wb)
        _damp(txx, gxn, gzn, wx, wb)
        _damp(tzz, gxn, gzn, wx, wb)
        _damp(txz, gxh, gzh, wx, wb)

        # velocities at t_{n+1/2}
        for i in range(nx - 1):
            vx[0, i] += bx[0] * (txx[0, i + 1] - txx[0, i] + 2.0 * txz[0, i])
        for j in range(1, nz - 1):
            for i in range(nx - 1):
                vx[j, i] += bx[j] * (txx[j, i + 1] - txx[j, i] + txz[j, i] - txz[j - 1, i])
        for j in range(nz - 1):
            for i in range(1, nx - 1):
                vz[j, i] += bz[j] * (txz[j, i] - txz[j, i - 1] + tzz[j + 1, i] - tzz[j, i])

        for r in range(n_rec):
            sx = 0.0
            for k in range(4):
                sx += rvx_w[r, k] * vx[rvx_j[r, k], rvx_i[r, k]]
            rec_vx[r, n] = sx
            sz = 0.0
            for k in range(4):
                sz += rvz_w[r, k] * vz[rvz_j[r, k], rvz_i[r, k]]
            for k in range(4):
                sz += rvzx_w[r, k] * vx[rvzx_j[r, k], rvzx_i[r, k]]
            rec_vz[r, n] = sz

        # stresses at t_{n+1}; tzz stays 0 on the free-surface row
        for i in range(1, nx - 1):
            d = surf_a * cdt * (vx[0, i] - vx[0, i - 1])
            if n_mech > 0:
                s = 0.0
                for b in range(n_mech):
                    rn = c1[b] * rxx[0, i, b] + c2[b] * y_n[b, 0] * d
                    s += 0.5 * (rn + rxx[0, i, b])
                    rxx[0, i, b] = rn
                d -= s
            txx[0, i] += d
        for j in range(1, nz - 1):
            for i in range(1, nx - 1):
                dvx = vx[j, i] - vx[j, i - 1]
                dvz = vz[j, i] - vz[j - 1, i]
                dxx = (lm[j] * dvx + lam[j] * dvz) * cdt
                dzz = (lam[j] * dvx + lm[j] * dvz) * cdt
                if n_mech > 0:
                    sxx = 0.0
                    szz = 0.0
                    for b in range(n_mech):
                        yb = y_n[b, j]
                        rn = c1[b] * rxx[j, i, b] + c2[b] * yb * dxx
                        sxx += 0.5 * (rn + rxx[j, i, b])
                        rxx[j, i, b] = rn
                        rn = c1[b] * rzz[j, i, b] + c2[b] * yb * dzz
                        szz += 0.5 * (rn + rzz[j, i, b])
                        rzz[j, i, b] = rn
                    dxx -= sxx
                    dzz -= szz
                txx[j, i] += dxx
                tzz[j, i] += dzz
        for j in range(nz - 1):
            for i in range(nx - 1):
                dxz = mu_h[j] * cdt * (vx[j + 1, i] - vx[j, i] + vz[j, i + 1] - vz[j, i])
                if n_mech > 0:
                    sxz = 0.0
                    for b in range(n_mech):
                        rn = c1[b] * rxz[j, i, b] + c2[b] * y_h[b, j] * dxz
                        sxz += 0.5 * (rn + rxz[j, i, b])
                        rxz[j, i, b] = rn
                    dxz -= sxz
                txz[j, i] += dxz

        inc = ds[n]
        if inc != 0.0:
            for k in range(sj_n.shape[0]):
                txx[sj_n[k], si_n[k]] += sw_n[k] * mxx * inc
                tzz[sj_n[k], si_n[k]] += sw_n[k] * mzz * inc
            for k in range(sj_h.shape[0]):
                txz[sj_h[k], si_h[k]] += sw_h[k] * mxz * inc

        _damp(vx, gxh, gzn, wx, wb)
        _damp(vz, gxn, gzh, wx, wb)
        _damp(txx, gxn, gzn, wx, wb)
        _damp(tzz, gxn, gzn, wx, wb)
        _damp(txz, gxh, gzh, wx, wb)
