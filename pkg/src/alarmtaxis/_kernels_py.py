"""Pure-numpy kernels: the fallback backend.

The compiled extension (``alarmtaxis._kernels``) implements the same
functions cell-for-cell with the same operation order; the stage outputs of
the two backends agree bitwise, while the summed monitor quantities agree to
rounding (numpy uses pairwise summation, the C loops sum sequentially).

All arrays are C-contiguous float64 of shape (ny, nx).  Boundary handling is
reflection ghosts everywhere: boundary faces carry zero diffusive and zero
advective flux.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def laplacian(a, inv_hx2, inv_hy2):
    ny, nx = a.shape
    out = np.empty_like(a)
    # x part: interior (l - 2c + r), edges fold the ghost copy in
    out[:, 1:-1] = (a[:, :-2] - 2.0 * a[:, 1:-1] + a[:, 2:]) * inv_hx2
    out[:, 0] = (a[:, 0] - 2.0 * a[:, 0] + a[:, 1]) * inv_hx2
    out[:, -1] = (a[:, -2] - 2.0 * a[:, -1] + a[:, -1]) * inv_hx2
    if ny > 1:
        ypart = np.empty_like(a)
        ypart[1:-1, :] = (a[:-2, :] - 2.0 * a[1:-1, :] + a[2:, :]) * inv_hy2
        ypart[0, :] = (a[0, :] - 2.0 * a[0, :] + a[1, :]) * inv_hy2
        ypart[-1, :] = (a[-2, :] - 2.0 * a[-1, :] + a[-1, :]) * inv_hy2
        out += ypart
    return out


def _face_fluxes_x(carrier, pot, inv_hx):
    slope = (pot[:, 1:] - pot[:, :-1]) * inv_hx
    donor = np.where(slope > 0.0, carrier[:, :-1], carrier[:, 1:])
    return donor * slope


def _face_fluxes_y(carrier, pot, inv_hy):
    slope = (pot[1:, :] - pot[:-1, :]) * inv_hy
    donor = np.where(slope > 0.0, carrier[:-1, :], carrier[1:, :])
    return donor * slope


def upwind_divergence(carrier, pot, inv_hx, inv_hy):
    ny, nx = carrier.shape
    fx = _face_fluxes_x(carrier, pot, inv_hx)
    out = np.empty_like(carrier)
    out[:, 1:-1] = (fx[:, 1:] - fx[:, :-1]) * inv_hx
    out[:, 0] = fx[:, 0] * inv_hx
    out[:, -1] = -fx[:, -1] * inv_hx
    if ny > 1:
        fy = _face_fluxes_y(carrier, pot, inv_hy)
        ypart = np.empty_like(carrier)
        ypart[1:-1, :] = (fy[1:, :] - fy[:-1, :]) * inv_hy
        ypart[0, :] = fy[0, :] * inv_hy
        ypart[-1, :] = -fy[-1, :] * inv_hy
        out += ypart
    return out


def face_absgrad_max(a, inv_hx, inv_hy):
    m = 0.0
    dx = np.abs((a[:, 1:] - a[:, :-1]) * inv_hx)
    if dx.size:
        m = float(dx.max())
    if a.shape[0] > 1:
        dy = np.abs((a[1:, :] - a[:-1, :]) * inv_hy)
        m = max(m, float(dy.max()))
    return m


def _pad_faces_x(fx, ny, nx):
    full = np.zeros((ny, nx + 1))
    full[:, 1:-1] = fx
    return full


def _pad_faces_y(fy, ny, nx):
    full = np.zeros((ny + 1, nx))
    full[1:-1, :] = fy
    return full


def _species_stage(z, lap, advnet, adv_in, adv_outflux, pc, src, dt, d, diff_out, diff_in, kinetics_on):
    """One guarded forward-Euler stage for a single species.

    Explicit flux-form update unless the total outflow rate would break
    nonnegativity within dt; those cells divide by (1 + dt * loss rate)
    instead (Patankar form), which is exact in sign and first-order
    consistent.
    """
    if kinetics_on:
        pcp = np.maximum(pc, 0.0)
        pcn = np.maximum(-pc, 0.0)
    else:
        pcp = pcn = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        adv_rate = np.where(z > 0.0, adv_outflux / np.where(z > 0.0, z, 1.0), 0.0)
    lam = d * diff_out + adv_rate + pcn
    trig = dt * lam > 1.0
    hits = int(np.count_nonzero(trig))

    expl = d * lap
    if advnet is not None:
        expl = expl + advnet
    if kinetics_on:
        expl = expl + z * pc
    if src is not None:
        expl = expl + src
    expl = z + dt * expl

    if hits:
        gain = d * diff_in + adv_in + z * pcp
        if src is not None:
            gain = gain + src
        guarded = (z + dt * gain) / (1.0 + dt * lam)
        return np.where(trig, guarded, expl), hits
    return expl, hits


def _diff_split(a, inv_hx2, inv_hy2):
    """Neighbor inflow sum and outflow rate of the reflected-ghost Laplacian."""
    ny, nx = a.shape
    diff_in = np.zeros_like(a)
    diff_in[:, :-1] += a[:, 1:] * inv_hx2
    diff_in[:, 1:] += a[:, :-1] * inv_hx2
    diff_out = np.full_like(a, 2.0 * inv_hx2)
    diff_out[:, 0] = inv_hx2
    diff_out[:, -1] = inv_hx2
    if ny > 1:
        diff_in[:-1, :] += a[1:, :] * inv_hy2
        diff_in[1:, :] += a[:-1, :] * inv_hy2
        diff_out += 2.0 * inv_hy2
        diff_out[0, :] -= inv_hy2
        diff_out[-1, :] -= inv_hy2
    return diff_in, diff_out


def _adv_split(coef, carrier_s, pot, inv_hx, inv_hy):
    """Net term -coef*div, inflow part, and outflow flux of the upwind advection."""
    ny, nx = carrier_s.shape
    fx = _pad_faces_x(_face_fluxes_x(carrier_s, pot, inv_hx), ny, nx)
    fw = fx[:, :-1]
    fe = fx[:, 1:]
    net = -coef * ((fe - fw) * inv_hx)
    adv_in = coef * ((np.maximum(fw, 0.0) + np.maximum(-fe, 0.0)) * inv_hx)
    adv_out = coef * ((np.maximum(-fw, 0.0) + np.maximum(fe, 0.0)) * inv_hx)
    if ny > 1:
        fy = _pad_faces_y(_face_fluxes_y(carrier_s, pot, inv_hy), ny, nx)
        fs = fy[:-1, :]
        fn = fy[1:, :]
        net += -coef * ((fn - fs) * inv_hy)
        adv_in += coef * ((np.maximum(fs, 0.0) + np.maximum(-fn, 0.0)) * inv_hy)
        adv_out += coef * ((np.maximum(-fs, 0.0) + np.maximum(fn, 0.0)) * inv_hy)
    return net, adv_in, adv_out


def euler_stage(
    u, v, w, sv, sw, src_u, src_v, src_w, dt,
    inv_hx, inv_hy,
    d1, d2, d3, xi, chi,
    lam1, lam2, lam3, mu1, mu2, mu3, a1, a2, a3, b1, b2, b3,
    kinetics_on,
):
    """One positivity-guarded forward-Euler stage of the full system.

    sv and sw are the (possibly cutoff-regularized) advected carriers for
    the v and w equations; src_* are optional manufactured sources.
    Returns (u2, v2, w2, guard_hits).
    """
    inv_hx2 = inv_hx * inv_hx
    inv_hy2 = inv_hy * inv_hy

    lap_u = laplacian(u, inv_hx2, inv_hy2)
    lap_v = laplacian(v, inv_hx2, inv_hy2)
    lap_w = laplacian(w, inv_hx2, inv_hy2)

    din_u, dout_u = _diff_split(u, inv_hx2, inv_hy2)
    din_v, dout_v = _diff_split(v, inv_hx2, inv_hy2)
    din_w, dout_w = _diff_split(w, inv_hx2, inv_hy2)

    if xi != 0.0:
        adv_v, advin_v, advout_v = _adv_split(xi, sv, u, inv_hx, inv_hy)
    else:
        adv_v, advin_v, advout_v = None, 0.0, 0.0
    if chi != 0.0:
        uv = u * v
        adv_w, advin_w, advout_w = _adv_split(chi, sw, uv, inv_hx, inv_hy)
    else:
        adv_w, advin_w, advout_w = None, 0.0, 0.0

    if kinetics_on:
        pc_u = lam1 - mu1 * u - a1 * v - a2 * w
        pc_v = lam2 - mu2 * v + b1 * u - a3 * w
        pc_w = lam3 - mu3 * w + b2 * u + b3 * v
    else:
        pc_u = pc_v = pc_w = None

    zero = np.zeros_like(u)
    u2, h_u = _species_stage(u, lap_u, None, zero, zero, pc_u, src_u, dt, d1, dout_u, din_u, kinetics_on)
    v2, h_v = _species_stage(v, lap_v, adv_v, advin_v, advout_v, pc_v, src_v, dt, d2, dout_v, din_v, kinetics_on)
    w2, h_w = _species_stage(w, lap_w, adv_w, advin_w, advout_w, pc_w, src_w, dt, d3, dout_w, din_w, kinetics_on)
    return u2, v2, w2, h_u + h_v + h_w


def _face_gradsq_sum(a, inv_hx, inv_hy):
    s = 0.0
    dx = (a[:, 1:] - a[:, :-1]) * inv_hx
    s += float((dx * dx).sum())
    if a.shape[0] > 1:
        dy = (a[1:, :] - a[:-1, :]) * inv_hy
        s += float((dy * dy).sum())
    return s


def monitor_sums(
    u, v, w, sv, inv_hx, inv_hy,
    d1, d2, d3, xi, chi,
    lam1, lam2, lam3, mu1, mu2, mu3, a1, a2, a3, b1, b2, b3,
):
    """All per-step reductions in one place.

    Returns the tuple
    (sum_u, sum_v, sum_w, min_u, min_v, min_w, sup_u, sup_v, sup_w,
     sum_u2, sum_v2, sum_w2,
     gradsq_u, gradsq_v, gradsq_uv, gradsq_logw,
     sum_lapu2, sum_grad4_u, sum_h, sum_force65,
     max_facegrad_u, max_facegrad_uv)
    where the gradsq_* entries are raw face sums (no face-measure factor)
    and gradsq_logw is weighted by the harmonic face mean of 1/(w+1)^2.
    """
    ny, nx = u.shape
    inv_hx2 = inv_hx * inv_hx
    inv_hy2 = inv_hy * inv_hy

    sum_u = float(u.sum())
    sum_v = float(v.sum())
    sum_w = float(w.sum())
    min_u = float(u.min())
    min_v = float(v.min())
    min_w = float(w.min())
    sup_u = float(u.max())
    sup_v = float(v.max())
    sup_w = float(w.max())
    sum_u2 = float((u * u).sum())
    sum_v2 = float((v * v).sum())
    sum_w2 = float((w * w).sum())

    gradsq_u = _face_gradsq_sum(u, inv_hx, inv_hy)
    gradsq_v = _face_gradsq_sum(v, inv_hx, inv_hy)
    uv = u * v
    gradsq_uv = _face_gradsq_sum(uv, inv_hx, inv_hy)

    wgt = 1.0 / ((w + 1.0) * (w + 1.0))
    dx = (w[:, 1:] - w[:, :-1]) * inv_hx
    hm = 2.0 * wgt[:, :-1] * wgt[:, 1:] / (wgt[:, :-1] + wgt[:, 1:])
    gradsq_logw = float((dx * dx * hm).sum())
    if ny > 1:
        dy = (w[1:, :] - w[:-1, :]) * inv_hy
        hmy = 2.0 * wgt[:-1, :] * wgt[1:, :] / (wgt[:-1, :] + wgt[1:, :])
        gradsq_logw += float((dy * dy * hmy).sum())

    lap_u = laplacian(u, inv_hx2, inv_hy2)
    sum_lapu2 = float((lap_u * lap_u).sum())

    fx = np.zeros((ny, nx + 1))
    fx[:, 1:-1] = (u[:, 1:] - u[:, :-1]) * inv_hx
    gx = 0.5 * (fx[:, :-1] + fx[:, 1:])
    if ny > 1:
        fy = np.zeros((ny + 1, nx))
        fy[1:-1, :] = (u[1:, :] - u[:-1, :]) * inv_hy
        gy = 0.5 * (fy[:-1, :] + fy[1:, :])
        g2 = gx * gx + gy * gy
    else:
        g2 = gx * gx
    sum_grad4_u = float((g2 * g2).sum())

    h_arr = w * (lam3 - mu3 * w + b2 * u + b3 * v)
    sum_h = float(h_arr.sum())

    g_arr = v * (lam2 - mu2 * v + b1 * u - a3 * w)
    if xi != 0.0:
        force = -xi * upwind_divergence(sv, u, inv_hx, inv_hy) + g_arr
    else:
        force = g_arr
    sum_force65 = float(np.power(np.abs(force), 1.2).sum())

    max_fg_u = face_absgrad_max(u, inv_hx, inv_hy)
    max_fg_uv = face_absgrad_max(uv, inv_hx, inv_hy)

    return (
        sum_u, sum_v, sum_w, min_u, min_v, min_w, sup_u, sup_v, sup_w,
        sum_u2, sum_v2, sum_w2,
        gradsq_u, gradsq_v, gradsq_uv, gradsq_logw,
        sum_lapu2, sum_grad4_u, sum_h, sum_force65,
        max_fg_u, max_fg_uv,
    )
