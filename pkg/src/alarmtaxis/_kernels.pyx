# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: bit-compatible scalar-loop twins of _kernels_py.

Stage and stencil outputs reproduce the numpy fallback bitwise (same
elementwise operation order, compiled with -ffp-contract=off); the summed
monitor quantities differ from numpy's pairwise summation only in rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, fmax, pow

cnp.import_array()

NAME = "compiled"


cdef inline double _face_flux(double cl, double cr, double pl, double pr, double inv_h) nogil:
    cdef double slope = (pr - pl) * inv_h
    if slope > 0.0:
        return cl * slope
    return cr * slope


def laplacian(double[:, ::1] a, double inv_hx2, double inv_hy2):
    cdef Py_ssize_t ny = a.shape[0], nx = a.shape[1], j, i
    out_arr = np.empty((ny, nx))
    cdef double[:, ::1] out = out_arr
    cdef double c, l, r, s, n, t
    for j in range(ny):
        for i in range(nx):
            c = a[j, i]
            l = a[j, i - 1] if i > 0 else c
            r = a[j, i + 1] if i < nx - 1 else c
            t = (l - 2.0 * c + r) * inv_hx2
            if ny > 1:
                s = a[j - 1, i] if j > 0 else c
                n = a[j + 1, i] if j < ny - 1 else c
                t = t + (s - 2.0 * c + n) * inv_hy2
            out[j, i] = t
    return out_arr


def upwind_divergence(double[:, ::1] carrier, double[:, ::1] pot, double inv_hx, double inv_hy):
    cdef Py_ssize_t ny = carrier.shape[0], nx = carrier.shape[1], j, i
    out_arr = np.empty((ny, nx))
    cdef double[:, ::1] out = out_arr
    cdef double fw, fe, fs, fn, t
    for j in range(ny):
        for i in range(nx):
            fw = _face_flux(carrier[j, i - 1], carrier[j, i], pot[j, i - 1], pot[j, i], inv_hx) if i > 0 else 0.0
            fe = _face_flux(carrier[j, i], carrier[j, i + 1], pot[j, i], pot[j, i + 1], inv_hx) if i < nx - 1 else 0.0
            if i == 0:
                t = fe * inv_hx
            elif i == nx - 1:
                t = (-fw) * inv_hx
            else:
                t = (fe - fw) * inv_hx
            if ny > 1:
                fs = _face_flux(carrier[j - 1, i], carrier[j, i], pot[j - 1, i], pot[j, i], inv_hy) if j > 0 else 0.0
                fn = _face_flux(carrier[j, i], carrier[j + 1, i], pot[j, i], pot[j + 1, i], inv_hy) if j < ny - 1 else 0.0
                if j == 0:
                    t = t + fn * inv_hy
                elif j == ny - 1:
                    t = t + (-fs) * inv_hy
                else:
                    t = t + (fn - fs) * inv_hy
            out[j, i] = t
    return out_arr


def face_absgrad_max(double[:, ::1] a, double inv_hx, double inv_hy):
    cdef Py_ssize_t ny = a.shape[0], nx = a.shape[1], j, i
    cdef double m = 0.0, d
    for j in range(ny):
        for i in range(nx - 1):
            d = fabs((a[j, i + 1] - a[j, i]) * inv_hx)
            if d > m:
                m = d
    if ny > 1:
        for j in range(ny - 1):
            for i in range(nx):
                d = fabs((a[j + 1, i] - a[j, i]) * inv_hy)
                if d > m:
                    m = d
    return m


cdef int _stage_species(
    double[:, ::1] z, double[:, ::1] out,
    double[:, ::1] carrier, double[:, ::1] pot, bint has_adv, double coef,
    double[:, ::1] pc, bint kin,
    double[:, ::1] src, bint has_src,
    double dt, double d, double inv_hx, double inv_hy,
) nogil:
    cdef Py_ssize_t ny = z.shape[0], nx = z.shape[1], j, i
    cdef double inv_hx2 = inv_hx * inv_hx, inv_hy2 = inv_hy * inv_hy
    cdef double c, l, r, s, n, lap, fw, fe, fs, fn
    cdef double net, ain, aout, rate, pcv, pcp, pcn, douto, din, lam, acc, gain
    cdef int hits = 0
    for j in range(ny):
        for i in range(nx):
            c = z[j, i]
            l = z[j, i - 1] if i > 0 else c
            r = z[j, i + 1] if i < nx - 1 else c
            lap = (l - 2.0 * c + r) * inv_hx2
            if ny > 1:
                s = z[j - 1, i] if j > 0 else c
                n = z[j + 1, i] if j < ny - 1 else c
                lap = lap + (s - 2.0 * c + n) * inv_hy2

            net = 0.0
            ain = 0.0
            aout = 0.0
            if has_adv:
                fw = _face_flux(carrier[j, i - 1], carrier[j, i], pot[j, i - 1], pot[j, i], inv_hx) if i > 0 else 0.0
                fe = _face_flux(carrier[j, i], carrier[j, i + 1], pot[j, i], pot[j, i + 1], inv_hx) if i < nx - 1 else 0.0
                net = -coef * ((fe - fw) * inv_hx)
                ain = coef * ((fmax(fw, 0.0) + fmax(-fe, 0.0)) * inv_hx)
                aout = coef * ((fmax(-fw, 0.0) + fmax(fe, 0.0)) * inv_hx)
                if ny > 1:
                    fs = _face_flux(carrier[j - 1, i], carrier[j, i], pot[j - 1, i], pot[j, i], inv_hy) if j > 0 else 0.0
                    fn = _face_flux(carrier[j, i], carrier[j + 1, i], pot[j, i], pot[j + 1, i], inv_hy) if j < ny - 1 else 0.0
                    net = net + (-coef * ((fn - fs) * inv_hy))
                    ain = ain + coef * ((fmax(fs, 0.0) + fmax(-fn, 0.0)) * inv_hy)
                    aout = aout + coef * ((fmax(-fs, 0.0) + fmax(fn, 0.0)) * inv_hy)

            if kin:
                pcv = pc[j, i]
                pcp = fmax(pcv, 0.0)
                pcn = fmax(-pcv, 0.0)
            else:
                pcv = 0.0
                pcp = 0.0
                pcn = 0.0

            rate = (aout / c) if c > 0.0 else 0.0

            douto = 2.0 * inv_hx2
            if i == 0 or i == nx - 1:
                douto = inv_hx2
            if ny > 1:
                douto = douto + 2.0 * inv_hy2
                if j == 0:
                    douto = douto - inv_hy2
                if j == ny - 1:
                    douto = douto - inv_hy2

            lam = d * douto + rate + pcn

            if dt * lam > 1.0:
                hits += 1
                din = 0.0
                if i < nx - 1:
                    din = din + z[j, i + 1] * inv_hx2
                if i > 0:
                    din = din + z[j, i - 1] * inv_hx2
                if ny > 1:
                    if j < ny - 1:
                        din = din + z[j + 1, i] * inv_hy2
                    if j > 0:
                        din = din + z[j - 1, i] * inv_hy2
                gain = d * din + ain + c * pcp
                if has_src:
                    gain = gain + src[j, i]
                out[j, i] = (c + dt * gain) / (1.0 + dt * lam)
            else:
                acc = d * lap
                if has_adv:
                    acc = acc + net
                if kin:
                    acc = acc + c * pcv
                if has_src:
                    acc = acc + src[j, i]
                out[j, i] = c + dt * acc
    return hits


def euler_stage(
    u, v, w, sv, sw, src_u, src_v, src_w, double dt,
    double inv_hx, double inv_hy,
    double d1, double d2, double d3, double xi, double chi,
    double lam1, double lam2, double lam3,
    double mu1, double mu2, double mu3,
    double a1, double a2, double a3,
    double b1, double b2, double b3,
    bint kinetics_on,
):
    cdef bint has_src = src_u is not None
    uv = np.multiply(u, v)
    if kinetics_on:
        pc_u = lam1 - mu1 * u - a1 * v - a2 * w
        pc_v = lam2 - mu2 * v + b1 * u - a3 * w
        pc_w = lam3 - mu3 * w + b2 * u + b3 * v
    else:
        pc_u = pc_v = pc_w = u
    dummy = u
    u2 = np.empty_like(u)
    v2 = np.empty_like(v)
    w2 = np.empty_like(w)
    cdef int hits = 0
    hits += _stage_species(u, u2, u, u, False, 0.0, pc_u, kinetics_on,
                           src_u if has_src else dummy, has_src, dt, d1, inv_hx, inv_hy)
    hits += _stage_species(v, v2, sv, u, xi != 0.0, xi, pc_v, kinetics_on,
                           src_v if has_src else dummy, has_src, dt, d2, inv_hx, inv_hy)
    hits += _stage_species(w, w2, sw, uv, chi != 0.0, chi, pc_w, kinetics_on,
                           src_w if has_src else dummy, has_src, dt, d3, inv_hx, inv_hy)
    return u2, v2, w2, hits


def monitor_sums(
    double[:, ::1] u, double[:, ::1] v, double[:, ::1] w, double[:, ::1] sv,
    double inv_hx, double inv_hy,
    double d1, double d2, double d3, double xi, double chi,
    double lam1, double lam2, double lam3,
    double mu1, double mu2, double mu3,
    double a1, double a2, double a3,
    double b1, double b2, double b3,
):
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1], j, i
    cdef double inv_hx2 = inv_hx * inv_hx, inv_hy2 = inv_hy * inv_hy
    cdef double sum_u = 0.0, sum_v = 0.0, sum_w = 0.0
    cdef double min_u = u[0, 0], min_v = v[0, 0], min_w = w[0, 0]
    cdef double sup_u = u[0, 0], sup_v = v[0, 0], sup_w = w[0, 0]
    cdef double sum_u2 = 0.0, sum_v2 = 0.0, sum_w2 = 0.0
    cdef double gradsq_u = 0.0, gradsq_v = 0.0, gradsq_uv = 0.0, gradsq_logw = 0.0
    cdef double sum_lapu2 = 0.0, sum_grad4 = 0.0, sum_h = 0.0, sum_f65 = 0.0
    cdef double max_fg_u = 0.0, max_fg_uv = 0.0
    cdef double c, l, r, s, n, d, lap, gx, gy, g2, wa, wb, hm
    cdef double fw, fe, fs, fn, force, uvc, uvl, uvr, uvs, uvn

    for j in range(ny):
        for i in range(nx):
            c = u[j, i]
            sum_u += c
            sum_u2 += c * c
            if c < min_u: min_u = c
            if c > sup_u: sup_u = c
            c = v[j, i]
            sum_v += c
            sum_v2 += c * c
            if c < min_v: min_v = c
            if c > sup_v: sup_v = c
            c = w[j, i]
            sum_w += c
            sum_w2 += c * c
            if c < min_w: min_w = c
            if c > sup_w: sup_w = c
            sum_h += w[j, i] * (lam3 - mu3 * w[j, i] + b2 * u[j, i] + b3 * v[j, i])

    # face sums for u, v, uv and the weighted log-like w functional
    for j in range(ny):
        for i in range(nx - 1):
            d = (u[j, i + 1] - u[j, i]) * inv_hx
            gradsq_u += d * d
            if fabs(d) > max_fg_u: max_fg_u = fabs(d)
            d = (v[j, i + 1] - v[j, i]) * inv_hx
            gradsq_v += d * d
            d = (u[j, i + 1] * v[j, i + 1] - u[j, i] * v[j, i]) * inv_hx
            gradsq_uv += d * d
            if fabs(d) > max_fg_uv: max_fg_uv = fabs(d)
            d = (w[j, i + 1] - w[j, i]) * inv_hx
            wa = 1.0 / ((w[j, i] + 1.0) * (w[j, i] + 1.0))
            wb = 1.0 / ((w[j, i + 1] + 1.0) * (w[j, i + 1] + 1.0))
            hm = 2.0 * wa * wb / (wa + wb)
            gradsq_logw += d * d * hm
    if ny > 1:
        for j in range(ny - 1):
            for i in range(nx):
                d = (u[j + 1, i] - u[j, i]) * inv_hy
                gradsq_u += d * d
                if fabs(d) > max_fg_u: max_fg_u = fabs(d)
                d = (v[j + 1, i] - v[j, i]) * inv_hy
                gradsq_v += d * d
                d = (u[j + 1, i] * v[j + 1, i] - u[j, i] * v[j, i]) * inv_hy
                gradsq_uv += d * d
                if fabs(d) > max_fg_uv: max_fg_uv = fabs(d)
                d = (w[j + 1, i] - w[j, i]) * inv_hy
                wa = 1.0 / ((w[j, i] + 1.0) * (w[j, i] + 1.0))
                wb = 1.0 / ((w[j + 1, i] + 1.0) * (w[j + 1, i] + 1.0))
                hm = 2.0 * wa * wb / (wa + wb)
                gradsq_logw += d * d * hm

    # laplacian square, cell-averaged gradient fourth power, v-equation force
    for j in range(ny):
        for i in range(nx):
            c = u[j, i]
            l = u[j, i - 1] if i > 0 else c
            r = u[j, i + 1] if i < nx - 1 else c
            lap = (l - 2.0 * c + r) * inv_hx2
            if ny > 1:
                s = u[j - 1, i] if j > 0 else c
                n = u[j + 1, i] if j < ny - 1 else c
                lap = lap + (s - 2.0 * c + n) * inv_hy2
            sum_lapu2 += lap * lap

            fw = (c - l) * inv_hx if i > 0 else 0.0
            fe = (r - c) * inv_hx if i < nx - 1 else 0.0
            gx = 0.5 * (fw + fe)
            if ny > 1:
                fs = (c - s) * inv_hy if j > 0 else 0.0
                fn = (n - c) * inv_hy if j < ny - 1 else 0.0
                gy = 0.5 * (fs + fn)
                g2 = gx * gx + gy * gy
            else:
                g2 = gx * gx
            sum_grad4 += g2 * g2

            force = v[j, i] * (lam2 - mu2 * v[j, i] + b1 * u[j, i] - a3 * w[j, i])
            if xi != 0.0:
                fw = _face_flux(sv[j, i - 1], sv[j, i], u[j, i - 1], u[j, i], inv_hx) if i > 0 else 0.0
                fe = _face_flux(sv[j, i], sv[j, i + 1], u[j, i], u[j, i + 1], inv_hx) if i < nx - 1 else 0.0
                d = (fe - fw) * inv_hx
                if ny > 1:
                    fs = _face_flux(sv[j - 1, i], sv[j, i], u[j - 1, i], u[j, i], inv_hy) if j > 0 else 0.0
                    fn = _face_flux(sv[j, i], sv[j + 1, i], u[j, i], u[j + 1, i], inv_hy) if j < ny - 1 else 0.0
                    d = d + (fn - fs) * inv_hy
                force = force - xi * d
            sum_f65 += pow(fabs(force), 1.2)

    return (
        sum_u, sum_v, sum_w, min_u, min_v, min_w, sup_u, sup_v, sup_w,
        sum_u2, sum_v2, sum_w2,
        gradsq_u, gradsq_v, gradsq_uv, gradsq_logw,
        sum_lapu2, sum_grad4, sum_h, sum_f65,
        max_fg_u, max_fg_uv,
    )
