"""Hot loop of the primal-dual recursion.

Two interchangeable implementations of ``advance``:

* ``_advance_loops``: explicit per-agent/per-edge loops, compiled with numba.
* ``_advance_numpy``: per-step vectorized numpy, used when numba is disabled
  (``DPDSA_NUMBA=0``) or unavailable.

Both consume the same pre-drawn standard variates, so with a given seed they
produce the same trajectory up to floating-point summation order.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

SET_FULL, SET_BOX, SET_BALL, SET_HALFSPACE, SET_AFFINE = range(5)
NOISE_NONE, NOISE_ADDITIVE, NOISE_REGRESSION = range(3)


@njit
def _project_row(kind, a, b, s, M, y, out):
    m = y.shape[0]
    if kind == SET_FULL:
        for q in range(m):
            out[q] = y[q]
    elif kind == SET_BOX:
        for q in range(m):
            v = y[q]
            if v < a[q]:
                v = a[q]
            elif v > b[q]:
                v = b[q]
            out[q] = v
    elif kind == SET_BALL:
        r2 = 0.0
        for q in range(m):
            d = y[q] - a[q]
            r2 += d * d
        r = np.sqrt(r2)
        if r <= s:
            for q in range(m):
                out[q] = y[q]
        else:
            f = s / r
            for q in range(m):
                out[q] = a[q] + f * (y[q] - a[q])
    elif kind == SET_HALFSPACE:
        viol = -s
        nn = 0.0
        for q in range(m):
            viol += a[q] * y[q]
            nn += a[q] * a[q]
        if viol <= 0.0:
            for q in range(m):
                out[q] = y[q]
        else:
            f = viol / nn
            for q in range(m):
                out[q] = y[q] - f * a[q]
    else:
        for q in range(m):
            acc = a[q]
            for r in range(m):
                acc += M[q, r] * y[r]
            out[q] = acc


@njit
def _advance_loops(
    X, Lam, sumX, sumL,
    atoms, gammas, comm, grad_z,
    e_ptr, e_recv, e_send, e_w,
    Fw, Fz,
    R, C, noise_kind, noise_factor, noise_sigma,
    set_kind, set_a, set_b, set_s, set_M,
):
    n, m = X.shape
    dx = np.zeros((n, m))
    dl = np.zeros((n, m))
    Xn = np.empty((n, m))
    w_noise = np.empty(m)
    z_noise = np.empty(m)
    d = np.empty(m)
    g = np.empty(m)
    u = np.empty(m)
    y = np.empty(m)
    for s in range(atoms.shape[0]):
        at = atoms[s]
        gam = gammas[s]
        dx[:, :] = 0.0
        dl[:, :] = 0.0
        base = e_ptr[at]
        for e in range(base, e_ptr[at + 1]):
            i = e_recv[e]
            j = e_send[e]
            wt = e_w[e]
            slot = e - base
            for q in range(m):
                accw = 0.0
                accz = 0.0
                for r in range(m):
                    accw += Fw[i, j, q, r] * comm[s, slot, 0, r]
                    accz += Fz[i, j, q, r] * comm[s, slot, 1, r]
                w_noise[q] = accw
                z_noise[q] = accz
            for q in range(m):
                # neighbour observations x_ij = x_j + w_ij, lambda_ij = lambda_j + z_ij
                dl[i, q] += wt * (X[i, q] - (X[j, q] + w_noise[q]))
                dx[i, q] += wt * (Lam[i, q] - (Lam[j, q] + z_noise[q]))
        for i in range(n):
            for q in range(m):
                d[q] = X[i, q] - C[i, q]
            for q in range(m):
                acc = 0.0
                for r in range(m):
                    acc += R[i, q, r] * d[r]
                g[q] = acc
            kind = noise_kind[i]
            if kind == NOISE_ADDITIVE:
                for q in range(m):
                    acc = 0.0
                    for r in range(m):
                        acc += noise_factor[i, q, r] * grad_z[s, i, r]
                    g[q] += acc
            elif kind == NOISE_REGRESSION:
                ud = 0.0
                for q in range(m):
                    acc = 0.0
                    for r in range(m):
                        acc += noise_factor[i, q, r] * grad_z[s, i, r]
                    u[q] = acc
                    ud += acc * d[q]
                resid = ud - noise_sigma[i] * grad_z[s, i, m]
                for q in range(m):
                    g[q] = u[q] * resid
            for q in range(m):
                y[q] = X[i, q] - gam * g[q] - gam * dx[i, q] - gam * dl[i, q]
            _project_row(set_kind[i], set_a[i], set_b[i], set_s[i], set_M[i], y, Xn[i])
            for q in range(m):
                Lam[i, q] += gam * dl[i, q]
        for i in range(n):
            for q in range(m):
                X[i, q] = Xn[i, q]
                sumX[i, q] += Xn[i, q]
                sumL[i, q] += Lam[i, q]


def _project_rows_numpy(Y, set_kind, set_a, set_b, set_s, set_M):
    out = Y.copy()
    for kind in np.unique(set_kind):
        idx = np.nonzero(set_kind == kind)[0]
        y = Y[idx]
        if kind == SET_FULL:
            continue
        if kind == SET_BOX:
            out[idx] = np.minimum(np.maximum(y, set_a[idx]), set_b[idx])
        elif kind == SET_BALL:
            dvec = y - set_a[idx]
            r = np.sqrt(np.sum(dvec * dvec, axis=1))
            f = np.where(r <= set_s[idx], 1.0, set_s[idx] / np.where(r > 0, r, 1.0))
            out[idx] = np.where((r <= set_s[idx])[:, None], y, set_a[idx] + f[:, None] * dvec)
        elif kind == SET_HALFSPACE:
            a = set_a[idx]
            viol = np.sum(a * y, axis=1) - set_s[idx]
            f = np.where(viol > 0, viol / np.sum(a * a, axis=1), 0.0)
            out[idx] = y - f[:, None] * a
        else:
            out[idx] = np.einsum("iqr,ir->iq", set_M[idx], y) + set_a[idx]
    return out


def _advance_numpy(
    X, Lam, sumX, sumL,
    atoms, gammas, comm, grad_z,
    e_ptr, e_recv, e_send, e_w,
    Fw, Fz,
    R, C, noise_kind, noise_factor, noise_sigma,
    set_kind, set_a, set_b, set_s, set_M,
):
    n, m = X.shape
    add_mask = (noise_kind == NOISE_ADDITIVE)[:, None]
    reg_mask = (noise_kind == NOISE_REGRESSION)[:, None]
    any_add = bool(add_mask.any())
    any_reg = bool(reg_mask.any())
    trivial_sets = bool(np.all(set_kind == SET_FULL))
    for s in range(atoms.shape[0]):
        at = atoms[s]
        gam = gammas[s]
        lo, hi = e_ptr[at], e_ptr[at + 1]
        recv = e_recv[lo:hi]
        send = e_send[lo:hi]
        wt = e_w[lo:hi, None]
        cz = comm[s, : hi - lo]
        w_noise = np.einsum("eqr,er->eq", Fw[recv, send], cz[:, 0])
        z_noise = np.einsum("eqr,er->eq", Fz[recv, send], cz[:, 1])
        dl = np.zeros((n, m))
        dx = np.zeros((n, m))
        np.add.at(dl, recv, wt * (X[recv] - (X[send] + w_noise)))
        np.add.at(dx, recv, wt * (Lam[recv] - (Lam[send] + z_noise)))
        dvec = X - C
        g = np.einsum("iqr,ir->iq", R, dvec)
        if any_add or any_reg:
            zu = np.einsum("iqr,ir->iq", noise_factor, grad_z[s, :, :m])
            if any_add:
                g = np.where(add_mask, g + zu, g)
            if any_reg:
                resid = np.sum(zu * dvec, axis=1) - noise_sigma * grad_z[s, :, m]
                g = np.where(reg_mask, zu * resid[:, None], g)
        Y = X - gam * g - gam * dx - gam * dl
        Xn = Y if trivial_sets else _project_rows_numpy(Y, set_kind, set_a, set_b, set_s, set_M)
        Lam += gam * dl
        X[...] = Xn
        sumX += X
        sumL += Lam


advance = _advance_loops if USE_NUMBA else _advance_numpy
advance_loops = _advance_loops
advance_numpy = _advance_numpy
