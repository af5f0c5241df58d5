"""Compiled inner loop of the staggered-grid line-network integrator.

State layout: node voltages ``U[nn]``, per-edge voltage rows
``V2[e, 0..n_e]`` whose first/last columns mirror the endpoint node voltages
(halo copies refreshed every step), and per-edge currents ``I2[e, 0..n_e-1]``
living at cell centres and half time steps.  The padded 2-D layout keeps the
per-edge update loops contiguous so they vectorize.
"""

import numpy as np
from numba import njit

# recording modes
REC_NODE_V = 0
REC_POINT_V = 1
REC_ATT_I = 2
REC_NODE_BRANCH_I = 3
REC_CLAMP_POINT_I = 4
REC_CLAMP_NODE_I = 5


@njit(cache=True, nogil=True)
def step_loop(nsteps, U, V2, I2,
              e_n, e_ca, e_cb, e_dv,
              n_a, n_g,
              inc_ptr, inc_e, inc_k, inc_sign,
              halo_ptr, halo_e, halo_k,
              drive_node, drive_g, drive_emf,
              att_e, att_k, att_a, att_g,
              clampi_e, clampi_k, clampi_a,
              clamp_nodes,
              rec_mode, rec_i0, rec_g,
              out):
    ne = e_n.shape[0]
    nn = n_a.shape[0]
    natt = att_e.shape[0]
    s_arr = np.empty(nn)
    u_prev = np.empty(nn)
    att_vold = np.empty(max(natt, 1))
    for m in range(nsteps):
        # currents at t_{m+1/2} from voltages at t_m
        for e in range(ne):
            n = e_n[e]
            ca = e_ca[e]
            cb = e_cb[e]
            Ie = I2[e]
            Ve = V2[e]
            for k in range(n):
                Ie[k] = ca * Ie[k] + cb * (Ve[k] - Ve[k + 1])
        # interior voltages at t_{m+1}
        for j in range(natt):
            att_vold[j] = V2[att_e[j], att_k[j]]
        for e in range(ne):
            n = e_n[e]
            dv = e_dv[e]
            Ie = I2[e]
            Ve = V2[e]
            for k in range(1, n):
                Ve[k] += dv * (Ie[k - 1] - Ie[k])
        # shunt attachments at interior cell boundaries (fault / guess branch)
        for j in range(natt):
            e = att_e[j]
            k = att_k[j]
            vp = V2[e, k]
            vo = att_vold[j]
            a = att_a[j]
            g = att_g[j]
            vn = (a * vp - 0.5 * g * vo) / (a + 0.5 * g)
            V2[e, k] = vn
            if rec_mode == REC_ATT_I and rec_i0 == j:
                out[m] = g * 0.5 * (vn + vo)
        for c in range(clampi_e.shape[0]):
            vp = V2[clampi_e[c], clampi_k[c]]
            if rec_mode == REC_CLAMP_POINT_I and rec_i0 == c:
                out[m] = clampi_a[c] * vp
            V2[clampi_e[c], clampi_k[c]] = 0.0
        # node voltages: half-cell capacitances + trapezoidal lumped branches
        for nd in range(nn):
            s = 0.0
            for p in range(inc_ptr[nd], inc_ptr[nd + 1]):
                s += inc_sign[p] * I2[inc_e[p], inc_k[p]]
            s_arr[nd] = s
            u_prev[nd] = U[nd]
        for nd in range(nn):
            a = n_a[nd]
            g = n_g[nd]
            U[nd] = ((a - 0.5 * g) * U[nd] + s_arr[nd]) / (a + 0.5 * g)
        for d in range(drive_node.shape[0]):
            nd = drive_node[d]
            U[nd] += drive_g[d] * drive_emf[d, m] / (n_a[nd] + 0.5 * n_g[nd])
        for c in range(clamp_nodes.shape[0]):
            nd = clamp_nodes[c]
            if rec_mode == REC_CLAMP_NODE_I and rec_i0 == nd:
                out[m] = s_arr[nd] + n_a[nd] * u_prev[nd]
            U[nd] = 0.0
        if rec_mode == REC_NODE_BRANCH_I:
            out[m] = rec_g * 0.5 * (U[rec_i0] + u_prev[rec_i0])
        # refresh halo copies of node voltages
        for nd in range(nn):
            u = U[nd]
            for p in range(halo_ptr[nd], halo_ptr[nd + 1]):
                V2[halo_e[p], halo_k[p]] = u
        if rec_mode == REC_NODE_V:
            out[m + 1] = U[rec_i0]
        elif rec_mode == REC_POINT_V:
            out[m + 1] = V2[rec_i0 // (V2.shape[1]), rec_i0 % (V2.shape[1])]
