"""Fused per-point evaluation of the nonlinear terms (numba).

Written out in scalars using the structure of each term: Q^2, D and H are
symmetric, Omega Q - Q Omega = P + P^T with P = Omega Q, and
Delta Q Q - Q Delta Q = R^T - R with R = Q Delta Q.
"""

import numpy as np
from numba import njit

S2 = np.sqrt(2.0)
S6 = np.sqrt(6.0)


@njit(cache=True)
def fused_terms(q, u, gu, gq, lq, a, b, c, lam, gamma, out_q, out_f3):
    """Fill out_q (5, N) with -u.grad q + f2 and out_f3 (9, N) with f3.

    q (5, N), u (3, N), gu (9, N) with gu[3 i + j] = d_j u_i,
    gq (15, N) with gq[3 c + j] = d_j q_c, lq (5, N).
    """
    npts = q.shape[1]
    for p in range(npts):
        c0, c1, c2, c3, c4 = q[0, p], q[1, p], q[2, p], q[3, p], q[4, p]
        d1, d2 = c0 / S2, c1 / S6
        x00, x11, x22 = d1 - d2, -d1 - d2, 2.0 * d2
        x01, x02, x12 = c2 / S2, c3 / S2, c4 / S2
        e1, e2 = lq[0, p] / S2, lq[1, p] / S6
        l00, l11, l22 = e1 - e2, -e1 - e2, 2.0 * e2
        l01, l02, l12 = lq[2, p] / S2, lq[3, p] / S2, lq[4, p] / S2

        t2 = c0 * c0 + c1 * c1 + c2 * c2 + c3 * c3 + c4 * c4
        mq = np.sqrt(t2)

        # Q^2 (symmetric) and its trace part
        s00 = x00 * x00 + x01 * x01 + x02 * x02
        s11 = x01 * x01 + x11 * x11 + x12 * x12
        s22 = x02 * x02 + x12 * x12 + x22 * x22
        s01 = x00 * x01 + x01 * x11 + x02 * x12
        s02 = x00 * x02 + x01 * x12 + x02 * x22
        s12 = x01 * x02 + x11 * x12 + x12 * x22
        tq = (s00 + s11 + s22) / 3.0

        g00, g01, g02 = gu[0, p], gu[1, p], gu[2, p]
        g10, g11, g12 = gu[3, p], gu[4, p], gu[5, p]
        g20, g21, g22 = gu[6, p], gu[7, p], gu[8, p]
        w01 = 0.5 * (g01 - g10)
        w02 = 0.5 * (g02 - g20)
        w12 = 0.5 * (g12 - g21)

        # P = Omega Q with Omega = [[0, w01, w02], [-w01, 0, w12], [-w02, -w12, 0]]
        p00 = w01 * x01 + w02 * x02
        p01 = w01 * x11 + w02 * x12
        p02 = w01 * x12 + w02 * x22
        p10 = -w01 * x00 + w12 * x02
        p11 = -w01 * x01 + w12 * x12
        p12 = -w01 * x02 + w12 * x22
        p20 = -w02 * x00 - w12 * x01
        p21 = -w02 * x01 - w12 * x11
        p22 = -w02 * x02 - w12 * x12

        lm = lam * mq
        gb = gamma * b
        gc = gamma * c * t2
        f00 = 2.0 * p00 + lm * g00 + gb * (s00 - tq) - gc * x00
        f11 = 2.0 * p11 + lm * g11 + gb * (s11 - tq) - gc * x11
        f22 = 2.0 * p22 + lm * g22 + gb * (s22 - tq) - gc * x22
        f01 = p01 + p10 + lm * 0.5 * (g01 + g10) + gb * s01 - gc * x01
        f02 = p02 + p20 + lm * 0.5 * (g02 + g20) + gb * s02 - gc * x02
        f12 = p12 + p21 + lm * 0.5 * (g12 + g21) + gb * s12 - gc * x12

        u0, u1, u2 = u[0, p], u[1, p], u[2, p]
        adv0 = u0 * gq[0, p] + u1 * gq[1, p] + u2 * gq[2, p]
        adv1 = u0 * gq[3, p] + u1 * gq[4, p] + u2 * gq[5, p]
        adv2 = u0 * gq[6, p] + u1 * gq[7, p] + u2 * gq[8, p]
        adv3 = u0 * gq[9, p] + u1 * gq[10, p] + u2 * gq[11, p]
        adv4 = u0 * gq[12, p] + u1 * gq[13, p] + u2 * gq[14, p]
        out_q[0, p] = (f00 - f11) / S2 - adv0
        out_q[1, p] = (2.0 * f22 - f00 - f11) / S6 - adv1
        out_q[2, p] = S2 * f01 - adv2
        out_q[3, p] = S2 * f02 - adv3
        out_q[4, p] = S2 * f12 - adv4

        # molecular field H (symmetric)
        cc = c * t2
        h00 = l00 - a * x00 + b * (s00 - tq) - cc * x00
        h11 = l11 - a * x11 + b * (s11 - tq) - cc * x11
        h22 = l22 - a * x22 + b * (s22 - tq) - cc * x22
        h01 = l01 - a * x01 + b * s01 - cc * x01
        h02 = l02 - a * x02 + b * s02 - cc * x02
        h12 = l12 - a * x12 + b * s12 - cc * x12

        # grad Q (.) grad Q
        k00 = k11 = k22 = k01 = k02 = k12 = 0.0
        for k in range(5):
            a0, a1, a2 = gq[3 * k, p], gq[3 * k + 1, p], gq[3 * k + 2, p]
            k00 += a0 * a0
            k11 += a1 * a1
            k22 += a2 * a2
            k01 += a0 * a1
            k02 += a0 * a2
            k12 += a1 * a2

        # antisymmetric Delta Q Q - Q Delta Q = R^T - R, R = Q Delta Q
        r01 = x00 * l01 + x01 * l11 + x02 * l12
        r10 = x01 * l00 + x11 * l01 + x12 * l02
        r02 = x00 * l02 + x01 * l12 + x02 * l22
        r20 = x02 * l00 + x12 * l01 + x22 * l02
        r12 = x01 * l02 + x11 * l12 + x12 * l22
        r21 = x02 * l01 + x12 * l11 + x22 * l12
        a01 = r10 - r01
        a02 = r20 - r02
        a12 = r21 - r12

        out_f3[0, p] = u0 * u0 + k00 + lm * h00
        out_f3[4, p] = u1 * u1 + k11 + lm * h11
        out_f3[8, p] = u2 * u2 + k22 + lm * h22
        sym01 = u0 * u1 + k01 + lm * h01
        sym02 = u0 * u2 + k02 + lm * h02
        sym12 = u1 * u2 + k12 + lm * h12
        out_f3[1, p] = sym01 + a01
        out_f3[3, p] = sym01 - a01
        out_f3[2, p] = sym02 + a02
        out_f3[6, p] = sym02 - a02
        out_f3[5, p] = sym12 + a12
        out_f3[7, p] = sym12 - a12
