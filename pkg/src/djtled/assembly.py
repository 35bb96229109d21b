"""Compiled whole-mesh force assembly for both engines.

Per-element constants are packed into one row per element (``K[e]``) so the
element stage streams through memory once. Two drivers exist:

* serial: element forces are scattered straight into the global vector in
  ascending element order;
* parallel: elements write a private buffer and nodes gather their rows
  through a CSR adjacency, again in ascending element order.

Both add each node's contributions in the same order starting from zero, so
they give bit-identical results for every thread count.
"""

from __future__ import annotations

import time
import warnings
from typing import Optional

import os

import numba
import numpy as np
from numba import njit, prange

from .element import ElementKind, shape_derivatives
from .forces import adjacency
from .materials import I2, I4, I6, Material, fibres_of
from .mesh import Mesh
from .precompute import PAIRS, ElementConstants, hourglass_stiffness, hourglass_vectors, mesh_constants
from .tled import TledConstants

ENGINES = ("djtled", "tled")

if "NUMBA_THREADING_LAYER" not in os.environ:
    # prefer OpenMP; probing an outdated TBB only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

# Offsets into the optional-block table ``lay``; -1 marks an absent block.
L_I2M, L_I4M, L_I6M, L_HG = range(4)

_ROWS = np.array([k for k, _ in PAIRS])
_COLS = np.array([l for _, l in PAIRS])


# ---------------------------------------------------------------- element kernels


@njit(cache=True, inline="always")
def _hg_apply(r, o, f, q0x, q0y, q0z, q1x, q1y, q1z, q2x, q2y, q2z, q3x, q3y, q3z):
    """Add k sum_m gamma_m q_m to the element forces; ``r[o]`` is k, the gammas follow."""
    g = o + 1
    k = r[o]
    for a in range(8):
        h0 = k * r[g + a]
        h1 = k * r[g + 8 + a]
        h2 = k * r[g + 16 + a]
        h3 = k * r[g + 24 + a]
        f[a, 0] += h0 * q0x + h1 * q1x + h2 * q2x + h3 * q3x
        f[a, 1] += h0 * q0y + h1 * q1y + h2 * q2y + h3 * q3y
        f[a, 2] += h0 * q0z + h1 * q1z + h2 * q2z + h3 * q3z


@njit(cache=True, inline="always")
def _dj_bracket(r, lay, coef, j00, j01, j02, j10, j11, j12, j20, j21, j22):
    """3x3 force bracket of the Jacobian-operator formulation, plus det Jt."""
    c00 = j11 * j22 - j12 * j21
    c01 = j12 * j20 - j10 * j22
    c02 = j10 * j21 - j11 * j20
    c10 = j02 * j21 - j01 * j22
    c11 = j00 * j22 - j02 * j20
    c12 = j01 * j20 - j00 * j21
    c20 = j01 * j12 - j02 * j11
    c21 = j02 * j10 - j00 * j12
    c22 = j00 * j11 - j01 * j10
    det = j00 * c00 + j01 * c01 + j02 * c02

    g0 = j00 * j00 + j01 * j01 + j02 * j02
    g1 = j10 * j10 + j11 * j11 + j12 * j12
    g2 = j20 * j20 + j21 * j21 + j22 * j22
    g3 = j00 * j10 + j01 * j11 + j02 * j12
    g4 = j00 * j20 + j01 * j21 + j02 * j22
    g5 = j10 * j20 + j11 * j21 + j12 * j22

    J = det * r[9]
    Jm23 = 1.0 / np.cbrt(J * J)
    # every I-tensor K satisfies K : g = p V0 I with p the degree of I in g,
    # so the invariants come out of the tensors the bracket needs anyway
    h = 0.5 / r[10]

    d1 = coef[0]
    k00 = r[11]
    k11 = r[12]
    k22 = r[13]
    k01 = r[14]
    k02 = r[15]
    k12 = r[16]
    I1b = Jm23 * h * (k00 * g0 + k11 * g1 + k22 * g2 + 2.0 * (k01 * g3 + k02 * g4 + k12 * g5))
    dev = d1 * I1b
    k00 *= d1
    k11 *= d1
    k22 *= d1
    k01 *= d1
    k02 *= d1
    k12 *= d1

    o = lay[L_I4M]
    if o >= 0:
        a00 = r[o]
        a11 = r[o + 1]
        a22 = r[o + 2]
        a01 = r[o + 3]
        a02 = r[o + 4]
        a12 = r[o + 5]
        I4b = Jm23 * h * (a00 * g0 + a11 * g1 + a22 * g2 + 2.0 * (a01 * g3 + a02 * g4 + a12 * g5))
        d4 = coef[2] * (I4b - 1.0)
        dev += d4 * I4b
        k00 += d4 * a00
        k11 += d4 * a11
        k22 += d4 * a22
        k01 += d4 * a01
        k02 += d4 * a02
        k12 += d4 * a12

    o = lay[L_I6M]
    if o >= 0:
        a00 = r[o]
        a11 = r[o + 1]
        a22 = r[o + 2]
        a01 = r[o + 3]
        a02 = r[o + 4]
        a12 = r[o + 5]
        I6b = Jm23 * h * (a00 * g0 + a11 * g1 + a22 * g2 + 2.0 * (a01 * g3 + a02 * g4 + a12 * g5))
        d6 = coef[3] * (I6b - 1.0)
        dev += d6 * I6b
        k00 += d6 * a00
        k11 += d6 * a11
        k22 += d6 * a22
        k01 += d6 * a01
        k02 += d6 * a02
        k12 += d6 * a12

    o = lay[L_I2M]
    if o >= 0:
        t00 = g0 * r[o] + g1 * r[o + 6] + g2 * r[o + 12] + g3 * r[o + 18] + g4 * r[o + 24] + g5 * r[o + 30]
        t11 = g0 * r[o + 1] + g1 * r[o + 7] + g2 * r[o + 13] + g3 * r[o + 19] + g4 * r[o + 25] + g5 * r[o + 31]
        t22 = g0 * r[o + 2] + g1 * r[o + 8] + g2 * r[o + 14] + g3 * r[o + 20] + g4 * r[o + 26] + g5 * r[o + 32]
        t01 = g0 * r[o + 3] + g1 * r[o + 9] + g2 * r[o + 15] + g3 * r[o + 21] + g4 * r[o + 27] + g5 * r[o + 33]
        t02 = g0 * r[o + 4] + g1 * r[o + 10] + g2 * r[o + 16] + g3 * r[o + 22] + g4 * r[o + 28] + g5 * r[o + 34]
        t12 = g0 * r[o + 5] + g1 * r[o + 11] + g2 * r[o + 17] + g3 * r[o + 23] + g4 * r[o + 29] + g5 * r[o + 35]
        # I2 is quartic in Jt: T : g = 4 V0 I2
        I2 = 0.5 * h * (t00 * g0 + t11 * g1 + t22 * g2 + 2.0 * (t01 * g3 + t02 * g4 + t12 * g5))
        d2 = coef[1]
        dev += 2.0 * d2 * (Jm23 * Jm23 * I2)
        s = Jm23 * d2
        k00 += s * t00
        k11 += s * t11
        k22 += s * t22
        k01 += s * t01
        k02 += s * t02
        k12 += s * t12

    sc = (-2.0 / 3.0 * dev + J * coef[4] * (J - 1.0)) * r[10] / det

    b00 = Jm23 * (j00 * k00 + j10 * k01 + j20 * k02) + sc * c00
    b01 = Jm23 * (j00 * k01 + j10 * k11 + j20 * k12) + sc * c10
    b02 = Jm23 * (j00 * k02 + j10 * k12 + j20 * k22) + sc * c20
    b10 = Jm23 * (j01 * k00 + j11 * k01 + j21 * k02) + sc * c01
    b11 = Jm23 * (j01 * k01 + j11 * k11 + j21 * k12) + sc * c11
    b12 = Jm23 * (j01 * k02 + j11 * k12 + j21 * k22) + sc * c21
    b20 = Jm23 * (j02 * k00 + j12 * k01 + j22 * k02) + sc * c02
    b21 = Jm23 * (j02 * k01 + j12 * k11 + j22 * k12) + sc * c12
    b22 = Jm23 * (j02 * k02 + j12 * k12 + j22 * k22) + sc * c22
    return b00, b01, b02, b10, b11, b12, b20, b21, b22, det


@njit(cache=True)
def _dj_t4(e, U, conn, K, lay, coef, fib, f):
    r = K[e]
    n0 = conn[e, 0]
    n1 = conn[e, 1]
    n2 = conn[e, 2]
    n3 = conn[e, 3]
    u0 = U[n0, 0]
    u1 = U[n0, 1]
    u2 = U[n0, 2]
    b00, b01, b02, b10, b11, b12, b20, b21, b22, det = _dj_bracket(
        r, lay, coef,
        r[0] + U[n1, 0] - u0, r[1] + U[n1, 1] - u1, r[2] + U[n1, 2] - u2,
        r[3] + U[n2, 0] - u0, r[4] + U[n2, 1] - u1, r[5] + U[n2, 2] - u2,
        r[6] + U[n3, 0] - u0, r[7] + U[n3, 1] - u1, r[8] + U[n3, 2] - u2,
    )
    # D has identity columns for nodes 1..3, so row a of F is column a-1 of the bracket
    f[1, 0] = b00
    f[1, 1] = b10
    f[1, 2] = b20
    f[2, 0] = b01
    f[2, 1] = b11
    f[2, 2] = b21
    f[3, 0] = b02
    f[3, 1] = b12
    f[3, 2] = b22
    f[0, 0] = -(b00 + b01 + b02)
    f[0, 1] = -(b10 + b11 + b12)
    f[0, 2] = -(b20 + b21 + b22)
    return det > 0.0


@njit(cache=True, inline="always")
def _h8_spread(f, j, b0, b1, b2):
    """Row j of the bracket times D: natural-derivative signs of the eight corners."""
    q0 = 0.125 * b0
    q1 = 0.125 * b1
    q2 = 0.125 * b2
    A = q0 + q1
    B = q0 - q1
    f[0, j] = -A - q2
    f[1, j] = B - q2
    f[2, j] = A - q2
    f[3, j] = -B - q2
    f[4, j] = q2 - A
    f[5, j] = B + q2
    f[6, j] = A + q2
    f[7, j] = q2 - B


@njit(cache=True, inline="always")
def _h8_component(U, conn, e, j):
    return (
        U[conn[e, 0], j], U[conn[e, 1], j], U[conn[e, 2], j], U[conn[e, 3], j],
        U[conn[e, 4], j], U[conn[e, 5], j], U[conn[e, 6], j], U[conn[e, 7], j],
    )


@njit(cache=True, inline="always")
def _h8_natural(u0, u1, u2, u3, u4, u5, u6, u7):
    """D @ u for one displacement component: corner sign sums scaled by 1/8."""
    s01 = u0 + u1
    s23 = u2 + u3
    s45 = u4 + u5
    s67 = u6 + u7
    dxi = (u1 + u2 + u5 + u6) - (u0 + u3 + u4 + u7)
    deta = (s23 + s67) - (s01 + s45)
    dzeta = (s45 + s67) - (s01 + s23)
    return 0.125 * dxi, 0.125 * deta, 0.125 * dzeta


@njit(cache=True, inline="always")
def _h8_modes(r, g, u0, u1, u2, u3, u4, u5, u6, u7):
    """Four hourglass amplitudes gamma_m . u for one displacement component."""
    return (
        r[g] * u0 + r[g + 1] * u1 + r[g + 2] * u2 + r[g + 3] * u3
        + r[g + 4] * u4 + r[g + 5] * u5 + r[g + 6] * u6 + r[g + 7] * u7,
        r[g + 8] * u0 + r[g + 9] * u1 + r[g + 10] * u2 + r[g + 11] * u3
        + r[g + 12] * u4 + r[g + 13] * u5 + r[g + 14] * u6 + r[g + 15] * u7,
        r[g + 16] * u0 + r[g + 17] * u1 + r[g + 18] * u2 + r[g + 19] * u3
        + r[g + 20] * u4 + r[g + 21] * u5 + r[g + 22] * u6 + r[g + 23] * u7,
        r[g + 24] * u0 + r[g + 25] * u1 + r[g + 26] * u2 + r[g + 27] * u3
        + r[g + 28] * u4 + r[g + 29] * u5 + r[g + 30] * u6 + r[g + 31] * u7,
    )


@njit(cache=True)
def _dj_h8(e, U, conn, K, lay, coef, fib, f):
    r = K[e]
    g = lay[L_HG] + 1
    x0, x1, x2, x3, x4, x5, x6, x7 = _h8_component(U, conn, e, 0)
    y0, y1, y2, y3, y4, y5, y6, y7 = _h8_component(U, conn, e, 1)
    z0, z1, z2, z3, z4, z5, z6, z7 = _h8_component(U, conn, e, 2)
    dx0, dx1, dx2 = _h8_natural(x0, x1, x2, x3, x4, x5, x6, x7)
    dy0, dy1, dy2 = _h8_natural(y0, y1, y2, y3, y4, y5, y6, y7)
    dz0, dz1, dz2 = _h8_natural(z0, z1, z2, z3, z4, z5, z6, z7)
    q0x, q1x, q2x, q3x = _h8_modes(r, g, x0, x1, x2, x3, x4, x5, x6, x7)
    q0y, q1y, q2y, q3y = _h8_modes(r, g, y0, y1, y2, y3, y4, y5, y6, y7)
    q0z, q1z, q2z, q3z = _h8_modes(r, g, z0, z1, z2, z3, z4, z5, z6, z7)
    b00, b01, b02, b10, b11, b12, b20, b21, b22, det = _dj_bracket(
        r, lay, coef,
        r[0] + dx0, r[1] + dy0, r[2] + dz0,
        r[3] + dx1, r[4] + dy1, r[5] + dz1,
        r[6] + dx2, r[7] + dy2, r[8] + dz2,
    )
    _h8_spread(f, 0, b00, b01, b02)
    _h8_spread(f, 1, b10, b11, b12)
    _h8_spread(f, 2, b20, b21, b22)
    _hg_apply(r, lay[L_HG], f, q0x, q0y, q0z, q1x, q1y, q1z, q2x, q2y, q2z, q3x, q3y, q3z)
    return det > 0.0


@njit(cache=True, inline="always")
def _tled_piola(r, lay, coef, fib, V0, x00, x01, x02, x10, x11, x12, x20, x21, x22):
    """C = X^T X, C^-1 and S from X; returns V0 X S (row-major) and J = det X."""
    J = x00 * (x11 * x22 - x12 * x21) - x01 * (x10 * x22 - x12 * x20) + x02 * (x10 * x21 - x11 * x20)

    C00 = x00 * x00 + x10 * x10 + x20 * x20
    C11 = x01 * x01 + x11 * x11 + x21 * x21
    C22 = x02 * x02 + x12 * x12 + x22 * x22
    C01 = x00 * x01 + x10 * x11 + x20 * x21
    C02 = x00 * x02 + x10 * x12 + x20 * x22
    C12 = x01 * x02 + x11 * x12 + x21 * x22
    a00 = C11 * C22 - C12 * C12
    a01 = C02 * C12 - C01 * C22
    a02 = C01 * C12 - C02 * C11
    a11 = C00 * C22 - C02 * C02
    a12 = C01 * C02 - C00 * C12
    a22 = C00 * C11 - C01 * C01
    detC = C00 * a00 + C01 * a01 + C02 * a02

    Jm23 = 1.0 / np.cbrt(J * J)
    I1 = C00 + C11 + C22
    d1 = coef[0]
    dev = d1 * Jm23 * I1
    s = 2.0 * Jm23 * d1
    S00 = s
    S11 = s
    S22 = s
    S01 = 0.0
    S02 = 0.0
    S12 = 0.0
    if lay[L_I4M] >= 0:
        A0 = fib[0]
        A1 = fib[1]
        A2 = fib[2]
        I4b = Jm23 * (A0 * (C00 * A0 + C01 * A1 + C02 * A2) + A1 * (C01 * A0 + C11 * A1 + C12 * A2)
                      + A2 * (C02 * A0 + C12 * A1 + C22 * A2))
        d4 = coef[2] * (I4b - 1.0)
        dev += d4 * I4b
        s = 2.0 * Jm23 * d4
        S00 += s * A0 * A0
        S11 += s * A1 * A1
        S22 += s * A2 * A2
        S01 += s * A0 * A1
        S02 += s * A0 * A2
        S12 += s * A1 * A2
    if lay[L_I6M] >= 0:
        B0 = fib[3]
        B1 = fib[4]
        B2 = fib[5]
        I6b = Jm23 * (B0 * (C00 * B0 + C01 * B1 + C02 * B2) + B1 * (C01 * B0 + C11 * B1 + C12 * B2)
                      + B2 * (C02 * B0 + C12 * B1 + C22 * B2))
        d6 = coef[3] * (I6b - 1.0)
        dev += d6 * I6b
        s = 2.0 * Jm23 * d6
        S00 += s * B0 * B0
        S11 += s * B1 * B1
        S22 += s * B2 * B2
        S01 += s * B0 * B1
        S02 += s * B0 * B2
        S12 += s * B1 * B2
    if lay[L_I2M] >= 0:
        trC2 = C00 * C00 + C11 * C11 + C22 * C22 + 2.0 * (C01 * C01 + C02 * C02 + C12 * C12)
        I2 = 0.5 * (I1 * I1 - trC2)
        d2 = coef[1]
        Jm43 = Jm23 * Jm23
        dev += 2.0 * d2 * Jm43 * I2
        s = 2.0 * Jm43 * d2
        S00 += s * (I1 - C00)
        S11 += s * (I1 - C11)
        S22 += s * (I1 - C22)
        S01 -= s * C01
        S02 -= s * C02
        S12 -= s * C12
    sc = (-2.0 / 3.0 * dev + J * coef[4] * (J - 1.0)) / detC
    S00 += sc * a00
    S11 += sc * a11
    S22 += sc * a22
    S01 += sc * a01
    S02 += sc * a02
    S12 += sc * a12

    p00 = V0 * (x00 * S00 + x01 * S01 + x02 * S02)
    p01 = V0 * (x00 * S01 + x01 * S11 + x02 * S12)
    p02 = V0 * (x00 * S02 + x01 * S12 + x02 * S22)
    p10 = V0 * (x10 * S00 + x11 * S01 + x12 * S02)
    p11 = V0 * (x10 * S01 + x11 * S11 + x12 * S12)
    p12 = V0 * (x10 * S02 + x11 * S12 + x12 * S22)
    p20 = V0 * (x20 * S00 + x21 * S01 + x22 * S02)
    p21 = V0 * (x20 * S01 + x21 * S11 + x22 * S12)
    p22 = V0 * (x20 * S02 + x21 * S12 + x22 * S22)
    return p00, p01, p02, p10, p11, p12, p20, p21, p22, J


@njit(cache=True, inline="always")
def _tled_spread(r, f, a, p00, p01, p02, p10, p11, p12, p20, p21, p22):
    p = 3 * a
    bx = r[p]
    by = r[p + 1]
    bz = r[p + 2]
    f[a, 0] = bx * p00 + by * p01 + bz * p02
    f[a, 1] = bx * p10 + by * p11 + bz * p12
    f[a, 2] = bx * p20 + by * p21 + bz * p22


@njit(cache=True)
def _tled_t4(e, U, conn, K, lay, coef, fib, f):
    """X = I + U^T B0, C = X^T X, C^-1, S, then F = V0 B0 (X S)^T."""
    r = K[e]
    x00 = x11 = x22 = 1.0
    x01 = x02 = x10 = x12 = x20 = x21 = 0.0
    for a in range(4):
        node = conn[e, a]
        ux = U[node, 0]
        uy = U[node, 1]
        uz = U[node, 2]
        p = 3 * a
        bx = r[p]
        by = r[p + 1]
        bz = r[p + 2]
        x00 += ux * bx
        x01 += ux * by
        x02 += ux * bz
        x10 += uy * bx
        x11 += uy * by
        x12 += uy * bz
        x20 += uz * bx
        x21 += uz * by
        x22 += uz * bz
    p00, p01, p02, p10, p11, p12, p20, p21, p22, J = _tled_piola(
        r, lay, coef, fib, r[12], x00, x01, x02, x10, x11, x12, x20, x21, x22
    )
    for a in range(4):
        _tled_spread(r, f, a, p00, p01, p02, p10, p11, p12, p20, p21, p22)
    return J > 0.0


@njit(cache=True)
def _tled_h8(e, U, conn, K, lay, coef, fib, f):
    """As the T4 kernel, with hourglass mode amplitudes gathered in the same node pass."""
    r = K[e]
    g = lay[L_HG] + 1
    x00 = x11 = x22 = 1.0
    x01 = x02 = x10 = x12 = x20 = x21 = 0.0
    q0x = q0y = q0z = q1x = q1y = q1z = 0.0
    q2x = q2y = q2z = q3x = q3y = q3z = 0.0
    for a in range(8):
        node = conn[e, a]
        ux = U[node, 0]
        uy = U[node, 1]
        uz = U[node, 2]
        p = 3 * a
        bx = r[p]
        by = r[p + 1]
        bz = r[p + 2]
        x00 += ux * bx
        x01 += ux * by
        x02 += ux * bz
        x10 += uy * bx
        x11 += uy * by
        x12 += uy * bz
        x20 += uz * bx
        x21 += uz * by
        x22 += uz * bz
        h0 = r[g + a]
        h1 = r[g + 8 + a]
        h2 = r[g + 16 + a]
        h3 = r[g + 24 + a]
        q0x += h0 * ux
        q0y += h0 * uy
        q0z += h0 * uz
        q1x += h1 * ux
        q1y += h1 * uy
        q1z += h1 * uz
        q2x += h2 * ux
        q2y += h2 * uy
        q2z += h2 * uz
        q3x += h3 * ux
        q3y += h3 * uy
        q3z += h3 * uz
    p00, p01, p02, p10, p11, p12, p20, p21, p22, J = _tled_piola(
        r, lay, coef, fib, r[24], x00, x01, x02, x10, x11, x12, x20, x21, x22
    )
    for a in range(8):
        _tled_spread(r, f, a, p00, p01, p02, p10, p11, p12, p20, p21, p22)
    _hg_apply(r, lay[L_HG], f, q0x, q0y, q0z, q1x, q1y, q1z, q2x, q2y, q2z, q3x, q3y, q3z)
    return J > 0.0


# ---------------------------------------------------------------- drivers


@njit(cache=True, inline="always")
def _at_rest(U, conn, e):
    """True when every node of element e has exactly zero displacement.

    Such elements get exactly zero force instead of the rounding residue of
    the stress terms, so an unloaded body stays identically at rest.
    """
    for a in range(conn.shape[1]):
        node = conn[e, a]
        if U[node, 0] != 0.0 or U[node, 1] != 0.0 or U[node, 2] != 0.0:
            return False
    return True


def _drive_impl(kernel, U, conn, K, lay, coef, fib, F, buf, status, offsets, adj_elem, adj_local):
    """Element map into ``buf``, then an ordered per-node gather.

    Each node sums its element contributions in element order, so the serial
    and threaded builds give bit-identical forces. Returns the first inverted
    element or -1.
    """
    bad = 0
    for e in prange(conn.shape[0]):
        if _at_rest(U, conn, e):
            buf[e] = 0.0
            status[e] = 1
        elif kernel(e, U, conn, K, lay, coef, fib, buf[e]):
            status[e] = 1
        else:
            status[e] = 0
            bad += 1
    for node in prange(F.shape[0]):
        fx = 0.0
        fy = 0.0
        fz = 0.0
        for k in range(offsets[node], offsets[node + 1]):
            e = adj_elem[k]
            a = adj_local[k]
            fx += buf[e, a, 0]
            fy += buf[e, a, 1]
            fz += buf[e, a, 2]
        F[node, 0] = fx
        F[node, 1] = fy
        F[node, 2] = fz
    if bad == 0:
        return -1
    for e in range(conn.shape[0]):
        if status[e] == 0:
            return e
    return -1


# Drivers take the kernel as an argument and are compiled once per kernel and
# process. On-disk caching is left off on purpose: it never hits for dispatcher
# arguments and a cacheable build calls the kernel out of line. The serial
# build also skips reference counting of the per-element ``buf[e]`` views,
# which otherwise costs more than the gather itself.
_drive_serial = njit(_nrt=False)(_drive_impl)
_drive_parallel = njit(parallel=True)(_drive_impl)


def _update_impl(U_next, U, U_prev, F, R, mass, code, target, ramp, t_next, dt, alpha):
    """Central-difference update with mass-proportional damping and strong BCs."""
    dt2 = dt * dt
    lo = 1.0 - 0.5 * alpha * dt
    hi = 1.0 + 0.5 * alpha * dt
    bad = 0
    for n in prange(U.shape[0]):
        for i in range(3):
            c = code[n, i]
            if c == 0:
                v = (dt2 * (R[n, i] - F[n, i]) / mass[n] + 2.0 * U[n, i] - lo * U_prev[n, i]) / hi
            elif c == 1:
                v = 0.0
            else:
                v = min(t_next / ramp[n, i], 1.0) * target[n, i]
            U_next[n, i] = v
            if not np.isfinite(U_next[n, i]):
                bad += 1
    return bad


update_serial = njit(cache=True)(_update_impl)
update_parallel = njit(cache=True, parallel=True)(_update_impl)


# ---------------------------------------------------------------- packing


def _sym6(A: np.ndarray) -> np.ndarray:
    return A[..., _ROWS, _COLS]


def pack_djtled(c: ElementConstants, k_hg: Optional[np.ndarray]):
    """Row-per-element table for the Jacobian-operator kernel and its block layout."""
    M = len(c)
    blocks = [c.J0.reshape(M, 9), (1.0 / c.detJ0)[:, None], c.V0[:, None], _sym6(c.I1m)]
    lay = np.full(4, -1, dtype=np.int64)
    width = 17

    def add(slot, array):
        nonlocal width
        lay[slot] = width
        blocks.append(array)
        width += array.shape[1]

    if c.I2m is not None:
        add(L_I2M, _sym6(c.I2m).reshape(M, 36))
    if c.I4m is not None:
        add(L_I4M, _sym6(c.I4m))
    if c.I6m is not None:
        add(L_I6M, _sym6(c.I6m))
    if c.hg is not None:
        add(L_HG, np.concatenate([k_hg[:, None], c.hg.reshape(M, 32)], axis=1))
    return np.ascontiguousarray(np.concatenate(blocks, axis=1)), lay


def pack_tled(t: TledConstants, material: Material, hg: Optional[np.ndarray], k_hg: Optional[np.ndarray]):
    M = len(t.V0)
    blocks = [t.B0.reshape(M, -1), t.V0[:, None]]
    lay = np.full(4, -1, dtype=np.int64)
    # the TLED kernel only reads the "present" flags of the fibre and I2 slots
    if I2 in material.needs:
        lay[L_I2M] = 0
    if I4 in material.needs:
        lay[L_I4M] = 0
    if I6 in material.needs:
        lay[L_I6M] = 0
    if hg is not None:
        lay[L_HG] = blocks[0].shape[1] + 1
        blocks.append(np.concatenate([k_hg[:, None], hg.reshape(M, 32)], axis=1))
    return np.ascontiguousarray(np.concatenate(blocks, axis=1)), lay


def available_threads() -> int:
    return numba.config.NUMBA_NUM_THREADS


class ForceAssembler:
    """Global internal-force evaluator for one mesh, material and engine.

    ``assembler(U, F)`` fills ``F`` (N, 3) from displacements ``U`` (N, 3) and
    returns the index of an inverted element, or -1.
    """

    def __init__(self, mesh: Mesh, material: Material, engine: str = "djtled", c_hg: float = 0.1,
                 dtype=np.float64, threads: int = 1, parallel: Optional[bool] = None):
        if engine not in ENGINES:
            raise ValueError(f"unknown engine {engine!r} (expected one of {ENGINES})")
        if not c_hg >= 0:
            raise ValueError(f"hourglass coefficient must be non-negative, got {c_hg}")
        start = time.perf_counter()
        self.mesh = mesh
        self.material = material
        self.engine = engine
        self.dtype = np.dtype(dtype)
        self.threads = self._clamp_threads(threads)
        self.parallel = self.threads > 1 if parallel is None else bool(parallel)

        X = mesh.nodes[mesh.elements]
        is_h8 = mesh.kind is ElementKind.H8
        if engine == "djtled":
            consts = mesh_constants(mesh, material)
            self.V0 = consts.V0
            k_hg = hourglass_stiffness(material.kappa, consts.V0, c_hg) if is_h8 else None
            K, lay = pack_djtled(consts, k_hg)
            self._kernel = _dj_h8 if is_h8 else _dj_t4
        else:
            tc = TledConstants.build(X, mesh.kind)
            self.V0 = tc.V0
            hg = k_hg = None
            if is_h8:
                D = shape_derivatives(mesh.kind)
                hg = hourglass_vectors(X, D, np.linalg.inv(np.einsum("ia,eaj->eij", D, X)))
                k_hg = hourglass_stiffness(material.kappa, tc.V0, c_hg)
            K, lay = pack_tled(tc, material, hg, k_hg)
            self._kernel = _tled_h8 if is_h8 else _tled_t4
        self.K = K.astype(self.dtype)
        self.lay = lay
        self.coef = np.array(material.coefficients(), dtype=np.float64)
        a, b = fibres_of(material)
        fib = np.zeros(6)
        if a is not None:
            fib[:3] = a
        if b is not None:
            fib[3:] = b
        self.fib = fib
        self.conn = np.ascontiguousarray(mesh.elements, dtype=np.int64)
        n = mesh.kind.nodes
        self._buf = np.zeros((mesh.n_elements, n, 3), dtype=self.dtype)
        self._status = np.ones(mesh.n_elements, dtype=np.int8)
        self._adj = tuple(np.ascontiguousarray(x, dtype=np.int64) for x in adjacency(mesh))
        self.precompute_seconds = time.perf_counter() - start
        # first call compiles the driver for this kernel; keep that out of step timings
        start = time.perf_counter()
        zeros = np.zeros((mesh.n_nodes, 3), dtype=self.dtype)
        self(zeros, np.empty_like(zeros))
        self.compile_seconds = time.perf_counter() - start

    @staticmethod
    def _clamp_threads(threads) -> int:
        limit = available_threads()
        if threads in (None, "auto", 0):
            return limit
        threads = int(threads)
        if threads < 1:
            raise ValueError(f"thread count must be positive, got {threads}")
        if threads > limit:
            warnings.warn(f"{threads} threads requested but only {limit} available; using {limit}", RuntimeWarning)
            return limit
        return threads

    def __call__(self, U: np.ndarray, F: np.ndarray) -> int:
        if self.parallel:
            numba.set_num_threads(self.threads)
            driver = _drive_parallel
        else:
            driver = _drive_serial
        return driver(self._kernel, U, self.conn, self.K, self.lay, self.coef, self.fib, F, self._buf,
                      self._status, *self._adj)

    def forces(self, U: np.ndarray) -> np.ndarray:
        """Convenience wrapper allocating the output; ``U`` may be flat or (N, 3)."""
        U = np.ascontiguousarray(np.asarray(U).reshape(-1, 3), dtype=self.dtype)
        F = np.empty_like(U)
        self(U, F)
        return F

    def inverted_elements(self, U: np.ndarray) -> np.ndarray:
        """Indices of elements whose current Jacobian determinant is not positive."""
        D = shape_derivatives(self.mesh.kind)
        Ue = np.asarray(U, dtype=float)[self.mesh.elements]
        X0 = self.mesh.nodes[self.mesh.elements]
        with np.errstate(all="ignore"):  # diverged states may hold inf
            det = np.linalg.det(np.einsum("ia,eaj->eij", D, X0 + Ue))
        return np.flatnonzero(~(det > 0))

    def first_inverted(self, U: np.ndarray) -> int:
        bad = self.inverted_elements(U)
        return int(bad[0]) if len(bad) else -1
