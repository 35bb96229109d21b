"""Time-invariant per-element quantities, lumped masses and the critical time step.

All tensor builders broadcast over leading axes, so the same code serves a
single element (``J0inv`` of shape (3, 3)) and a whole mesh ((M, 3, 3)).
Six-component quantities use the ordering (11, 22, 33, 12, 13, 23).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .element import ElementKind, H8_NATURAL, shape_derivatives, volume_factor
from .errors import MeshError
from .materials import I1, I2, I4, I5, I6, I7, Material, fibres_of, wave_speed
from .mesh import Mesh

PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

# Hourglass base vectors xi*eta, eta*zeta, zeta*xi, xi*eta*zeta at the H8 nodes.
HOURGLASS_BASE = np.stack(
    [
        H8_NATURAL[:, 0] * H8_NATURAL[:, 1],
        H8_NATURAL[:, 1] * H8_NATURAL[:, 2],
        H8_NATURAL[:, 2] * H8_NATURAL[:, 0],
        H8_NATURAL[:, 0] * H8_NATURAL[:, 1] * H8_NATURAL[:, 2],
    ]
)


@dataclass(frozen=True)
class FibreDirections:
    a: np.ndarray
    b: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=float)
            if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"fibre {name} must be a unit 3-vector, got {v}")
            object.__setattr__(self, name, v)

    @property
    def A(self) -> np.ndarray:
        return np.outer(self.a, self.a)

    @property
    def B(self) -> Optional[np.ndarray]:
        return None if self.b is None else np.outer(self.b, self.b)

    @classmethod
    def of(cls, material: Material) -> Optional["FibreDirections"]:
        a, b = fibres_of(material)
        return None if a is None else cls(a, b)


def g_matrices(J0inv: np.ndarray) -> np.ndarray:
    """G_kl = J0^-1 E_kl J0^-T, shape (..., 6, 3, 3)."""
    J0inv = np.asarray(J0inv, dtype=float)
    cols = np.swapaxes(J0inv, -1, -2)  # cols[..., k, :] is column k of J0inv
    G = np.empty(J0inv.shape[:-2] + (6, 3, 3))
    for p, (k, l) in enumerate(PAIRS):
        outer = cols[..., k, :, None] * cols[..., l, None, :]
        G[..., p, :, :] = outer if k == l else outer + np.swapaxes(outer, -1, -2)
    return G


def _trace_with(S: np.ndarray, G: np.ndarray) -> np.ndarray:
    # tr(S G_p) for each p; S and G_p symmetric
    return np.einsum("ij,...pji->...p", S, G)


def trace_vectors(G: np.ndarray, fibres: Optional[FibreDirections] = None):
    """(m1, m4, m6); the fibre vectors are ``None`` when not applicable."""
    m1 = np.trace(G, axis1=-2, axis2=-1)
    m4 = m6 = None
    if fibres is not None:
        m4 = _trace_with(fibres.A, G)
        if fibres.b is not None:
            m6 = _trace_with(fibres.B, G)
    return m1, m4, m6


def _trace_products(G: np.ndarray, S: Optional[np.ndarray] = None) -> np.ndarray:
    """T[p, q] = tr(S G_p^T G_q) (S = identity when omitted)."""
    if S is None:
        return np.einsum("...pij,...qij->...pq", G, G)
    return np.einsum("ij,...pkj,...qki->...pq", S, G, G)


def trace_matrices(G: np.ndarray, m1: np.ndarray, fibres: Optional[FibreDirections] = None):
    """(M2, M5, M7) with M2 = (m1 m1^T - W) / 2."""
    W = _trace_products(G)
    M2 = 0.5 * (m1[..., :, None] * m1[..., None, :] - W)
    M5 = M7 = None
    if fibres is not None:
        M5 = _trace_products(G, fibres.A)
        if fibres.b is not None:
            M7 = _trace_products(G, fibres.B)
    return M2, M5, M7


def _pull_back(V0, J0inv, K):
    # 2 V0 J0^-T K J0^-1, broadcasting K over an optional component axis
    V0 = np.asarray(V0, dtype=float)
    if K.ndim == J0inv.ndim + 1:
        return 2.0 * V0[..., None, None, None] * np.einsum(
            "...ki,...pkl,...lj->...pij", J0inv, K, J0inv
        )
    return 2.0 * V0[..., None, None] * np.einsum("...ki,...kl,...lj->...ij", J0inv, K, J0inv)


def i_tensors(J0inv: np.ndarray, V0, G: np.ndarray, fibres: Optional[FibreDirections] = None,
              need: frozenset = frozenset({I1, I2, I4, I5, I6, I7})) -> dict:
    """The constant tensors I1m, I2m, I4m, I5m, I6m and I7m.

    Returns a dict keyed by ``"I1m"`` etc.; blocks not in ``need`` (or lacking a
    fibre) are omitted. Six-matrix blocks have shape (..., 6, 3, 3).
    """
    J0inv = np.asarray(J0inv, dtype=float)
    eye = np.eye(3)
    out = {"I1m": _pull_back(V0, J0inv, np.broadcast_to(eye, J0inv.shape))}
    if I2 in need:
        trG = np.trace(G, axis1=-2, axis2=-1)
        out["I2m"] = _pull_back(V0, J0inv, trG[..., None, None] * eye - G)
    if fibres is not None:
        A = fibres.A
        if I4 in need:
            out["I4m"] = _pull_back(V0, J0inv, np.broadcast_to(A, J0inv.shape))
        if I5 in need:
            out["I5m"] = _pull_back(V0, J0inv, A @ G + G @ A)
        if fibres.b is not None:
            B = fibres.B
            if I6 in need:
                out["I6m"] = _pull_back(V0, J0inv, np.broadcast_to(B, J0inv.shape))
            if I7 in need:
                out["I7m"] = _pull_back(V0, J0inv, B @ G + G @ B)
    return out


def gradient_operator(D: np.ndarray, J0inv: np.ndarray) -> np.ndarray:
    """B0 = D^T J0^-T: (..., n, 3) derivatives of the shape functions w.r.t. x0."""
    return np.einsum("ka,...jk->...aj", D, J0inv)


def hourglass_vectors(coords: np.ndarray, D: np.ndarray, J0inv: np.ndarray) -> np.ndarray:
    """Four H8 hourglass shape vectors gamma, shape (..., 4, 8).

    Each base vector has its projection onto linear fields removed, so every
    gamma is orthogonal to the constant vector and to the nodal coordinates.
    """
    coords = np.asarray(coords, dtype=float)
    B0 = gradient_operator(D, J0inv)  # (..., 8, 3)
    hx = np.einsum("ma,...aj->...mj", HOURGLASS_BASE, coords)  # (..., 4, 3)
    return HOURGLASS_BASE - np.einsum("...mj,...aj->...ma", hx, B0)


def hourglass_stiffness(kappa: float, V0, c_hg: float = 0.1):
    return c_hg * kappa * np.cbrt(np.asarray(V0, dtype=float))


def lump_mass(mesh: Mesh, rho: float, V0: np.ndarray) -> np.ndarray:
    """Equal split of each element's mass over its nodes, shape (N,)."""
    if not rho > 0:
        raise ValueError(f"density must be positive, got {rho}")
    n = mesh.kind.nodes
    share = np.repeat(rho * np.asarray(V0, dtype=float) / n, n)
    return np.bincount(mesh.elements.ravel(), weights=share, minlength=mesh.n_nodes)


_T4_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
_H8_FACES = np.array(
    [[0, 1, 2, 3], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]]
)


def characteristic_lengths(mesh: Mesh, V0: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-element length: T4 minimum altitude 3 V0 / A_max, H8 V0 / A_max."""
    if V0 is None:
        V0 = mesh.volumes()
    X = mesh.nodes[mesh.elements]
    if mesh.kind is ElementKind.T4:
        f = X[:, _T4_FACES]  # (M, 4, 3, 3)
        area = 0.5 * np.linalg.norm(np.cross(f[:, :, 1] - f[:, :, 0], f[:, :, 2] - f[:, :, 0]), axis=-1)
        return 3.0 * V0 / area.max(axis=1)
    f = X[:, _H8_FACES]  # (M, 6, 4, 3)
    area = 0.5 * np.linalg.norm(np.cross(f[:, :, 2] - f[:, :, 0], f[:, :, 3] - f[:, :, 1]), axis=-1)
    return V0 / area.max(axis=1)


def _voigt_operator(B0: np.ndarray) -> np.ndarray:
    """Small-strain operator (..., 6, 3n), engineering shears ordered xy, yz, xz."""
    n = B0.shape[-2]
    Bv = np.zeros(B0.shape[:-2] + (6, 3 * n))
    bx, by, bz = B0[..., 0], B0[..., 1], B0[..., 2]
    Bv[..., 0, 0::3] = bx
    Bv[..., 1, 1::3] = by
    Bv[..., 2, 2::3] = bz
    Bv[..., 3, 0::3] = by
    Bv[..., 3, 1::3] = bx
    Bv[..., 4, 1::3] = bz
    Bv[..., 4, 2::3] = by
    Bv[..., 5, 0::3] = bz
    Bv[..., 5, 2::3] = bx
    return Bv


def _isotropic_root(material: Material) -> np.ndarray:
    """Symmetric square root of the isotropic small-strain elasticity matrix."""
    mu = material.shear_modulus
    lam = material.kappa - 2.0 * mu / 3.0
    C = np.diag([2 * mu, 2 * mu, 2 * mu, mu, mu, mu]).astype(float)
    C[:3, :3] += lam
    w, V = np.linalg.eigh(C)
    return (V * np.sqrt(w)) @ V.T


def element_frequency_bound(mesh: Mesh, material: Material, c_hg: float = 0.1) -> np.ndarray:
    """Upper bound on each element's highest natural frequency (rad/s) at the reference state.

    Uses the one-point small-strain stiffness V0 Bv^T C Bv plus the hourglass
    stiffness over the element's lumped nodal mass. By the element eigenvalue
    theorem the largest of these bounds the frequency of the assembled mesh.
    """
    D = shape_derivatives(mesh.kind)
    X = mesh.nodes[mesh.elements]
    J0 = np.einsum("ia,eaj->eij", D, X)
    V0 = np.linalg.det(J0) * volume_factor(mesh.kind)
    J0inv = np.linalg.inv(J0)
    Bv = _voigt_operator(gradient_operator(D, J0inv))
    R = _isotropic_root(material)
    S = R @ (Bv @ np.swapaxes(Bv, -1, -2)) @ R
    stiff = V0 * np.linalg.eigvalsh(S)[:, -1]
    if mesh.kind is ElementKind.H8 and c_hg > 0:
        gamma = hourglass_vectors(X, D, J0inv)
        gg = gamma @ np.swapaxes(gamma, -1, -2)
        stiff = stiff + hourglass_stiffness(material.kappa, V0, c_hg) * np.linalg.eigvalsh(gg)[:, -1]
    node_mass = material.rho * V0 / mesh.kind.nodes
    return np.sqrt(stiff / node_mass)


def stable_lengths(mesh: Mesh, material: Material, c_hg: float = 0.1) -> np.ndarray:
    """Per-element length entering the time-step bound.

    T4 uses the geometric minimum altitude. For H8 the face-area length is not
    conservative (a single cube is stable only up to about 0.58 of it, less with
    hourglass stiffness), so it is capped by c * 2 / omega_e from
    ``element_frequency_bound``.
    """
    L = characteristic_lengths(mesh)
    if mesh.kind is ElementKind.H8:
        L = np.minimum(L, 2.0 * wave_speed(material) / element_frequency_bound(mesh, material, c_hg))
    return L


def critical_dt(mesh: Mesh, material: Material, c_hg: float = 0.1) -> float:
    """Smallest stable element length over the dilatational wave speed."""
    L = stable_lengths(mesh, material, c_hg)
    Le = float(L.min())
    if not Le > 0:
        raise MeshError("degenerate element: zero characteristic length", element=int(np.argmin(L)))
    return Le / wave_speed(material)


@dataclass(frozen=True)
class ElementConstants:
    """Everything the DJ-TLED force evaluation needs that does not change in time.

    Arrays carry an optional leading element axis; ``constants[e]`` slices one
    element out of a mesh-wide table.
    """

    kind: ElementKind
    D: np.ndarray
    J0: np.ndarray
    detJ0: np.ndarray
    J0inv: np.ndarray
    V0: np.ndarray
    G: np.ndarray
    m1: np.ndarray
    M2: np.ndarray
    I1m: np.ndarray
    I2m: Optional[np.ndarray] = None
    m4: Optional[np.ndarray] = None
    m6: Optional[np.ndarray] = None
    M5: Optional[np.ndarray] = None
    M7: Optional[np.ndarray] = None
    I4m: Optional[np.ndarray] = None
    I5m: Optional[np.ndarray] = None
    I6m: Optional[np.ndarray] = None
    I7m: Optional[np.ndarray] = None
    hg: Optional[np.ndarray] = None
    need: frozenset = frozenset({I1})

    def __len__(self):
        return 1 if np.ndim(self.V0) == 0 else len(self.V0)

    def __getitem__(self, e) -> "ElementConstants":
        changes = {}
        for f in dataclasses.fields(self):
            if f.name in ("kind", "D", "need"):
                continue
            value = getattr(self, f.name)
            if value is not None:
                changes[f.name] = value[e]
        return dataclasses.replace(self, **changes)


def element_constants(coords: np.ndarray, kind: ElementKind | str, need: frozenset = frozenset({I1}),
                      fibres: Optional[FibreDirections] = None) -> ElementConstants:
    """Precompute one element (coords (n, 3)) or a batch (coords (M, n, 3))."""
    kind = ElementKind.parse(kind)
    coords = np.asarray(coords, dtype=float)
    D = shape_derivatives(kind)
    J0 = np.einsum("ia,...aj->...ij", D, coords)
    detJ0 = np.linalg.det(J0)
    if np.any(~(detJ0 > 0)):
        bad = int(np.flatnonzero(np.atleast_1d(~(detJ0 > 0)))[0])
        raise MeshError("non-positive reference Jacobian determinant", element=bad)
    J0inv = np.linalg.inv(J0)
    V0 = detJ0 * volume_factor(kind)
    G = g_matrices(J0inv)
    m1, m4, m6 = trace_vectors(G, fibres)
    M2, M5, M7 = trace_matrices(G, m1, fibres)
    tensors = i_tensors(J0inv, V0, G, fibres, need)

    if I4 in need or I5 in need:
        if fibres is None:
            raise ValueError("fibre direction a required for I4/I5")
    if I6 in need or I7 in need:
        if fibres is None or fibres.b is None:
            raise ValueError("fibre direction b required for I6/I7")

    return ElementConstants(
        kind=kind,
        D=D,
        J0=J0,
        detJ0=detJ0,
        J0inv=J0inv,
        V0=V0,
        G=G,
        m1=m1,
        M2=M2,
        I1m=tensors["I1m"],
        I2m=tensors.get("I2m"),
        m4=m4 if (I4 in need) else None,
        m6=m6 if (I6 in need) else None,
        M5=M5 if (I5 in need) else None,
        M7=M7 if (I7 in need) else None,
        I4m=tensors.get("I4m"),
        I5m=tensors.get("I5m"),
        I6m=tensors.get("I6m"),
        I7m=tensors.get("I7m"),
        hg=hourglass_vectors(coords, D, J0inv) if kind is ElementKind.H8 else None,
        need=frozenset(need),
    )


def mesh_constants(mesh: Mesh, material: Material) -> ElementConstants:
    return element_constants(mesh.nodes[mesh.elements], mesh.kind, material.needs, FibreDirections.of(material))
