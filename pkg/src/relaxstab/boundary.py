"""Characteristic boundary structure, the Lyapunov boundary term and control laws.

Edges of the rectangle are named ``left`` (x = x_min), ``right`` (x = x_max),
``bottom`` (y = y_min) and ``top`` (y = y_max). A point on an edge is
addressed by its coordinate ``s`` along the edge: ``y`` on left/right,
``x`` on bottom/top. Corners belong to the left/right edges.

The face transform ``P`` solves the generalized symmetric eigenproblem
``A0 (n . A) p = mu A0 p`` so that ``P^T A0 P = I`` exactly and
``P^-1 = P^T A0``. Eigenvalues are sorted descending; each eigenvector is
signed so its first non-negligible entry is positive.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import trapezoid

from ._validation import as_square, as_unit_normal
from .exceptions import DegenerateMetric, MapOutOfRange, UncoveredSegment
from .linalg import inf_norm, sym

ZERO_RTOL = 1e-9

EDGES = ("left", "right", "bottom", "top")
NORMALS = {"left": (-1.0, 0.0), "right": (1.0, 0.0), "bottom": (0.0, -1.0), "top": (0.0, 1.0)}


def edge_point(domain, edge, s):
    """Cartesian coordinates of the points ``s`` on ``edge``."""
    s = np.asarray(s, dtype=float)
    if edge == "left":
        return np.full_like(s, domain.x_min), s
    if edge == "right":
        return np.full_like(s, domain.x_max), s
    if edge == "bottom":
        return s, np.full_like(s, domain.y_min)
    if edge == "top":
        return s, np.full_like(s, domain.y_max)
    raise ValueError(f"unknown edge {edge!r}")


def edge_range(domain, edge):
    if edge in ("left", "right"):
        return domain.y_min, domain.y_max
    return domain.x_min, domain.x_max


@dataclass(frozen=True, eq=False)
class BoundaryFace:
    normal: np.ndarray
    position: tuple
    normal_matrix: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray
    eigenvalues: np.ndarray
    p: int
    n: int
    X: np.ndarray

    @property
    def N(self):
        return self.P.shape[0]

    @property
    def n_zero(self):
        return self.N - self.p - self.n

    @property
    def plus(self):
        return slice(0, self.p)

    @property
    def zero(self):
        return slice(self.p, self.p + self.n_zero)

    @property
    def minus(self):
        return slice(self.N - self.n, self.N)

    Lambda_plus = property(lambda self: np.diag(self.eigenvalues[self.plus]))
    Lambda_zero = property(lambda self: np.zeros((self.n_zero, self.n_zero)))
    Lambda_minus = property(lambda self: np.diag(self.eigenvalues[self.minus]))
    X_plus = property(lambda self: self.X[self.plus, self.plus])
    X_zero = property(lambda self: self.X[self.zero, self.zero])
    X_minus = property(lambda self: self.X[self.minus, self.minus])

    @property
    def Lambda(self):
        return np.diag(self.eigenvalues)

    def block_residual(self):
        """Relative off-block mass of ``P^T A0 P`` in the (+, 0, -) partition."""
        off = self.X.copy()
        for blk in (self.plus, self.zero, self.minus):
            off[blk, blk] = 0.0
        return inf_norm(off) / inf_norm(self.X)

    def diagonalization_residual(self):
        D = self.P_inv @ self.normal_matrix @ self.P
        return inf_norm(D - self.Lambda) / max(inf_norm(self.normal_matrix), 1e-300)


def _sign_fix(V, atol=1e-12):
    for j in range(V.shape[1]):
        col = V[:, j]
        big = np.flatnonzero(np.abs(col) > atol * np.max(np.abs(col)) + 1e-14)
        if big.size and col[big[0]] < 0:
            V[:, j] = -col
    return V


def face_eigenstructure(system, A0, normal, position=(np.nan, np.nan)):
    """Characteristic decomposition of ``n1 A1 + n2 A2`` at a boundary point."""
    nrm = as_unit_normal(normal)
    A0 = as_square(A0, "A0", system.N)
    An = nrm[0] * system.A1 + nrm[1] * system.A2
    try:
        mu, V = scipy.linalg.eigh(sym(A0 @ An), sym(A0))
    except np.linalg.LinAlgError as exc:
        raise DegenerateMetric(f"A0 is not positive definite: {exc}") from None
    order = np.argsort(mu)[::-1]
    mu, V = mu[order], _sign_fix(V[:, order])
    cut = ZERO_RTOL * max(inf_norm(An), 1e-300)
    p = int(np.sum(mu > cut))
    n = int(np.sum(mu < -cut))
    mu = np.where(np.abs(mu) <= cut, 0.0, mu)
    P_inv = V.T @ A0
    return BoundaryFace(nrm, tuple(position), An, V, P_inv, mu, p, n, V.T @ A0 @ V)


def edge_faces(system, A0, domain):
    """One face per rectangle edge (coefficients are constant along an edge)."""
    out = {}
    for edge in EDGES:
        lo, hi = edge_range(domain, edge)
        x, y = edge_point(domain, edge, 0.5 * (lo + hi))
        out[edge] = face_eigenstructure(system, A0, NORMALS[edge], (float(x), float(y)))
    return out


@dataclass(frozen=True, eq=False)
class CharacteristicState:
    zeta_plus: np.ndarray
    zeta_zero: np.ndarray
    zeta_minus: np.ndarray

    def concat(self):
        return np.concatenate([self.zeta_plus, self.zeta_zero, self.zeta_minus], axis=-1)


def split_state(face, U):
    """``zeta = P^-1 U`` split into (outgoing, characteristic, incoming) parts.

    Works on one state of shape ``(N,)`` or a stack ``(..., N)``.
    """
    z = np.asarray(U, float) @ face.P_inv.T
    return CharacteristicState(z[..., face.plus], z[..., face.zero], z[..., face.minus])


def reconstruct(face, zeta):
    if isinstance(zeta, CharacteristicState):
        zeta = zeta.concat()
    return np.asarray(zeta, float) @ face.P.T


@dataclass(frozen=True, eq=False)
class EdgeTrace:
    """Boundary values ``U(s)`` sampled at increasing coordinates ``s`` along one edge."""

    edge: str
    s: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, float).reshape(-1)
        U = np.atleast_2d(np.asarray(self.U, float))
        if U.shape[0] != s.shape[0]:
            raise ValueError("trace coordinates and values differ in length")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "U", U)


def _edge_integrand(trace, face, A0, weight, domain):
    x, y = edge_point(domain, trace.edge, trace.s)
    flux = trace.U @ (A0 @ face.normal_matrix).T
    return weight(x, y) * np.einsum("ij,ij->i", trace.U, flux)


def boundary_term(traces, faces, A0, weight, domain):
    """Composite-trapezoid value of ``int_dOmega lambda U^T A0 (n . A) U dl``.

    ``traces`` maps edge name to :class:`EdgeTrace`; missing edges contribute zero.
    """
    total = 0.0
    for edge, trace in traces.items():
        if trace.s.size < 2:
            continue
        f = _edge_integrand(trace, faces[edge], A0, weight, domain)
        total += float(trapezoid(f, trace.s))
    return total


def coarsen_trace(trace):
    """Every-other-node subsample, keeping both end nodes."""
    m = trace.s.size
    idx = np.arange(0, m, 2)
    if idx[-1] != m - 1:
        idx = np.append(idx, m - 1)
    return EdgeTrace(trace.edge, trace.s[idx], trace.U[idx])


def quadrature_error_bound(traces, faces, A0, weight, domain):
    """Richardson estimate ``|BC_h - BC_2h| / 3`` of the trapezoid error."""
    fine = boundary_term(traces, faces, A0, weight, domain)
    coarse = boundary_term({k: coarsen_trace(t) for k, t in traces.items()},
                           faces, A0, weight, domain)
    return abs(fine - coarse) / 3.0


@dataclass(frozen=True)
class Segment:
    """Half-open sub-interval ``[start, stop)`` of an edge, in edge coordinates."""

    edge: str
    start: float
    stop: float

    def __post_init__(self):
        if self.edge not in EDGES:
            raise ValueError(f"unknown edge {self.edge!r}")
        if not self.start < self.stop:
            raise ValueError(f"empty segment {self}")

    def contains(self, s, closed=False):
        s = np.asarray(s, float)
        if closed:
            return (s >= self.start) & (s <= self.stop)
        return (s >= self.start) & (s < self.stop)


@dataclass(frozen=True, eq=False)
class ControlLaw:
    """Assignment of incoming characteristic values on one segment.

    ``kind`` is ``"zero"`` (``zeta_- = 0``), ``"local"``
    (``zeta_- = gain @ zeta_+``) or ``"nonlocal"``, which adds
    ``source_gain @ zeta_+^src(a s + b)`` sampled on ``source`` by linear
    interpolation, with ``(a, b) = source_map``.
    """

    segment: Segment
    kind: str = "zero"
    gain: np.ndarray = None
    source: Segment = None
    source_gain: np.ndarray = None
    source_map: tuple = None
    label: str = ""
    unsafe: bool = False

    def __post_init__(self):
        if self.kind not in ("zero", "local", "nonlocal"):
            raise ValueError(f"unknown law kind {self.kind!r}")
        if self.kind == "nonlocal" and (self.source is None or self.source_gain is None
                                        or self.source_map is None):
            raise ValueError("nonlocal law needs source, source_gain and source_map")
        if self.gain is not None:
            object.__setattr__(self, "gain", np.atleast_2d(np.asarray(self.gain, float)))
        if self.source_gain is not None:
            object.__setattr__(self, "source_gain",
                               np.atleast_2d(np.asarray(self.source_gain, float)))

    def check_shapes(self, faces):
        face = faces[self.segment.edge]
        if self.gain is not None and self.gain.shape != (face.n, face.p):
            raise ValueError(f"{self.label or self.segment}: gain must be {(face.n, face.p)}, "
                             f"got {self.gain.shape}")
        if self.kind == "nonlocal":
            src = faces[self.source.edge]
            if self.source_gain.shape != (face.n, src.p):
                raise ValueError(f"{self.label or self.segment}: source_gain must be "
                                 f"{(face.n, src.p)}, got {self.source_gain.shape}")
            a, b = self.source_map
            lo, hi = sorted((a * self.segment.start + b, a * self.segment.stop + b))
            tol = 1e-12 * max(1.0, abs(self.source.start), abs(self.source.stop))
            if lo < self.source.start - tol or hi > self.source.stop + tol:
                raise MapOutOfRange(f"{self.label or self.segment}: map sends "
                                    f"[{self.segment.start}, {self.segment.stop}] to "
                                    f"[{lo}, {hi}], outside source {self.source}")


def characteristic_gain(in_face, incoming, phys_gain, out_face, outgoing):
    """Translate a physical law ``incoming @ U = phys_gain @ (outgoing @ U_src)`` to characteristic form.

    ``incoming`` (n x N) must only see the incoming modes of ``in_face`` and
    ``outgoing`` (k x N) only the outgoing modes of ``out_face``. Returns the
    ``n x p`` matrix acting on ``zeta_+`` of ``out_face``.
    """
    Lin = np.atleast_2d(np.asarray(incoming, float))
    Lout = np.atleast_2d(np.asarray(outgoing, float))
    Cin_full = Lin @ in_face.P
    Cout_full = Lout @ out_face.P
    mask_in = np.ones(in_face.N, bool)
    mask_in[in_face.minus] = False
    mask_out = np.ones(out_face.N, bool)
    mask_out[out_face.plus] = False
    tol = 1e-9 * max(inf_norm(Cin_full), inf_norm(Cout_full), 1.0)
    if inf_norm(Cin_full[:, mask_in]) > tol:
        raise ValueError("incoming combination involves non-incoming characteristic modes")
    if inf_norm(Cout_full[:, mask_out]) > tol:
        raise ValueError("outgoing combination involves non-outgoing characteristic modes")
    Cin = Cin_full[:, in_face.minus]
    if Cin.shape[0] != Cin.shape[1]:
        raise ValueError(f"need exactly {in_face.n} incoming rows, got {Cin.shape[0]}")
    return np.linalg.solve(Cin, np.atleast_2d(phys_gain) @ Cout_full[:, out_face.plus])


def _face_ownership(laws, edge_s):
    owner = {edge: np.full(s.size, -1) for edge, s in edge_s.items()}
    for k, law in enumerate(laws):
        seg = law.segment
        if seg.edge not in edge_s:
            continue
        hit = seg.contains(edge_s[seg.edge])
        if np.any(owner[seg.edge][hit] >= 0):
            raise ValueError(f"segment {seg} overlaps another control law")
        owner[seg.edge][hit] = k
    return owner


def apply_control_laws(faces, laws, outgoing, edge_s):
    """Incoming characteristic values on every boundary face.

    Parameters
    ----------
    faces : dict
        Edge name -> :class:`BoundaryFace`.
    laws : sequence of ControlLaw
    outgoing : dict
        Edge name -> array (m_edge, p) of outgoing values, all from one time level.
    edge_s : dict
        Edge name -> face coordinates (m_edge,).

    Returns
    -------
    dict
        Edge name -> array (m_edge, n) of incoming values.

    Raises
    ------
    UncoveredSegment
        If a face with incoming modes is governed by no law.
    """
    for law in laws:
        law.check_shapes(faces)
    owner = _face_ownership(laws, edge_s)
    incoming = {}
    for edge, s in edge_s.items():
        face = faces[edge]
        zin = np.zeros((s.size, face.n))
        if face.n and np.any(owner[edge] < 0):
            bad = s[owner[edge] < 0]
            raise UncoveredSegment(f"{edge} edge has ungoverned faces at s in "
                                   f"[{bad.min():g}, {bad.max():g}]")
        incoming[edge] = zin
    # laws only read ``outgoing``; the write order is irrelevant
    for k, law in enumerate(laws):
        edge = law.segment.edge
        if edge not in edge_s or law.kind == "zero" or faces[edge].n == 0:
            continue
        sel = owner[edge] == k
        if not np.any(sel):
            continue
        val = np.zeros((int(sel.sum()), faces[edge].n))
        if law.gain is not None:
            val += outgoing[edge][sel] @ law.gain.T
        if law.kind == "nonlocal":
            src = law.source
            src_s = edge_s[src.edge]
            in_src = src.contains(src_s, closed=True)
            if not np.any(in_src):
                raise MapOutOfRange(f"source segment {src} holds no faces")
            a, b = law.source_map
            target = a * edge_s[edge][sel] + b
            if np.any(~src.contains(target, closed=True)):
                raise MapOutOfRange(f"mapped coordinates leave source segment {src}")
            zsrc = outgoing[src.edge][in_src]
            sampled = np.column_stack([np.interp(target, src_s[in_src], zsrc[:, j])
                                       for j in range(zsrc.shape[1])]) if zsrc.shape[1] else \
                np.zeros((target.size, 0))
            val += sampled @ law.source_gain.T
        incoming[edge][sel] = val
    return incoming


def zero_incoming_laws(domain):
    """``zeta_- = 0`` on all four edges."""
    return [ControlLaw(Segment(edge, *edge_range(domain, edge)), "zero", label=f"{edge}-zero")
            for edge in EDGES]
