"""Linearized 2-D Saint-Venant channel: model, gate/spillway control laws, audits.

State ordering is ``(h~, w, v)`` with ``h~ = sqrt(g/H*) h``. The channel is
``(0, L) x (0, 1)``: sluice gates on the left and right edges, solid banks
on top and bottom, and a spillway on the bottom bank over ``(L/3, 2L/3)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, trapezoid

from .boundary import ControlLaw, EdgeTrace, Segment, characteristic_gain, edge_faces
from .exceptions import InfeasibleGains, Supercritical, WrongModel
from .stability import LyapunovWeight, RawSystem, RectDomain, RelaxationSystem

H, W, V = 0, 1, 2


@dataclass(frozen=True)
class SaintVenantParams:
    g: float = 9.81
    H_star: float = 1.0
    W_star: float = 0.5
    V_star: float = 0.0
    k: float = 0.1
    l: float = 0.05
    L: float = 10.0

    def __post_init__(self):
        for name in ("g", "H_star", "k", "l", "L"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def c(self):
        """Gravity wave speed ``sqrt(g H*)``."""
        return float(np.sqrt(self.g * self.H_star))

    @property
    def froude(self):
        return float(np.hypot(self.W_star, self.V_star) / self.c)

    @property
    def domain(self):
        return RectDomain(0.0, self.L, 0.0, 1.0)

    @property
    def spillway(self):
        return self.L / 3.0, 2.0 * self.L / 3.0

    def reference_weight(self):
        """``lambda = 2L - x``."""
        return LyapunovWeight(2.0 * self.L, -1.0, 0.0)


@dataclass(frozen=True)
class GateGains:
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0

    def astuple(self):
        return (self.k1, self.k2, self.k3, self.k4)


def unsymmetrized_matrices(p):
    """``(A1, A2, B)`` of the linearization in ``(h, w, v)``."""
    A1 = np.array([[p.W_star, p.H_star, 0.0], [p.g, p.W_star, 0.0], [0.0, 0.0, p.W_star]])
    A2 = np.array([[p.V_star, 0.0, p.H_star], [0.0, p.V_star, 0.0], [p.g, 0.0, p.V_star]])
    return A1, A2, source_matrix(p)


def source_matrix(p):
    return np.array([[0.0, 0.0, 0.0], [0.0, -p.k, p.l], [0.0, -p.l, -p.k]])


def symmetric_matrices(p):
    c = p.c
    A1 = np.array([[p.W_star, c, 0.0], [c, p.W_star, 0.0], [0.0, 0.0, p.W_star]])
    A2 = np.array([[p.V_star, 0.0, c], [0.0, p.V_star, 0.0], [c, 0.0, p.V_star]])
    return A1, A2


def raw_system(p):
    A1, A2 = symmetric_matrices(p)
    return RawSystem(A1, A2, source_matrix(p), np.eye(3))


def build_model(p):
    """Symmetric relaxation system (r = 2) and its symmetrizer ``A0 = I``."""
    A1, A2 = symmetric_matrices(p)
    e = np.array([[p.k, -p.l], [p.l, p.k]])
    return RelaxationSystem(A1, A2, e), np.eye(3)


def steady_slopes(p):
    """Bottom slopes ``(S_x, S_y)`` that make ``(H*, W*, V*)`` a steady state."""
    return ((p.k * p.W_star - p.l * p.V_star) / p.g,
            (p.k * p.V_star + p.l * p.W_star) / p.g)


def _require_subcritical(p):
    if p.V_star != 0.0:
        raise WrongModel(f"gate/spillway laws assume V* = 0, got {p.V_star}")
    if not 0.0 < p.W_star < p.c:
        raise Supercritical(f"need 0 < W* < sqrt(g H*) = {p.c:.6g}, got W* = {p.W_star}")


@dataclass(frozen=True)
class GainRanges:
    """Sufficient gain ranges for a nonnegative boundary term."""

    params: SaintVenantParams
    weight: LyapunovWeight
    k1: tuple
    k2: tuple
    k3: tuple
    t_roots: tuple

    def k4_bound(self, k3):
        """Largest ``|k4|`` keeping the spillway/left-gate balance nonpositive pointwise."""
        p, lam = self.params, self.weight
        a, b = p.spillway
        lam_spill = min(lam(a, 0.0), lam(b, 0.0))
        lam_gate = max(lam(0.0, 0.0), lam(0.0, 1.0))
        val = p.c * p.L * lam_spill * (1.0 - k3) * (1.0 + k3) / (6.0 * p.W_star * lam_gate)
        return float(np.sqrt(max(val, 0.0)))

    def violations(self, gains):
        k1, k2, k3, k4 = gains.astuple()
        out = []
        if not self.k1[0] < k1 < self.k1[1]:
            out.append("k1 out of (-1,1): right-gate balance")
        if not self.k2[0] <= k2 <= self.k2[1]:
            out.append(f"k2 out of [{self.k2[0]:.6g},{self.k2[1]:.6g}]: left-gate balance")
        if not self.k3[0] < k3 < self.k3[1]:
            out.append("k3 out of (-1,1): spillway balance")
        elif abs(k4) > self.k4_bound(k3):
            out.append(f"|k4| exceeds {self.k4_bound(k3):.6g}: spillway balance")
        return out

    def feasible(self, gains):
        return not self.violations(gains)


def quadratic_roots(p):
    """Roots ``t_hi > t_lo`` of ``a t^2 + t + a`` with ``a = W*/(2c)``, both negative."""
    a = p.W_star / (2.0 * p.c)
    disc = 1.0 - 4.0 * a * a
    if disc < 0:
        raise Supercritical("k2 quadratic has no real roots (W* >= sqrt(g H*))")
    sq = np.sqrt(disc)
    return (-1.0 + sq) / (2.0 * a), (-1.0 - sq) / (2.0 * a)


def _k2_from_t(t):
    return (1.0 + t) / (1.0 - t)


def feasible_gains(p, weight=None):
    """Gain ranges; ``weight`` defaults to ``2L - x``.

    Raises
    ------
    Supercritical
        If ``W* >= sqrt(g H*)``.
    """
    _require_subcritical(p)
    t_hi, t_lo = quadratic_roots(p)
    # both roots are negative, so the singular point t = 1 of the map is never hit
    assert t_hi < 1.0 and t_lo < 1.0
    k2 = (_k2_from_t(t_lo), _k2_from_t(t_hi))
    return GainRanges(p, weight or p.reference_weight(), (-1.0, 1.0), k2, (-1.0, 1.0), (t_hi, t_lo))


def build_controls(p, gains, override=False, weight=None):
    """The six segment laws of the channel for the given gains.

    Raises
    ------
    InfeasibleGains
        If a gain leaves its range and ``override`` is false; with ``override``
        the laws are returned tagged ``unsafe``.
    """
    ranges = feasible_gains(p, weight)
    bad = ranges.violations(gains)
    if bad and not override:
        raise InfeasibleGains("; ".join(bad), bad)
    unsafe = bool(bad)
    system, A0 = build_model(p)
    faces = edge_faces(system, A0, p.domain)
    L = p.L
    a, b = p.spillway
    hp, hm = np.array([1.0, 0.0, 1.0]), np.array([1.0, 0.0, -1.0])
    wp, wm = np.array([1.0, 1.0, 0.0]), np.array([1.0, -1.0, 0.0])
    k1, k2, k3, k4 = gains.astuple()

    def local(edge, seg, inc, out, g, label):
        G = characteristic_gain(faces[edge], inc, np.atleast_2d(g), faces[edge], out)
        return ControlLaw(Segment(edge, *seg), "local", G, label=label, unsafe=unsafe)

    laws = [
        local("top", (0.0, L), hm, hp, 1.0, "upper bank (wall)"),
        local("bottom", (0.0, a), hp, hm, 1.0, "lower bank (wall)"),
        local("bottom", (a, b), hp, hm, k3, "spillway k3"),
        local("bottom", (b, L), hp, hm, 1.0, "lower bank (wall)"),
        local("right", (0.0, 1.0), wm, wp, k1, "right gate k1"),
    ]
    inc_left = np.vstack([wp, [0.0, 0.0, 1.0]])
    G_loc = characteristic_gain(faces["left"], inc_left, [[k2], [0.0]], faces["left"], wm)
    G_rem = characteristic_gain(faces["left"], inc_left, [[0.0], [k4]], faces["bottom"], hm)
    laws.append(ControlLaw(Segment("left", 0.0, 1.0), "nonlocal", G_loc,
                           source=Segment("bottom", a, b), source_gain=G_rem,
                           source_map=(L / 3.0, L / 3.0), label="left gate k2,k4",
                           unsafe=unsafe))
    return laws


def _restrict(trace, lo, hi):
    keep = (trace.s >= lo) & (trace.s <= hi)
    return trace.s[keep], trace.U[keep]


def _int(s, f):
    return float(trapezoid(f, s)) if s.size >= 2 else 0.0


def audit_inequalities(traces, p, gains, weight=None):
    """Evaluate the three boundary inequalities on sampled physical traces.

    ``traces`` maps edge name to :class:`EdgeTrace` of ``(h~, w, v)``.
    Returns a dict with each left side, its required sign, a pass flag and
    the closed-form reductions for the gate laws.
    """
    _require_subcritical(p)
    lam = weight or p.reference_weight()
    a = p.W_star / (2.0 * p.c)
    out = {}
    if "right" in traces:
        s, U = traces["right"].s, traces["right"].U
        out["right_gate"] = _int(s, U[:, H] * U[:, W]) + a * _int(s, U[:, H] ** 2)
    else:
        out["right_gate"] = 0.0
    if "left" in traces:
        s, U = traces["left"].s, traces["left"].U
        out["left_gate"] = _int(s, U[:, H] * U[:, W]) + a * _int(s, U[:, H] ** 2 + U[:, W] ** 2)
        lam_gate = lam(0.0, s)
        gate = p.W_star * _int(s, 0.5 * lam_gate * U[:, V] ** 2)
    else:
        out["left_gate"], gate = 0.0, 0.0
    if "bottom" in traces:
        s, U = _restrict(traces["bottom"], *p.spillway)
        spill = p.c * _int(s, lam(s, 0.0) * U[:, H] * U[:, V])
    else:
        spill = 0.0
    out["spillway"] = spill + gate
    out["right_gate_ok"] = out["right_gate"] >= 0.0
    out["left_gate_ok"] = out["left_gate"] <= 0.0
    out["spillway_ok"] = out["spillway"] <= 0.0
    k1, k2 = gains.k1, gains.k2
    out["right_reduction"] = (1.0 - k1) / (1.0 + k1) + a
    t = (k2 - 1.0) / (k2 + 1.0)
    out["left_reduction"] = a * t * t + t + a
    return out


def analytic_bc(traces, p, weight=None, mode="certificate"):
    """Closed-form channel boundary term for ``V* = 0``.

    ``traces`` maps edge name to a callable ``s -> (h~, w, v)`` (integrated
    adaptively) or to an :class:`EdgeTrace` (trapezoid). ``mode="reference"``
    forces ``lambda = 2L - x``; otherwise ``weight`` is used.

    Raises
    ------
    WrongModel
        If ``V* != 0``.
    """
    if p.V_star != 0.0:
        raise WrongModel("closed-form boundary term needs V* = 0")
    if mode == "reference":
        lam = p.reference_weight()
    elif weight is None:
        raise ValueError("weight required unless mode='reference'")
    else:
        lam = weight
    c, Ws, L = p.c, p.W_star, p.L

    def gate_density(U):
        return Ws * (U[V] ** 2 + U[H] ** 2 + U[W] ** 2) + 2.0 * c * U[H] * U[W]

    integrands = {
        "bottom": (0.0, L, lambda s, U: -2.0 * c * lam(s, 0.0) * U[H] * U[V]),
        "top": (0.0, L, lambda s, U: 2.0 * c * lam(s, 1.0) * U[H] * U[V]),
        "right": (0.0, 1.0, lambda s, U: lam(L, s) * gate_density(U)),
        "left": (0.0, 1.0, lambda s, U: -lam(0.0, s) * gate_density(U)),
    }
    total = 0.0
    for edge, tr in traces.items():
        lo, hi, f = integrands[edge]
        if isinstance(tr, EdgeTrace):
            total += _int(tr.s, f(tr.s, tr.U.T))
        else:
            val, _ = quad(lambda s: float(f(s, np.asarray(tr(s), float))), lo, hi,
                          epsabs=1e-12, epsrel=1e-10, limit=200)
            total += val
    return float(total)
