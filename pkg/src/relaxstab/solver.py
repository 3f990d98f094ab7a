"""First-order upwind finite volumes for ``U_t + A1 U_x + A2 U_y = -diag(0, e) U``.

Cells are indexed ``U[i, j, :]`` with ``i`` along x and ``j`` along y.
Interior faces use the flux split ``A = A+ + A-`` in the ``A0`` metric.
On a boundary face the outgoing and characteristic modes come from the
adjacent cell and the incoming modes from the control laws; the face flux
is ``A U_b`` with that assembled face state ``U_b``. The relaxation source
is applied afterwards by operator splitting.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .boundary import (
    EDGES,
    EdgeTrace,
    apply_control_laws,
    boundary_term,
    edge_faces,
    edge_range,
    face_eigenstructure,
    quadrature_error_bound,
)
from .exceptions import CflViolation, InsufficientData, NonFiniteState
from .linalg import expm
from .stability import LyapunovWeight

BLOWUP = 1e12
SOURCE_MODES = ("exact-exponential", "explicit-euler")


@dataclass(frozen=True, eq=False)
class GridState:
    U: np.ndarray
    domain: object
    t: float = 0.0

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 3:
            raise ValueError(f"U must have shape (nx, ny, N), got {U.shape}")
        if not np.all(np.isfinite(U)):
            raise NonFiniteState("state contains non-finite values")
        object.__setattr__(self, "U", U)

    nx = property(lambda self: self.U.shape[0])
    ny = property(lambda self: self.U.shape[1])
    N = property(lambda self: self.U.shape[2])
    dx = property(lambda self: self.domain.width / self.nx)
    dy = property(lambda self: self.domain.height / self.ny)

    @property
    def x(self):
        return self.domain.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y(self):
        return self.domain.y_min + (np.arange(self.ny) + 0.5) * self.dy

    def norm2(self):
        return float(np.sum(self.U * self.U) * self.dx * self.dy)

    def lyapunov(self, weight, A0):
        """Discrete ``sum lambda_ij U_ij^T A0 U_ij dx dy``."""
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        dens = np.einsum("ijk,kl,ijl->ij", self.U, A0, self.U)
        return float(np.sum(weight(X, Y) * dens) * self.dx * self.dy)


@dataclass(frozen=True)
class SchemeConfig:
    cfl: float = 0.9
    t_end: float = 1.0
    source_mode: str = "exact-exponential"
    record_every: int = 1
    dt: float = None

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.source_mode not in SOURCE_MODES:
            raise ValueError(f"source_mode must be one of {SOURCE_MODES}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


class _SingleMatrix:
    """Adapter presenting one coefficient matrix as an x-direction system."""

    def __init__(self, A):
        self.A1 = np.asarray(A, float)
        self.A2 = np.zeros_like(self.A1)
        self.N = self.A1.shape[0]


def flux_split(A, A0):
    """Split ``A = A+ + A-`` by the sign of its spectrum in the ``A0`` metric."""
    face = face_eigenstructure(_SingleMatrix(A), A0, (1.0, 0.0))
    mu = face.eigenvalues
    A_plus = face.P @ np.diag(np.maximum(mu, 0.0)) @ face.P_inv
    A_minus = face.P @ np.diag(np.minimum(mu, 0.0)) @ face.P_inv
    return A_plus, A_minus


def spectral_radius(A, A0):
    return float(np.max(np.abs(face_eigenstructure(_SingleMatrix(A), A0, (1.0, 0.0)).eigenvalues)))


def stable_dt(system, A0, dx, dy, cfl):
    """Largest stable step ``cfl / (rho(A1)/dx + rho(A2)/dy)`` of the unsplit scheme."""
    rate = spectral_radius(system.A1, A0) / dx + spectral_radius(system.A2, A0) / dy
    return np.inf if rate == 0.0 else cfl / rate


class Stepper:
    """Precomputed operators for repeated steps on a fixed grid."""

    def __init__(self, system, A0, laws, domain, nx, ny):
        self.system = system
        self.A0 = np.asarray(A0, float)
        self.laws = list(laws)
        self.domain = domain
        self.nx, self.ny = nx, ny
        self.faces = edge_faces(system, self.A0, domain)
        self.A1p, self.A1m = flux_split(system.A1, self.A0)
        self.A2p, self.A2m = flux_split(system.A2, self.A0)
        dx, dy = domain.width / nx, domain.height / ny
        self.dx, self.dy = dx, dy
        xc = domain.x_min + (np.arange(nx) + 0.5) * dx
        yc = domain.y_min + (np.arange(ny) + 0.5) * dy
        self.edge_s = {"left": yc, "right": yc, "bottom": xc, "top": xc}
        for law in self.laws:
            law.check_shapes(self.faces)
        self._source_cache = {}

    def _cells(self, U, edge):
        return {"left": U[0], "right": U[-1], "bottom": U[:, 0], "top": U[:, -1]}[edge]

    def face_states(self, U):
        """Boundary face states per edge, assembled at one time level."""
        zeta, outgoing = {}, {}
        for edge in EDGES:
            face = self.faces[edge]
            z = self._cells(U, edge) @ face.P_inv.T
            zeta[edge] = z
            outgoing[edge] = z[:, face.plus]
        incoming = apply_control_laws(self.faces, self.laws, outgoing, self.edge_s)
        out = {}
        for edge in EDGES:
            face = self.faces[edge]
            z = zeta[edge].copy()
            z[:, face.minus] = incoming[edge]
            out[edge] = z @ face.P.T
        return out

    def traces(self, Ub):
        """Face states as :class:`EdgeTrace` objects, end nodes held constant."""
        out = {}
        for edge in EDGES:
            lo, hi = edge_range(self.domain, edge)
            s = np.concatenate([[lo], self.edge_s[edge], [hi]])
            vals = np.concatenate([Ub[edge][:1], Ub[edge], Ub[edge][-1:]])
            out[edge] = EdgeTrace(edge, s, vals)
        return out

    def source_factor(self, dt, mode):
        key = (dt, mode)
        if key not in self._source_cache:
            e = self.system.e
            if mode == "exact-exponential":
                F = expm(-e * dt)
            else:
                F = np.eye(e.shape[0]) - dt * e
            self._source_cache[key] = F
        return self._source_cache[key]

    def advance(self, U, dt, mode, Ub=None):
        if Ub is None:
            Ub = self.face_states(U)
        nx, ny, N = U.shape
        Fx = np.empty((nx + 1, ny, N))
        Fx[1:-1] = U[:-1] @ self.A1p.T + U[1:] @ self.A1m.T
        Fx[0] = Ub["left"] @ self.system.A1.T
        Fx[-1] = Ub["right"] @ self.system.A1.T
        Fy = np.empty((nx, ny + 1, N))
        Fy[:, 1:-1] = U[:, :-1] @ self.A2p.T + U[:, 1:] @ self.A2m.T
        Fy[:, 0] = Ub["bottom"] @ self.system.A2.T
        Fy[:, -1] = Ub["top"] @ self.system.A2.T
        Unew = U - (dt / self.dx) * (Fx[1:] - Fx[:-1]) - (dt / self.dy) * (Fy[:, 1:] - Fy[:, :-1])
        m = self.system.m
        Unew[..., m:] = Unew[..., m:] @ self.source_factor(dt, mode).T
        if not np.all(np.isfinite(Unew)) or np.max(np.abs(Unew)) > BLOWUP:
            raise NonFiniteState("state blew up (|U|_inf > 1e12 or non-finite)")
        return Unew


def _resolve_dt(stepper, scheme):
    limit = stable_dt(stepper.system, stepper.A0, stepper.dx, stepper.dy, scheme.cfl)
    if scheme.dt is None:
        if not np.isfinite(limit):
            raise CflViolation("zero wave speeds: an explicit dt is required")
        return limit
    if scheme.dt <= 0 or scheme.dt > limit * (1 + 1e-12):
        raise CflViolation(f"dt={scheme.dt:g} exceeds the stable limit {limit:g}")
    return scheme.dt


def step(state, system, A0, laws, scheme, dt=None):
    """Advance ``state`` by one step (``dt`` defaults to the CFL limit)."""
    stepper = Stepper(system, A0, laws, state.domain, state.nx, state.ny)
    dt = _resolve_dt(stepper, scheme if dt is None else replace(scheme, dt=dt))
    return GridState(stepper.advance(state.U, dt, scheme.source_mode), state.domain, state.t + dt)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    residual: float
    n_samples: int


def fit_decay(t, L, transient=0.1):
    """Least-squares exponential rate of a positive series, skipping the initial transient.

    Raises
    ------
    InsufficientData
        Fewer than 10 positive samples.
    """
    t = np.asarray(t, float)
    L = np.asarray(L, float)
    keep = L > 0
    t, L = t[keep], L[keep]
    if t.size < 10:
        raise InsufficientData(f"need at least 10 positive samples, got {t.size}")
    start = int(np.floor(transient * t.size))
    t, y = t[start:], np.log(L[start:])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    return DecayFit(float(-slope), float(intercept), float(np.sqrt(np.mean(resid**2))), int(t.size))


@dataclass(eq=False)
class SimulationReport:
    steps: np.ndarray
    t: np.ndarray
    norm2: np.ndarray
    lyapunov: np.ndarray
    bc_term: np.ndarray
    eps_quad: np.ndarray
    final: GridState
    dt: float
    blew_up: bool = False
    nu: float = None
    fit: DecayFit = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def fitted_rate(self):
        return None if self.fit is None else self.fit.rate

    def monotone(self, rtol=1e-12):
        L = self.lyapunov
        return bool(np.all(L[1:] <= L[:-1] * (1 + rtol) + 1e-300))

    def min_bc_margin(self):
        """Smallest ``BC + eps_quad`` over the records (nonnegative means no violation)."""
        return float(np.min(self.bc_term + self.eps_quad)) if self.bc_term.size else 0.0

    def summary(self):
        rate = self.fitted_rate
        ratio = None if (rate is None or not self.nu) else rate / self.nu
        return {
            "fitted_rate": rate,
            "fit_residual": None if self.fit is None else self.fit.residual,
            "nu": self.nu,
            "ratio": ratio,
            "blew_up": self.blew_up,
            "monotone": self.monotone(),
            "min_bc": float(np.min(self.bc_term)) if self.bc_term.size else None,
            "max_eps_quad": float(np.max(self.eps_quad)) if self.eps_quad.size else None,
            "bc_ok": bool(self.min_bc_margin() >= 0.0),
            "steps": int(self.steps[-1]) if self.steps.size else 0,
            "t_final": self.final.t,
            "dt": self.dt,
            "message": self.message,
        }


def run(system, A0, cert, laws, domain, init, scheme, on_record=None):
    """Simulate to ``scheme.t_end`` and record norm, Lyapunov functional and boundary term.

    ``cert`` supplies the Lyapunov weight and certified rate; with ``None``
    the unit weight is used and no rate is reported. A blow-up ends the run
    early with ``blew_up=True`` instead of raising. ``on_record(step, state,
    traces)`` is called at every recorded step with the boundary face traces.
    """
    U0 = init.U if isinstance(init, GridState) else np.asarray(init, float)
    state = GridState(U0, domain, 0.0)
    A0 = np.asarray(A0, float)
    stepper = Stepper(system, A0, laws, domain, state.nx, state.ny)
    weight = cert.weight if cert is not None else LyapunovWeight(1.0, 0.0, 0.0)
    dt = _resolve_dt(stepper, scheme)
    rec = {k: [] for k in ("steps", "t", "norm2", "lyapunov", "bc_term", "eps_quad")}

    def record(k, st, Ub):
        tr = stepper.traces(Ub)
        rec["steps"].append(k)
        rec["t"].append(st.t)
        rec["norm2"].append(st.norm2())
        rec["lyapunov"].append(st.lyapunov(weight, A0))
        rec["bc_term"].append(boundary_term(tr, stepper.faces, A0, weight, domain))
        rec["eps_quad"].append(quadrature_error_bound(tr, stepper.faces, A0, weight, domain))
        if on_record is not None:
            on_record(k, st, tr)

    U, t, k = state.U, 0.0, 0
    blew_up, message = False, ""
    n_steps = int(np.ceil(scheme.t_end / dt - 1e-9)) if scheme.t_end > 0 else 0
    while True:
        Ub = stepper.face_states(U)
        if k % scheme.record_every == 0 or k == n_steps:
            record(k, GridState(U, domain, t), Ub)
        if k >= n_steps:
            break
        h = min(dt, scheme.t_end - t) if k == n_steps - 1 else dt
        try:
            U = stepper.advance(U, h, scheme.source_mode, Ub)
        except NonFiniteState as exc:
            blew_up, message = True, str(exc)
            break
        t = scheme.t_end if k == n_steps - 1 else t + h
        k += 1
    report = SimulationReport(**{key: np.asarray(v, float) for key, v in rec.items()},
                              final=GridState(U, domain, t), dt=dt, blew_up=blew_up,
                              nu=None if cert is None else cert.nu, message=message)
    report.steps = report.steps.astype(int)
    try:
        report.fit = fit_decay(report.t, report.lyapunov)
    except InsufficientData as exc:
        report.message = report.message or f"decay rate undefined: {exc}"
    return report


def gaussian_bumps(domain, nx, ny, N, bumps):
    """Initial grid with one Gaussian per entry ``{component, center, width, amplitude}``."""
    U = np.zeros((nx, ny, N))
    x = domain.x_min + (np.arange(nx) + 0.5) * domain.width / nx
    y = domain.y_min + (np.arange(ny) + 0.5) * domain.height / ny
    X, Y = np.meshgrid(x, y, indexing="ij")
    for b in bumps:
        cx, cy = b["center"]
        U[..., int(b["component"])] += b.get("amplitude", 1.0) * np.exp(
            -((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * b["width"] ** 2))
    return U


def uniform_random(nx, ny, N, amplitude, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-amplitude, amplitude, size=(nx, ny, N))
