"""Relaxation-form normalization and the Lyapunov stability certificate.

A raw constant-coefficient system ``U_t + A1 U_x + A2 U_y = Q U`` is brought
to relaxation form by a user-supplied transform ``P``; the structural
stability conditions are then checked numerically and the weighted
Lyapunov functional ``L(U) = int lambda(x, y) U^T A0 U`` is built together
with its certified exponential decay rate.
"""

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from ._validation import as_square
from .exceptions import (
    DissipativityFailure,
    NoAdmissibleDirection,
    NotRelaxationForm,
    SingularTransform,
    SymmetrizerFailure,
    Unbounded,
)
from .linalg import eig_cutoff, inf_norm, max_eig, min_eig, sym

#: relative tolerance on infinity-norm residuals (symmetry, block structure)
SYM_RTOL = 1e-9
#: relative eigenvalue cutoff, as a fraction of the matrix infinity norm
EIG_RTOL = 1e-10
#: number of sampled directions on the unit circle
N_DIRECTIONS = 720
CHI_MAX = 1e12
CHI_RTOL = 1e-6


def _rel(num, den):
    return 0.0 if den == 0.0 else num / den


@dataclass(frozen=True, eq=False)
class RawSystem:
    """``U~_t + A1t U~_x + A2t U~_y = Qt U~`` with a candidate transform ``Pt``."""

    A1t: np.ndarray
    A2t: np.ndarray
    Qt: np.ndarray
    Pt: np.ndarray = None

    def __post_init__(self):
        A1t = as_square(self.A1t, "A1t")
        N = A1t.shape[0]
        object.__setattr__(self, "A1t", A1t)
        object.__setattr__(self, "A2t", as_square(self.A2t, "A2t", N))
        object.__setattr__(self, "Qt", as_square(self.Qt, "Qt", N))
        Pt = np.eye(N) if self.Pt is None else as_square(self.Pt, "Pt", N)
        object.__setattr__(self, "Pt", Pt)

    @property
    def N(self):
        return self.A1t.shape[0]

    @property
    def transform_condition(self):
        return float(np.linalg.cond(self.Pt))


@dataclass(frozen=True, eq=False)
class RelaxationSystem:
    """``U_t + A1 U_x + A2 U_y = -diag(0, e) U`` with ``U = (u, q)``, ``q`` of size r."""

    A1: np.ndarray
    A2: np.ndarray
    e: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        A1 = as_square(self.A1, "A1")
        N = A1.shape[0]
        e = as_square(self.e, "e")
        r = e.shape[0]
        if not 0 < r < N:
            raise ValueError(f"relaxed dimension must satisfy 0 < r < N, got r={r}, N={N}")
        object.__setattr__(self, "A1", A1)
        object.__setattr__(self, "A2", as_square(self.A2, "A2", N))
        object.__setattr__(self, "e", e)

    @classmethod
    def from_blocks(cls, a1, b1, c1, d1, a2, b2, c2, d2, e):
        return cls(np.block([[a1, b1], [c1, d1]]), np.block([[a2, b2], [c2, d2]]), e)

    @property
    def N(self):
        return self.A1.shape[0]

    @property
    def r(self):
        return self.e.shape[0]

    @property
    def m(self):
        """Dimension of the conserved block ``u``."""
        return self.N - self.r

    def _blocks(self, A):
        m = self.m
        return A[:m, :m], A[:m, m:], A[m:, :m], A[m:, m:]

    a1 = property(lambda self: self._blocks(self.A1)[0])
    b1 = property(lambda self: self._blocks(self.A1)[1])
    c1 = property(lambda self: self._blocks(self.A1)[2])
    d1 = property(lambda self: self._blocks(self.A1)[3])
    a2 = property(lambda self: self._blocks(self.A2)[0])
    b2 = property(lambda self: self._blocks(self.A2)[1])
    c2 = property(lambda self: self._blocks(self.A2)[2])
    d2 = property(lambda self: self._blocks(self.A2)[3])

    @property
    def source(self):
        """The full source matrix ``-diag(0, e)``."""
        S = np.zeros((self.N, self.N))
        S[self.m:, self.m:] = -self.e
        return S


@dataclass(frozen=True)
class RectDomain:
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def corners(self):
        return np.array([[self.x_min, self.y_min], [self.x_max, self.y_min],
                         [self.x_max, self.y_max], [self.x_min, self.y_max]])

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a numerical assumption check; never raises."""

    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


@dataclass(frozen=True)
class LyapunovWeight:
    """Linear weight ``lambda(x, y) = K + alpha x + beta y``."""

    K: float
    alpha: float
    beta: float

    def __call__(self, x, y):
        return self.K + self.alpha * np.asarray(x, float) + self.beta * np.asarray(y, float)


@dataclass(frozen=True, eq=False)
class StabilityCertificate:
    system: RelaxationSystem
    domain: RectDomain
    A0: np.ndarray
    alpha: float
    beta: float
    chi: float
    K: float
    lambda_min: float
    lambda_max: float
    sigma: float
    nu: float
    reports: tuple = ()

    @property
    def X1(self):
        return self.A0[: self.system.m, : self.system.m]

    @property
    def X2(self):
        return self.A0[self.system.m:, self.system.m:]

    @property
    def weight(self):
        return LyapunovWeight(self.K, self.alpha, self.beta)

    @property
    def rho_A0(self):
        return max_eig(self.A0)

    def to_dict(self):
        """JSON-ready dump of every certificate field, residual and tolerance."""
        sys_ = self.system
        return {
            "N": sys_.N,
            "r": sys_.r,
            "A1": sys_.A1.tolist(),
            "A2": sys_.A2.tolist(),
            "e": sys_.e.tolist(),
            "normalization_residual": sys_.residual,
            "A0": self.A0.tolist(),
            "domain": asdict(self.domain),
            "alpha": self.alpha,
            "beta": self.beta,
            "chi": self.chi,
            "K": self.K,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "rho_A0": self.rho_A0,
            "sigma": self.sigma,
            "nu": self.nu,
            "checks": [asdict(rep) for rep in self.reports],
            "tolerances": {"sym_rtol": SYM_RTOL, "eig_rtol": EIG_RTOL,
                           "chi_rtol": CHI_RTOL, "n_directions": N_DIRECTIONS},
        }


def normalize_system(raw, r, tol=1e-9):
    """Conjugate ``raw`` by its transform and extract the relaxation block ``e``.

    Raises
    ------
    SingularTransform
        If ``raw.Pt`` is numerically singular.
    NotRelaxationForm
        If ``Pt Qt Pt^-1`` is not ``-diag(0, e)`` with an invertible ``e``.
    """
    N = raw.N
    if not 0 < r < N:
        raise NotRelaxationForm(f"relaxed dimension must satisfy 0 < r < N, got r={r}, N={N}")
    cond = raw.transform_condition
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularTransform(f"transform is singular (condition number {cond:.3g})")
    Pinv = np.linalg.inv(raw.Pt)
    A1 = raw.Pt @ raw.A1t @ Pinv
    A2 = raw.Pt @ raw.A2t @ Pinv
    S = raw.Pt @ raw.Qt @ Pinv
    m = N - r
    e = -S[m:, m:]
    off = S.copy()
    off[m:, m:] = 0.0
    residual = inf_norm(off)
    scale = max(inf_norm(S), 1.0)
    if residual > tol * scale:
        raise NotRelaxationForm(
            f"transformed source is not of the form -diag(0, e) (residual {residual:.3g}); "
            "check the transform or r")
    smin = np.linalg.svd(e, compute_uv=False)[-1]
    if smin <= tol * scale:
        raise NotRelaxationForm(f"relaxation block e is singular (smallest singular value {smin:.3g})")
    return RelaxationSystem(A1, A2, e, residual=residual)


def verify_symmetrizer(system, A0):
    """Check assumption (i): ``A0`` block-diagonal SPD with ``A0 A1``, ``A0 A2`` symmetric."""
    A0 = as_square(A0, "A0", system.N)
    m = system.m
    vals = {}
    for name, A in (("A1", system.A1), ("A2", system.A2)):
        S = A0 @ A
        vals[f"sym_residual_{name}"] = _rel(inf_norm(S - S.T), inf_norm(S))
    vals["A0_asymmetry"] = _rel(inf_norm(A0 - A0.T), inf_norm(A0))
    off = A0.copy()
    off[:m, :m] = 0.0
    off[m:, m:] = 0.0
    vals["block_residual"] = _rel(inf_norm(off), inf_norm(A0))
    vals["min_eig_A0"] = min_eig(A0)
    cutoff = eig_cutoff(A0, EIG_RTOL)
    passed = (all(v <= SYM_RTOL for k, v in vals.items() if k != "min_eig_A0")
              and vals["min_eig_A0"] > cutoff)
    return CheckReport("symmetrizer (i)", bool(passed), vals,
                       {"sym_rtol": SYM_RTOL, "eig_cutoff": cutoff})


def verify_dissipativity(system, A0):
    """Check assumption (ii): ``X2 e + e^T X2`` positive definite."""
    A0 = as_square(A0, "A0", system.N)
    X2 = A0[system.m:, system.m:]
    D = X2 @ system.e + system.e.T @ X2
    lam = min_eig(D)
    cutoff = eig_cutoff(D, EIG_RTOL)
    return CheckReport("dissipativity (ii)", bool(lam > cutoff), {"min_eig": lam},
                       {"eig_cutoff": cutoff})


def _advection_spectrum_max(X1, Sa):
    # X1 Sa is symmetric under (i); the generalized problem returns the
    # (real) eigenvalues of Sa without trusting a nonsymmetric solver
    return float(scipy.linalg.eigh(sym(X1 @ Sa), sym(X1), eigvals_only=True)[-1])


def find_advection_direction(system, A0, n_directions=N_DIRECTIONS):
    """Unit direction ``(alpha, beta)`` minimizing ``lambda_max(alpha a1 + beta a2)``.

    Raises
    ------
    NoAdmissibleDirection
        If no sampled direction makes ``alpha a1 + beta a2`` negative definite.
    """
    A0 = as_square(A0, "A0", system.N)
    m = system.m
    X1 = A0[:m, :m]
    a1, a2 = system.a1, system.a2
    theta = 2.0 * np.pi * np.arange(n_directions) / n_directions
    cos, sin = np.cos(theta), np.sin(theta)
    # snap round-off so that axis directions come out exact
    cos[np.abs(cos) < 1e-14] = 0.0
    sin[np.abs(sin) < 1e-14] = 0.0
    lam = np.array([_advection_spectrum_max(X1, c * a1 + s * a2) for c, s in zip(cos, sin)])
    j = int(np.argmin(lam))
    scale = max(inf_norm(a1), inf_norm(a2), 1e-300)
    if not lam[j] < -EIG_RTOL * scale:
        raise NoAdmissibleDirection(
            "assumption (iii) fails: no direction makes alpha*a1 + beta*a2 negative definite "
            f"(best lambda_max = {lam[j]:.3g})")
    return float(cos[j]), float(sin[j])


def coupling_matrix(system, A0, alpha, beta, chi):
    """``diag(X1 Sa / 2, chi D) - sym(A0 (alpha A1 + beta A2))``; PSD iff ``chi`` absorbs the cross terms."""
    m = system.m
    X1, X2 = A0[:m, :m], A0[m:, m:]
    Sa = alpha * system.a1 + beta * system.a2
    D = X2 @ system.e + system.e.T @ X2
    B = np.zeros_like(A0)
    B[:m, :m] = 0.5 * sym(X1 @ Sa)
    B[m:, m:] = chi * sym(D)
    return B - sym(A0 @ (alpha * system.A1 + beta * system.A2))


def compute_coupling_constant(system, A0, alpha, beta, rtol=CHI_RTOL, chi_max=CHI_MAX):
    """Smallest ``chi >= 0`` making :func:`coupling_matrix` positive semidefinite.

    Found by doubling then bisection on the minimum eigenvalue, which is
    nondecreasing in ``chi``. Returns ``0.0`` when no cross terms need absorbing.
    """
    A0 = as_square(A0, "A0", system.N)

    def ok(chi):
        M = coupling_matrix(system, A0, alpha, beta, chi)
        return min_eig(M) >= -eig_cutoff(M, EIG_RTOL)

    if ok(0.0):
        return 0.0
    hi = 1.0
    while not ok(hi):
        hi *= 2.0
        if hi > chi_max:
            raise Unbounded(f"coupling matrix not PSD for chi up to {chi_max:g}")
    lo = 0.0 if hi == 1.0 else hi / 2.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def build_weight(domain, alpha, beta, chi):
    """Choose ``K`` so that ``lambda = K + alpha x + beta y > 2 chi`` on the closed rectangle.

    Returns ``(K, lambda_min, lambda_max)``; extrema of a linear function sit at corners.
    """
    if chi < 0:
        raise ValueError("chi must be nonnegative")
    lin = alpha * domain.corners[:, 0] + beta * domain.corners[:, 1]
    base = 2.0 * chi - lin.min()
    K = base + max(1.0, 0.01 * abs(base))
    return float(K), float(K + lin.min()), float(K + lin.max())


def decay_rate(system, A0, alpha, beta, K, domain):
    """Return ``(sigma, nu)`` with ``nu = sigma / (2 lambda_max rho(A0))``."""
    A0 = as_square(A0, "A0", system.N)
    m = system.m
    X1, X2 = A0[:m, :m], A0[m:, m:]
    Sa = alpha * system.a1 + beta * system.a2
    D = X2 @ system.e + system.e.T @ X2
    lin = alpha * domain.corners[:, 0] + beta * domain.corners[:, 1]
    lam_min, lam_max = K + lin.min(), K + lin.max()
    sigma = min(min_eig(-X1 @ Sa), lam_min * min_eig(D))
    nu = sigma / (2.0 * lam_max * max_eig(A0))
    return float(sigma), float(nu)


def certify(raw, r, A0, domain):
    """Run the full certification pipeline and return a :class:`StabilityCertificate`.

    ``raw`` may be a :class:`RawSystem` or an already normalized
    :class:`RelaxationSystem` (then ``r`` must match). ``A0`` is the
    symmetrizer in the normalized coordinates.
    """
    if isinstance(raw, RelaxationSystem):
        if raw.r != r:
            raise NotRelaxationForm(f"system has r={raw.r}, requested r={r}")
        system = raw
    else:
        system = normalize_system(raw, r)
    A0 = as_square(A0, "A0", system.N)
    rep_i = verify_symmetrizer(system, A0)
    if not rep_i:
        raise SymmetrizerFailure(f"assumption (i) fails: {rep_i.values}")
    rep_ii = verify_dissipativity(system, A0)
    if not rep_ii:
        raise DissipativityFailure(f"assumption (ii) fails: {rep_ii.values}")
    alpha, beta = find_advection_direction(system, A0)
    chi = compute_coupling_constant(system, A0, alpha, beta)
    K, lam_min, lam_max = build_weight(domain, alpha, beta, chi)
    sigma, nu = decay_rate(system, A0, alpha, beta, K, domain)
    return StabilityCertificate(system, domain, A0, alpha, beta, chi, K, lam_min, lam_max,
                                sigma, nu, (rep_i, rep_ii))
