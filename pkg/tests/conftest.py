import numpy as np
import pytest

from relaxstab.saint_venant import SaintVenantParams, build_model
from relaxstab.stability import RelaxationSystem, certify


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return Q @ np.diag(rng.uniform(1.0, cond, n)) @ Q.T


def random_sym(rng, n):
    M = rng.normal(size=(n, n))
    return 0.5 * (M + M.T)


def random_verified_system(rng, N=None, r=None, stable_direction=True):
    """A system satisfying (i)-(iii) together with its block-diagonal symmetrizer.

    ``A_i = A0^-1 S_i`` with ``S_i`` symmetric, so ``A0 A_i`` is symmetric.
    With ``stable_direction`` the leading block of ``S_1`` is negative definite,
    making ``(alpha, beta) = (1, 0)`` admissible.
    """
    N = int(rng.integers(2, 9)) if N is None else N
    r = int(rng.integers(1, N)) if r is None else r
    m = N - r
    X1, X2 = random_spd(rng, m), random_spd(rng, r)
    A0 = np.zeros((N, N))
    A0[:m, :m], A0[m:, m:] = X1, X2
    S1, S2 = random_sym(rng, N), random_sym(rng, N)
    if stable_direction:
        S1[:m, :m] = -random_spd(rng, m)
    A0_inv = np.linalg.inv(A0)
    skew = rng.normal(size=(r, r))
    e = np.linalg.solve(X2, random_spd(rng, r) + skew - skew.T)
    return RelaxationSystem(A0_inv @ S1, A0_inv @ S2, e), A0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sv_params():
    return SaintVenantParams()


@pytest.fixture(scope="session")
def sv_model(sv_params):
    return build_model(sv_params)


@pytest.fixture(scope="session")
def sv_cert(sv_params, sv_model):
    system, A0 = sv_model
    return certify(system, system.r, A0, sv_params.domain)


def channel_traces(p, gains, right_out, left_out, spill_out, m=41, rng=None):
    """Physical channel traces that satisfy the gate, spillway and wall laws exactly.

    ``right_out(y)``, ``left_out(y)`` and ``spill_out(x)`` give the outgoing
    Riemann values ``h+w``, ``h-w`` and ``h-v`` on the right gate, left gate and
    spillway. Left-gate nodes map onto spillway nodes under ``x = L/3 (y + 1)``
    so the two trapezoid sums see the same samples.
    """
    from relaxstab.boundary import EdgeTrace

    rng = np.random.default_rng(0) if rng is None else rng
    k1, k2, k3, k4 = gains.astuple()
    a, b = p.spillway
    y = np.linspace(0.0, 1.0, m)
    xs = np.linspace(a, b, m)

    r = right_out(y)
    right = np.column_stack([(1 + k1) * r / 2, (1 - k1) * r / 2, rng.normal(size=m)])

    phi = spill_out(xs)
    g = left_out(y)
    left = np.column_stack([(1 + k2) * g / 2, (k2 - 1) * g / 2, k4 * phi])

    spill = np.column_stack([(1 + k3) * phi / 2, rng.normal(size=m), (k3 - 1) * phi / 2])
    xw1 = np.linspace(0.0, a, m)[:-1]
    xw2 = np.linspace(b, p.L, m)[1:]
    wall = lambda x: np.column_stack([rng.normal(size=x.size), rng.normal(size=x.size),
                                      np.zeros(x.size)])
    bottom_s = np.concatenate([xw1, xs, xw2])
    bottom = np.vstack([wall(xw1), spill, wall(xw2)])
    xt = np.linspace(0.0, p.L, m)
    return {
        "right": EdgeTrace("right", y, right),
        "left": EdgeTrace("left", y, left),
        "bottom": EdgeTrace("bottom", bottom_s, bottom),
        "top": EdgeTrace("top", xt, wall(xt)),
    }


def random_profile(rng, degree=4):
    """A random low-degree polynomial on its argument."""
    coef = rng.normal(size=degree + 1)
    return lambda s: np.polyval(coef, np.asarray(s, float))
