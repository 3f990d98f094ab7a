import numpy as np
import pytest
from scipy.integrate import quad

from relaxstab.boundary import (
    EdgeTrace,
    apply_control_laws,
    boundary_term,
    edge_faces,
    reconstruct,
)
from relaxstab.exceptions import InfeasibleGains, Supercritical, WrongModel
from relaxstab.saint_venant import (
    H,
    V,
    W,
    GateGains,
    SaintVenantParams,
    analytic_bc,
    audit_inequalities,
    build_controls,
    build_model,
    feasible_gains,
    quadratic_roots,
    steady_slopes,
    symmetric_matrices,
    unsymmetrized_matrices,
)
from relaxstab.solver import SchemeConfig, gaussian_bumps, run
from relaxstab.stability import RelaxationSystem

from .conftest import channel_traces, random_profile

REF_GAINS = GateGains(0.5, 0.5, 0.0, 1.0)


# -- model ---------------------------------------------------------------------


def test_reference_matrices(sv_params):
    system, A0 = build_model(sv_params)
    c = sv_params.c
    assert c == pytest.approx(3.1321, abs=1e-4)
    assert np.array_equal(system.A1, [[0.5, c, 0], [c, 0.5, 0], [0, 0, 0.5]])
    assert np.array_equal(system.A2, [[0, 0, c], [0, 0, 0], [c, 0, 0]])
    assert np.array_equal(system.e, [[0.1, -0.05], [0.05, 0.1]])
    assert np.array_equal(A0, np.eye(3)) and system.r == 2


def test_depth_rescaling_symmetrizes(sv_params):
    p = sv_params
    A1b, A2b, _ = unsymmetrized_matrices(p)
    D = np.diag([np.sqrt(p.g / p.H_star), 1.0, 1.0])
    A1, A2 = symmetric_matrices(p)
    Dinv = np.linalg.inv(D)
    assert np.abs(D @ A1b @ Dinv - A1).max() <= 1e-12
    assert np.abs(D @ A2b @ Dinv - A2).max() <= 1e-12


def test_model_at_rest_builds():
    system, _ = build_model(SaintVenantParams(W_star=0.0))
    assert not system.a1.any() and not system.a2.any()


@pytest.mark.parametrize("name", ["g", "H_star", "k", "l", "L"])
def test_params_positive(name):
    with pytest.raises(ValueError):
        SaintVenantParams(**{name: 0.0})


def test_steady_slopes(sv_params):
    Sx, Sy = steady_slopes(sv_params)
    assert Sx == pytest.approx(0.1 * 0.5 / 9.81) and Sx == pytest.approx(5.097e-3, rel=1e-3)
    assert Sy == pytest.approx(0.05 * 0.5 / 9.81) and Sy == pytest.approx(2.548e-3, rel=1e-3)
    assert steady_slopes(SaintVenantParams(W_star=0.0)) == (0.0, 0.0)
    p = SaintVenantParams(V_star=0.3, l=1e-300)
    assert steady_slopes(p)[1] == pytest.approx(p.k * 0.3 / p.g)


# -- feasible ranges -----------------------------------------------------------


def test_quadratic_roots_match_numeric(sv_params):
    a = sv_params.W_star / (2 * sv_params.c)
    t_hi, t_lo = quadratic_roots(sv_params)
    ref = np.sort(np.roots([a, 1.0, a]).real)
    assert np.allclose([t_lo, t_hi], ref, rtol=1e-12)
    assert t_hi == pytest.approx(-0.0804, abs=1e-4) and t_lo == pytest.approx(-12.447, abs=2e-3)


def test_k2_interval(sv_params):
    ranges = feasible_gains(sv_params)
    lo, hi = ranges.k2
    assert lo == pytest.approx(-0.851, abs=1e-3) and hi == pytest.approx(0.851, abs=1e-3)
    # scan oracle: the left-gate reduction is nonpositive exactly on the interval
    a = sv_params.W_star / (2 * sv_params.c)
    k2 = np.linspace(-2, 2, 40001)
    k2 = k2[np.abs(k2 + 1) > 1e-9]
    t = (k2 - 1) / (k2 + 1)
    inside = k2[a * t * t + t + a <= 0]
    assert inside.min() == pytest.approx(lo, abs=2e-4) and inside.max() == pytest.approx(hi, abs=2e-4)


def test_k4_bound_reference(sv_params):
    ranges = feasible_gains(sv_params)
    p = sv_params
    assert ranges.k4_bound(0.0) == pytest.approx(np.sqrt(p.c * p.L / (9 * p.W_star)))
    assert ranges.k4_bound(0.0) == pytest.approx(2.638, abs=1e-3)
    assert ranges.k4_bound(0.6) == pytest.approx(ranges.k4_bound(0.0) * np.sqrt(1 - 0.36))


def test_k4_bound_numeric_oracle(sv_params):
    # pointwise spillway + gate coefficient per unit phi^2, minimized over the gate
    p, k3 = sv_params, 0.3
    lam = p.reference_weight()
    y = np.linspace(0, 1, 10**4)
    x = p.L / 3 * (y + 1)
    allowed = p.c * (1 - k3**2) / 4 * lam(x, 0.0) * (p.L / 3) / (p.W_star / 2 * lam(0.0, y))
    assert feasible_gains(p).k4_bound(k3) == pytest.approx(np.sqrt(allowed.min()), rel=1e-9)


def test_k2_interval_collapses_near_critical():
    p = SaintVenantParams()
    q = SaintVenantParams(W_star=p.c * (1 - 1e-10))
    lo, hi = feasible_gains(q).k2
    assert hi - lo < 1e-3 and abs(lo) < 1e-3


def test_supercritical_and_wrong_model(sv_params):
    with pytest.raises(Supercritical):
        feasible_gains(SaintVenantParams(W_star=4.0))
    with pytest.raises(WrongModel):
        feasible_gains(SaintVenantParams(V_star=0.1))


def test_reference_gains_feasible(sv_params, sv_cert):
    assert feasible_gains(sv_params).feasible(REF_GAINS)
    assert feasible_gains(sv_params, sv_cert.weight).feasible(REF_GAINS)


@pytest.mark.parametrize("gains, tag", [
    (GateGains(1.0, 0, 0, 0), "k1 out of (-1,1)"),
    (GateGains(0, 0.9, 0, 0), "k2 out of"),
    (GateGains(0, 0, -1.0, 0), "k3 out of (-1,1)"),
    (GateGains(0, 0, 0, 3.0), "|k4| exceeds"),
])
def test_violations_named(sv_params, gains, tag):
    bad = feasible_gains(sv_params).violations(gains)
    assert len(bad) == 1 and bad[0].startswith(tag)


# -- control laws --------------------------------------------------------------


def _law_outputs(p, gains, m=24, seed=0):
    """Apply build_controls to random outgoing values and reconstruct physical states."""
    system, A0 = build_model(p)
    faces = edge_faces(system, A0, p.domain)
    laws = build_controls(p, gains)
    rng = np.random.default_rng(seed)
    edge_s = {e: (np.arange(m) + 0.5) * (p.L if e in ("bottom", "top") else 1.0) / m
              for e in faces}
    out = {e: rng.normal(size=(m, f.p)) for e, f in faces.items()}
    inc = apply_control_laws(faces, laws, out, edge_s)
    U = {}
    for e, f in faces.items():
        z = np.zeros((m, 3))
        z[:, f.plus] = out[e]
        z[:, f.minus] = inc[e]
        U[e] = reconstruct(f, z)
    return U, edge_s


def test_zero_gain_laws(sv_params):
    U, s = _law_outputs(sv_params, GateGains())
    r, left, bot = U["right"], U["left"], U["bottom"]
    assert np.allclose(r[:, H] - r[:, W], 0)
    assert np.allclose(left[:, H] + left[:, W], 0) and np.allclose(left[:, V], 0)
    a, b = sv_params.spillway
    sp = (s["bottom"] >= a) & (s["bottom"] < b)
    assert np.allclose(bot[sp, H] + bot[sp, V], 0)


def test_walls_reflect(sv_params):
    U, s = _law_outputs(sv_params, REF_GAINS)
    assert np.allclose(U["top"][:, V], 0)
    a, b = sv_params.spillway
    walls = (s["bottom"] < a) | (s["bottom"] >= b)
    assert np.allclose(U["bottom"][walls, V], 0)


def test_gate_laws_physical(sv_params):
    k1, k2, k3, k4 = 0.3, -0.4, 0.2, 0.7
    U, s = _law_outputs(sv_params, GateGains(k1, k2, k3, k4))
    r, left, bot = U["right"], U["left"], U["bottom"]
    assert np.allclose(r[:, H] - r[:, W], k1 * (r[:, H] + r[:, W]))
    assert np.allclose(left[:, H] + left[:, W], k2 * (left[:, H] - left[:, W]))
    a, b = sv_params.spillway
    sp = (s["bottom"] >= a) & (s["bottom"] < b)
    assert np.allclose(bot[sp, H] + bot[sp, V], k3 * (bot[sp, H] - bot[sp, V]))
    # nonlocal: v at the left gate samples (h - v) on the spillway at x = L/3 (y+1)
    target = sv_params.L / 3 * (s["left"] + 1)
    src = np.interp(target, s["bottom"][sp], bot[sp, H] - bot[sp, V])
    assert np.allclose(left[:, V], k4 * src)


def test_infeasible_gains_rejected(sv_params):
    with pytest.raises(InfeasibleGains) as info:
        build_controls(sv_params, GateGains(1.5, 0, 0, 0))
    assert info.value.violated and "right-gate" in info.value.violated[0]
    laws = build_controls(sv_params, GateGains(1.5, 0, 0, 0), override=True)
    assert all(law.unsafe for law in laws) and len(laws) == 6


def test_laws_safe_when_feasible(sv_params):
    assert not any(law.unsafe for law in build_controls(sv_params, REF_GAINS))


# -- audits --------------------------------------------------------------------


def test_audit_zero_traces(sv_params):
    z = {e: EdgeTrace(e, np.linspace(0, 1, 5), np.zeros((5, 3))) for e in ("left", "right")}
    z["bottom"] = EdgeTrace("bottom", np.linspace(0, 10, 5), np.zeros((5, 3)))
    a = audit_inequalities(z, sv_params, REF_GAINS)
    assert a["right_gate"] == a["left_gate"] == a["spillway"] == 0.0
    assert a["right_gate_ok"] and a["left_gate_ok"] and a["spillway_ok"]


def test_audit_constant_right_trace(sv_params):
    w = (1 - 0.5) / (1 + 0.5)
    tr = {"right": EdgeTrace("right", [0, 1], [[1.0, w, 0.0], [1.0, w, 0.0]])}
    a = audit_inequalities(tr, sv_params, GateGains(k1=0.5))
    assert a["right_gate"] == pytest.approx(0.4131, abs=1e-4)
    assert a["right_gate"] == pytest.approx(a["right_reduction"], rel=1e-12)


@pytest.mark.parametrize("end", [0, 1])
def test_k2_endpoint_zeroes_reduction(sv_params, end):
    k2 = feasible_gains(sv_params).k2[end]
    assert abs(audit_inequalities({}, sv_params, GateGains(k2=k2))["left_reduction"]) <= 1e-9


def test_feasibility_soundness(sv_params):
    p = sv_params
    ranges = feasible_gains(p)
    rng = np.random.default_rng(2024)
    worst = {"right_gate": np.inf, "left_gate": -np.inf, "spillway": -np.inf}
    for _ in range(1000):
        k3 = rng.uniform(-0.999, 0.999)
        gains = GateGains(rng.uniform(-0.999, 0.999), rng.uniform(*ranges.k2), k3,
                          rng.uniform(-1, 1) * ranges.k4_bound(k3))
        assert ranges.feasible(gains)
        tr = channel_traces(p, gains, random_profile(rng), random_profile(rng),
                            random_profile(rng), m=21, rng=rng)
        a = audit_inequalities(tr, p, gains)
        worst["right_gate"] = min(worst["right_gate"], a["right_gate"])
        worst["left_gate"] = max(worst["left_gate"], a["left_gate"])
        worst["spillway"] = max(worst["spillway"], a["spillway"])
    assert worst["right_gate"] >= -1e-12
    assert worst["left_gate"] <= 1e-12
    assert worst["spillway"] <= 1e-12


def _spike_near_top(lo=0.98):
    def f(x, p=SaintVenantParams()):
        a, b = p.spillway
        y = (np.asarray(x) - a) / (b - a)
        return np.where(y > lo, 1.0, 0.0)
    return f


def test_k4_sharpness(sv_params):
    p = sv_params
    bound = feasible_gains(p).k4_bound(0.0)
    one = lambda s: np.ones_like(s)
    for factor, ok in ((0.99, True), (1.01, False)):
        g = GateGains(0.0, 0.0, 0.0, factor * bound)
        tr = channel_traces(p, g, one, one, _spike_near_top(), m=401)
        assert audit_inequalities(tr, p, g)["spillway_ok"] is ok


def test_k2_sharpness(sv_params):
    p = sv_params
    hi = feasible_gains(p).k2[1]
    one = lambda s: np.ones_like(s)
    for k2, ok in ((0.99 * hi, True), (1.01 * hi, False)):
        g = GateGains(0.0, k2, 0.0, 0.0)
        assert audit_inequalities(channel_traces(p, g, one, one, one), p, g)["left_gate_ok"] is ok


# -- closed-form boundary term -------------------------------------------------


def test_analytic_zero(sv_params, sv_cert):
    z = {e: (lambda s: np.zeros(3)) for e in ("left", "right", "bottom", "top")}
    assert analytic_bc(z, sv_params, sv_cert.weight) == 0.0


def test_analytic_right_edge_reference_mode(sv_params):
    p = sv_params
    u = lambda y: np.array([np.cos(y), y, 1 - y * y])
    val = analytic_bc({"right": u}, p, mode="reference")

    def f(y):
        h, w, v = u(y)
        return v * v + h * h + 2 * p.c / p.W_star * h * w + w * w
    assert val == pytest.approx(p.L * p.W_star * quad(f, 0, 1, epsabs=1e-14)[0], rel=1e-12)


def test_analytic_needs_weight(sv_params):
    with pytest.raises(ValueError):
        analytic_bc({}, sv_params)


def test_analytic_rejects_transverse_flow(sv_cert):
    with pytest.raises(WrongModel):
        analytic_bc({}, SaintVenantParams(V_star=0.2), sv_cert.weight)


def _random_channel_profile(rng):
    polys = [random_profile(rng, 3) for _ in range(3)]
    return lambda s: np.array([f(s) for f in polys])


@pytest.mark.parametrize("seed", range(10))
def test_oracle_equivalence(sv_params, sv_model, sv_cert, seed):
    p = sv_params
    system, A0 = sv_model
    faces = edge_faces(system, A0, p.domain)
    rng = np.random.default_rng(seed)
    prof = {e: _random_channel_profile(rng) for e in ("left", "right", "bottom", "top")}
    w = sv_cert.weight
    exact = analytic_bc(prof, p, w)

    def sampled(m):
        out = {}
        for e, f in prof.items():
            s = np.linspace(0, p.L if e in ("bottom", "top") else 1.0, m)
            out[e] = EdgeTrace(e, s, f(s).T)
        return out

    quad_val = boundary_term(sampled(2049), faces, A0, w, p.domain)
    assert quad_val == pytest.approx(exact, rel=1e-5, abs=1e-6)
    assert analytic_bc(sampled(257), p, w) == pytest.approx(
        boundary_term(sampled(257), faces, A0, w, p.domain), rel=1e-12)


def test_wall_laws_conserve(sv_params):
    p = sv_params
    A1, A2 = symmetric_matrices(p)
    inviscid = RelaxationSystem(A1, A2, np.zeros((2, 2)))
    laws = build_controls(p, GateGains())
    U0 = gaussian_bumps(p.domain, 40, 6, 3, [{"component": 0, "center": (5, 0.5), "width": 1.0}])
    rep = run(inviscid, np.eye(3), None, laws, p.domain, U0, SchemeConfig(t_end=3.0))
    assert np.all(np.diff(rep.norm2) <= 1e-12 * rep.norm2[:-1])
