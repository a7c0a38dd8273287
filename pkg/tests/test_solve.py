import numpy as np
import pytest
from oracles import dense_thickness

from inscribed_trefoil.curve import Ambient, CurveError, KnotCurve, _CurveOps, _series_mul, circle_r3, ellipse_r3, preset
from inscribed_trefoil.hexknot import classify_hexagon
from inscribed_trefoil.projgeom import circumradius_many
from inscribed_trefoil.solve import (
    DEDUP_RADIUS,
    LINE_TOL,
    Branch,
    CertifiedTrefoil,
    ConfigTuple,
    NonTransverse,
    SeparationViolation,
    ThicknessKind,
    Unresolved,
    _torus_dist,
    certify_trefoil,
    check_separation,
    conjecture1_experiment,
    cyclically_adjacent,
    find_inscribed_prisms,
    find_quadrisecants,
    intersection_sign,
    kappa,
    line_fit,
    minimal_pair,
    r3_model,
    s3_model,
    tau1,
    tau1_params,
    tau2,
    tau2_params,
    thickness,
)

SYMMETRIC_T = np.arange(6) / 6


def contains(sols, t):
    return any(_torus_dist(np.asarray(t)[1:], s.t[1:]) < 1e-6 for s in sols)


# ---------------------------------------------------------------------------
# search


def test_symmetric_solution(std_solutions):
    assert contains(std_solutions, SYMMETRIC_T)


def test_solution_count_odd(std_solutions, figure_eight_solutions, trefoil_solutions):
    for sols in (std_solutions, figure_eight_solutions, trefoil_solutions):
        assert len(sols) % 2 == 1


def test_accepted_solutions_valid(std_solutions, figure_eight_solutions):
    for s in std_solutions + figure_eight_solutions:
        assert s.residual < 1e-8
        assert s.prism is not None
        assert np.all(np.diff(s.t) > 0) and s.t[-1] < s.t[0] + 1
        assert np.allclose(np.linalg.norm(s.points, axis=1), 1.0)
        assert s.sign in (-1, 1)


def test_sorted_by_t2(figure_eight_solutions):
    keys = [tuple(s.t[1:]) for s in figure_eight_solutions]
    assert keys == sorted(keys)


def test_dedup(figure_eight_solutions):
    sols = figure_eight_solutions
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            assert _torus_dist(sols[i].t[1:], sols[j].t[1:]) >= DEDUP_RADIUS


@pytest.mark.parametrize("basepoint", [0.0, 0.3])
def test_great_circle_empty(basepoint):
    assert find_inscribed_prisms(preset("great-circle-s3"), basepoint, 12) == []


def test_search_needs_s3():
    with pytest.raises(CurveError):
        find_inscribed_prisms(preset("trefoil-r3"), 0.0, 6)


def test_determinism(std_trefoil, std_solutions):
    again = find_inscribed_prisms(std_trefoil, 0.0, 12)
    assert [s.to_dict() for s in again] == [s.to_dict() for s in std_solutions]


@pytest.mark.parametrize("grid", [6, 8, 12])
def test_symmetric_sign_stable_across_grids(std_trefoil, std_solutions, grid):
    ref = [s for s in std_solutions if contains([s], SYMMETRIC_T)][0]
    sols = find_inscribed_prisms(std_trefoil, 0.0, grid)
    sym = [s for s in sols if contains([s], SYMMETRIC_T)]
    assert len(sym) == 1
    assert intersection_sign(sym[0]) == intersection_sign(ref)


def test_grid_refinement_keeps_solutions(std_trefoil, std_solutions, figure_eight_solutions):
    lifted = s3_model(preset("figure-eight-r3"))
    for curve, fine in ((std_trefoil, std_solutions), (lifted, figure_eight_solutions)):
        for s in find_inscribed_prisms(curve, 0.0, 6):
            assert contains(fine, s.t)


def test_nontransverse_sign_raises():
    sol = ConfigTuple(SYMMETRIC_T, np.zeros((6, 4)), 0.0, 0.0)
    with pytest.raises(NonTransverse):
        intersection_sign(sol)


# ---------------------------------------------------------------------------
# symmetries of the standard trefoil


def test_tau_params_match_points(std_trefoil):
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = np.sort(rng.random(6))
        x = std_trefoil.eval(t)
        assert np.allclose(std_trefoil.eval(tau1_params(t)), tau1(x), atol=1e-12)
        assert np.allclose(std_trefoil.eval(tau2_params(t)), tau2(x), atol=1e-12)


def test_symmetry_closure(std_trefoil, std_solutions):
    by_base = {0.0: std_solutions}
    for s in std_solutions:
        for image in (tau1_params(s.t), tau2_params(s.t)):
            base = round(float(image[0]), 12)
            if base not in by_base:
                by_base[base] = find_inscribed_prisms(std_trefoil, base, 12)
            assert contains(by_base[base], image)


def test_symmetric_solution_fixed_by_symmetries():
    assert np.allclose(tau1_params(SYMMETRIC_T), SYMMETRIC_T)
    assert np.allclose(tau2_params(SYMMETRIC_T), SYMMETRIC_T)


# ---------------------------------------------------------------------------
# thickness


def test_thickness_great_circle():
    assert abs(thickness(preset("great-circle-s3")).tau - 1.0) < 1e-9


def test_thickness_std_trefoil(std_trefoil):
    rep = thickness(std_trefoil)
    assert abs(rep.tau - dense_thickness(std_trefoil)) < 1e-4
    assert rep.kind in set(ThicknessKind)
    assert rep.to_dict()["tau"] == rep.tau


def test_thickness_below_sampled_circumradii(std_trefoil):
    tau = thickness(std_trefoil).tau
    rng = np.random.default_rng(1)
    t = rng.random((5000, 3))
    x = std_trefoil.eval(t)
    r = circumradius_many(x[:, 0], x[:, 1], x[:, 2])
    assert np.min(r) >= tau - 1e-9


@pytest.mark.parametrize("name", ["trefoil-r3", "figure-eight-r3"])
def test_thickness_positive(name):
    assert thickness(s3_model(preset(name)), grid=32).tau > 0


# ---------------------------------------------------------------------------
# separation


def test_separation_std_trefoil(std_trefoil, std_solutions):
    rep = check_separation(std_trefoil, std_solutions, n_random=500)
    assert rep.random_close > 0
    assert all(d >= 2 * rep.tau - 1e-6 for d in rep.min_distances)


def test_separation_figure_eight(figure_eight_solutions):
    check_separation(s3_model(preset("figure-eight-r3")), figure_eight_solutions, n_random=200)


def test_near_parameters_adjacent(std_trefoil):
    t = np.array([0.1, 0.101, 0.3, 0.5, 0.7, 0.9])
    i, j, _ = minimal_pair(std_trefoil.eval(t))
    assert (i, j) == (0, 1)
    assert cyclically_adjacent(i, j, 6)
    assert cyclically_adjacent(0, 5, 6)
    assert not cyclically_adjacent(0, 2, 6)


def test_random_close_pairs_adjacent_brute_force(std_trefoil):
    tau = thickness(std_trefoil).tau
    rng = np.random.default_rng(5)
    seen = 0
    for _ in range(2000):
        t = np.sort(rng.random(6))
        x = std_trefoil.eval(t)
        d = np.linalg.norm(x[:, None] - x[None], axis=-1) + np.eye(6) * 9
        i, j = np.unravel_index(np.argmin(d), d.shape)
        if d[i, j] < 2 * tau:
            seen += 1
            assert (j - i) % 6 in (1, 5)
    assert seen > 10


def test_separation_violation_raises(std_trefoil):
    t = np.array([0.0, 0.001, 0.2, 0.4, 0.6, 0.8])
    fake = ConfigTuple(t, std_trefoil.eval(t), 0.0, 0.0)
    with pytest.raises(SeparationViolation):
        check_separation(std_trefoil, [fake], n_random=0)


# ---------------------------------------------------------------------------
# invariant


def test_kappa_great_circle():
    rep = kappa(preset("great-circle-s3"))
    assert rep.kappa == 0 and rep.count == 0
    assert rep.a2 == 0


def test_kappa_figure_eight():
    rep = kappa(preset("figure-eight-r3"))
    assert rep.transverse
    assert abs(rep.kappa) == 1
    assert rep.a2 == -1
    assert rep.matches_a2
    assert rep.parity == rep.count % 2 == 1


def test_kappa_from_solutions(std_solutions, trefoil_solutions):
    for sols in (std_solutions, trefoil_solutions):
        k = sum(intersection_sign(s) for s in sols)
        assert k % 2 == len(sols) % 2
        assert abs(k) == 1


class _Normalized(_CurveOps):
    """Radial projection of a curve in R^4 onto S^3, with Taylor series."""

    ambient = Ambient.S3
    dim = 4

    def __init__(self, base):
        self.base = base

    def taylor(self, t, order):
        x = self.base.taylor(t, order)
        n2 = sum(_series_mul(x[..., c], x[..., c]) for c in range(4))
        # series square root, then x / sqrt
        s = np.empty_like(n2)
        s[0] = np.sqrt(n2[0])
        for k in range(1, order + 1):
            s[k] = (n2[k] - sum(s[j] * s[k - j] for j in range(1, k))) / (2 * s[0])
        inv = np.empty_like(s)
        inv[0] = 1 / s[0]
        for k in range(1, order + 1):
            inv[k] = -sum(s[j] * inv[k - j] for j in range(1, k + 1)) / s[0]
        return np.stack([_series_mul(x[..., c], inv) for c in range(4)], axis=-1)


def perturbed_trefoil(seed, size=0.01):
    base = preset("paper-trefoil-s3")
    rng = np.random.default_rng(seed)
    delta = rng.normal(size=base.coefficients.shape)
    delta[:, 0, 1] = 0.0
    delta *= 0.999 * size / np.linalg.norm(delta)
    return _Normalized(KnotCurve(Ambient.S3, base.coefficients + delta))


def test_normalized_curve_on_sphere():
    c = perturbed_trefoil(0)
    t = np.linspace(0, 1, 50)
    assert np.allclose(np.linalg.norm(c.eval(t), axis=1), 1.0)
    h = 1e-5
    fd = (c.eval(t + h) - c.eval(t - h)) / (2 * h)
    assert np.allclose(c.deriv(t, 1), fd, atol=1e-5)


def test_perturbation_robustness(std_solutions):
    ref = abs(sum(s.sign for s in std_solutions))
    ref_a2 = kappa(preset("paper-trefoil-s3"), grid_per_axis=6).a2
    for seed in (1, 2):
        c = perturbed_trefoil(seed)
        assert thickness(c, grid=32).tau > 0.4
        rep = kappa(c)
        assert rep.a2 == ref_a2
        assert abs(rep.kappa) == ref


# ---------------------------------------------------------------------------
# certification


def test_certify_symmetric_solution(std_trefoil, std_solutions):
    sym = [s for s in std_solutions if contains([s], SYMMETRIC_T)][0]
    cert = certify_trefoil(std_trefoil, sym)
    assert isinstance(cert, CertifiedTrefoil)
    assert cert.hexclass.is_trefoil
    assert cert.hexclass.margin > 1e-6
    assert cert.classifier_calls <= 10_000
    r3 = r3_model(std_trefoil)
    assert np.allclose(r3.eval(cert.t), cert.points)
    assert classify_hexagon(cert.points).kind == cert.hexclass.kind
    assert np.all(np.diff(cert.t) > 0) and cert.t[-1] < cert.t[0] + 1


def test_certify_figure_eight(figure_eight_solutions):
    curve = s3_model(preset("figure-eight-r3"))
    certs = [certify_trefoil(curve, figure_eight_solutions[0])]
    assert isinstance(certs[0], CertifiedTrefoil)
    assert certs[0].to_dict()["status"] == "Certified"


def test_unresolved_is_falsy():
    u = Unresolved(Branch.SPATIAL, 3, "budget")
    assert not u
    assert u.to_dict()["status"] == "Unresolved"


def test_certify_zero_budget_unresolved(std_trefoil, std_solutions):
    got = certify_trefoil(std_trefoil, std_solutions[0], budget=0)
    assert isinstance(got, Unresolved)
    assert got.classifier_calls == 0


# ---------------------------------------------------------------------------
# quadrisecants


@pytest.fixture(scope="module")
def trefoil_quads():
    return find_quadrisecants(preset("trefoil-r3"))


def test_quadrisecants_trefoil(trefoil_quads):
    assert any(q.alternating for q in trefoil_quads)
    c = preset("trefoil-r3")
    for q in trefoil_quads:
        assert line_fit(c.eval(np.array(q.s)))[2] < LINE_TOL
        assert list(q.s) == sorted(q.s)
        assert sorted(q.order) == [0, 1, 2, 3]
        assert abs(np.linalg.norm(q.direction) - 1) < 1e-12


def test_alternating_flag_matches_order(trefoil_quads):
    # alternating iff the first two points along the line are opposite in cyclic order
    for q in trefoil_quads:
        assert q.alternating == ({q.order[0], q.order[1]} in ({0, 2}, {1, 3}))


def test_quadrisecants_planar_empty():
    assert find_quadrisecants(circle_r3()) == []
    assert find_quadrisecants(ellipse_r3()) == []


def test_quadrisecants_need_r3():
    with pytest.raises(CurveError):
        find_quadrisecants(preset("great-circle-s3"))


def test_conjecture1_table(trefoil_solutions, trefoil_quads):
    lifted = s3_model(preset("trefoil-r3"))
    cert = certify_trefoil(lifted, trefoil_solutions[0])
    assert cert
    rows = conjecture1_experiment(lifted, [cert], trefoil_quads)
    assert len(rows) == sum(q.alternating for q in trefoil_quads) >= 1
    assert all(r["proximity"] >= 0 for r in rows)
    # relabelling the trefoil cyclically leaves the table unchanged
    rolled = CertifiedTrefoil(np.roll(cert.t, 2), cert.points, cert.hexclass, cert.branch, 0)
    again = conjecture1_experiment(lifted, [rolled], trefoil_quads)
    assert [r["proximity"] for r in again] == pytest.approx([r["proximity"] for r in rows])


def test_conjecture1_empty():
    assert conjecture1_experiment(circle_r3(), [], []) == []
