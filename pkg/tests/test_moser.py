import numpy as np
import pytest

import pjac.moser as moser
from pjac.errors import (
    CorrectorDiverged,
    DegenerateDomain,
    NonPositiveDensity,
    NonZeroMean,
    PreconditionViolated,
)
from pjac.moser import (
    QuadDomain,
    bogovskii_field,
    constant_jacobian_corrector,
    divergence_residual,
    moser_flow,
    panel_nodes,
    unit_square_domain,
    wedge_domain,
)


def bump_density(p):
    r2 = (p[..., 0] - 0.5) ** 2 + (p[..., 1] - 0.5) ** 2
    return 1.0 + 0.5 * np.cos(np.pi * np.sqrt(r2)) * np.exp(-4 * r2)


# -- domains ------------------------------------------------------------------


def test_quad_domain_chart_roundtrip(rng):
    for dom in (unit_square_domain(), wedge_domain()):
        sq = rng.random((200, 2))
        xy = dom.to_xy(sq[:, 0], sq[:, 1])
        s, q = dom.from_xy(xy)
        assert np.allclose(np.stack([s, q], axis=-1), sq, atol=1e-12)
        assert dom.contains(xy).all()


def test_quad_domain_area():
    assert np.isclose(unit_square_domain().area(), 1.0)
    assert np.isclose(wedge_domain().area(), 2.5)
    _, _, w = panel_nodes(wedge_domain(), 16)
    assert np.isclose(float(np.sum(w)), 2.5, rtol=1e-12)


def test_quad_domain_rejects_bad_corners():
    with pytest.raises(DegenerateDomain):
        QuadDomain(corners=((0, 0), (0, 1), (1, 1), (1, 0)),  # clockwise
                   star_center=(0.5, 0.5), star_radius=0.1)
    with pytest.raises(DegenerateDomain):
        QuadDomain(corners=((0, 0), (1, 0), (1, 1), (0, 1)),
                   star_center=(2.0, 2.0), star_radius=0.1)


def test_bump_has_unit_mass():
    dom = wedge_domain()
    bump = moser._Bump(center=np.asarray(dom.star_center), radius=dom.star_radius)
    _, xy, w = panel_nodes(dom, 48)
    assert abs(float(np.sum(w * bump(xy))) - 1.0) < 1e-6


# -- the divergence solver -----------------------------------------------------


def test_bogovskii_zero_data_gives_zero_field():
    field = bogovskii_field(lambda p: np.zeros(p.shape[:-1]), unit_square_domain(),
                            n_panels=8, cache=8)
    pts = np.array([[0.3, 0.4], [0.7, 0.2], [0.5, 0.9]])
    assert np.array_equal(field.direct_eval(pts), np.zeros((3, 2)))


def test_bogovskii_square_divergence_residual():
    dom = unit_square_domain()
    h = lambda p: np.sin(2 * np.pi * p[..., 0]) * np.sin(np.pi * p[..., 1])  # noqa: E731
    coarse = bogovskii_field(h, dom, n_panels=16)
    fine = bogovskii_field(h, dom, n_panels=32)
    mx_c, _ = divergence_residual(coarse, h, n_samples=40)
    mx_f, mean_f = divergence_residual(fine, h, n_samples=40)
    assert mx_f < 1e-2
    assert mx_f < mx_c  # decreasing under refinement


def test_bogovskii_wedge_linear_data():
    dom = wedge_domain()
    _, xy, w = panel_nodes(dom, 24)
    xbar = float(np.sum(w * xy[:, 0]) / np.sum(w))
    h = lambda p: p[..., 0] - xbar  # noqa: E731
    field = bogovskii_field(h, dom, n_panels=40)
    mx, mean = divergence_residual(field, h, n_samples=40)
    assert mean < 1e-2
    assert mx < 5e-2


def test_bogovskii_vanishes_on_and_outside_boundary():
    dom = wedge_domain()
    _, xy, w = panel_nodes(dom, 16)
    xbar = float(np.sum(w * xy[:, 0]) / np.sum(w))
    field = bogovskii_field(lambda p: p[..., 0] - xbar, dom, n_panels=16)
    outside = np.array([[0.1, 0.1], [3.0, 3.0], [-1.0, 0.5]])
    assert np.array_equal(field.direct_eval(outside), np.zeros((3, 2)))
    boundary = dom.boundary_points(16)
    vals = field.direct_eval(boundary)
    assert float(np.max(np.hypot(vals[:, 0], vals[:, 1]))) < 1e-10


def test_bogovskii_rejects_nonzero_mean():
    with pytest.raises(NonZeroMean):
        bogovskii_field(lambda p: np.ones(p.shape[:-1]), unit_square_domain(),
                        n_panels=8)


# -- the flow -------------------------------------------------------------------


def test_moser_flow_identity_for_unit_density():
    corr = moser_flow(lambda p: np.ones(p.shape[:-1]), unit_square_domain(),
                      n_panels=8, cache=8, n_check=20)
    pts = np.random.default_rng(0).random((40, 2)) * 0.9 + 0.05
    assert np.array_equal(corr.sigma(pts), pts)  # bit-exact identity
    assert corr.residual_max < 1e-9


def test_moser_flow_square_bump():
    corr = moser_flow(bump_density, unit_square_domain(), n_panels=20, n_check=120)
    assert corr.residual_max < 0.05
    assert corr.mass_error < 1e-3
    finer = moser_flow(bump_density, unit_square_domain(), n_panels=32, cache=64,
                       n_check=120)
    assert finer.residual_max < 0.75 * corr.residual_max


def test_moser_flow_wedge_target():
    from pjac.constructions import wedge_map

    eps = 0.5
    _, jdet = wedge_map(eps)
    c = (6.0 - eps) / 5.0
    g = lambda p: c / np.asarray(jdet(p), dtype=float)  # noqa: E731
    corr = moser_flow(g, wedge_domain(), n_panels=20, n_check=120)
    assert corr.residual_max < 0.1
    assert corr.mass_error < 1e-3


def test_moser_flow_rejects_nonpositive_density():
    with pytest.raises(NonPositiveDensity):
        moser_flow(lambda p: p[..., 0] - 0.5, unit_square_domain(), n_panels=8)


def test_flow_escape_guard():
    from pjac.errors import FlowEscapedDomain

    class OutwardField:
        domain = unit_square_domain()

        def eval(self, pts):
            return np.full(np.asarray(pts).shape, 1.0)  # constant drift

    with pytest.raises(FlowEscapedDomain):
        moser._flow(OutwardField(), lambda p: np.ones(np.asarray(p).shape[:-1]),
                    np.array([[0.9, 0.9]]), steps=4)


# -- the constant-Jacobian iteration ----------------------------------------------


def test_corrector_rejects_nonpositive_target():
    from pjac.constructions import wedge_map

    _, jdet = wedge_map(0.5)
    with pytest.raises(PreconditionViolated):
        constant_jacobian_corrector(jdet, -1.0, wedge_domain())


def test_corrector_aborts_after_two_regressions(monkeypatch):
    calls = {"n": 0}

    class FakeCorrector:
        mass_error = 0.0
        boundary_displacement = 0.0

        def __init__(self, level):
            self.level = level

        def sigma(self, pts):
            return np.asarray(pts, dtype=float)

        def jacobian_det(self, pts):
            return np.full(np.asarray(pts).shape[:-1], 1.0 + self.level)

    def fake_flow(g, domain, **kw):
        calls["n"] += 1
        return FakeCorrector(level=float(calls["n"]))

    # composed residuals |(1 + n) - 2| = 0, 1, 2, ...: two straight increases
    monkeypatch.setattr(moser, "moser_flow", fake_flow)
    jdet = lambda p: np.ones(np.asarray(p).shape[:-1])  # noqa: E731
    with pytest.raises(CorrectorDiverged):
        constant_jacobian_corrector(jdet, 2.0, unit_square_domain(), iterations=5)
    assert calls["n"] >= 3
