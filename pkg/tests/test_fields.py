import numpy as np
import pytest

from pshlab import fields
from pshlab.errors import ContinuityRequiredError, PoleInStencilError
from pshlab.fields import (
    HermitianField,
    ScalarField,
    check_lower_bound,
    get_field,
    get_omega,
    levi_form,
    min_levi_eigenvalue,
    scaled_sq_omega,
    wirtinger_grad,
    zero_omega,
)
from pshlab.geometry import unit_ball

# corpus entries, a safe evaluation point for each, and whether the entry has
# nonvanishing fourth derivatives (so FD error is genuinely O(h^2))
CORPUS = [
    (fields.sq_norm(2), np.array([0.3 + 0.2j, -0.1 + 0.4j]), False),
    (fields.neg_sq_norm(2), np.array([0.5 + 0.1j, 0.2 - 0.3j]), False),
    (fields.saddle(2.0), np.array([0.4 - 0.2j, 0.3 + 0.1j]), False),
    (fields.log_abs(n=1), np.array([0.8 + 0.3j]), True),
    (fields.re_linear(n=2), np.array([0.1 + 0.7j, -0.4 + 0.2j]), False),
    (fields.log1p_sq(1), np.array([0.5 + 0.25j]), True),
    (fields.max_log(), np.array([0.9 + 0.1j, 0.3 - 0.2j]), False),
    (fields.cross(), np.array([0.2 + 0.3j, -0.5 + 0.1j]), False),
    (fields.neg_gauss(2), np.array([0.4 + 0.1j, 0.2 + 0.5j]), True),
]


def hessian_rel_error(phi, z, h):
    fd = levi_form(phi, z, h=h, use_analytic=False)
    exact = levi_form(phi, z, use_analytic=True)
    scale = max(np.max(np.abs(exact)), 1.0)
    return np.max(np.abs(fd - exact)) / scale


class TestWirtingerGrad:
    def test_sq_norm_gives_conjugate(self):
        z = np.array([0.3 + 0.4j, -0.2 + 0.1j])
        g = wirtinger_grad(fields.sq_norm(2), z, use_analytic=False)
        assert np.allclose(g, np.conj(z), atol=1e-9)

    def test_linear_field(self):
        g = wirtinger_grad(fields.re_linear(n=2), np.array([0.2j, 0.1]), use_analytic=False)
        assert np.allclose(g, [0.5, 0.0], atol=1e-10)

    def test_log_abs_at_one(self):
        # oracle: log|z| = (log z + log zbar)/2, so d/dz = 1/(2z) -> 0.5 at z=1
        g = wirtinger_grad(fields.log_abs(n=1), np.array([1.0 + 0.0j]), use_analytic=False)
        assert g[0] == pytest.approx(0.5, abs=1e-5)

    def test_pole_in_stencil(self):
        with pytest.raises(PoleInStencilError, match="pole in stencil"):
            wirtinger_grad(fields.log_abs(n=1), np.array([0.0 + 0.0j]), use_analytic=False)

    def test_usc_rejected(self):
        usc = ScalarField("usc", 1, lambda z: np.zeros(z.shape[0]), smoothness="usc")
        with pytest.raises(ContinuityRequiredError):
            wirtinger_grad(usc, np.array([0.0j]))


class TestLeviForm:
    def test_sq_norm_identity(self):
        m = levi_form(fields.sq_norm(2), np.array([0.1 + 0.2j, 0.3j]), use_analytic=False)
        assert np.allclose(m, np.eye(2), atol=1e-8)

    def test_saddle_diag(self):
        m = levi_form(fields.saddle(2.0), np.array([0.2j, 0.1]), use_analytic=False)
        assert np.allclose(m, np.diag([1.0, -2.0]), atol=1e-8)

    def test_log1p_sq_at_zero(self):
        # closed form d2/dz dzbar log(1+|z|^2) = 1/(1+|z|^2)^2 -> 1 at 0
        m = levi_form(fields.log1p_sq(1), np.array([0.0j]), use_analytic=False)
        assert m[0, 0] == pytest.approx(1.0, abs=1e-5)

    @pytest.mark.parametrize("phi,z,_smooth", CORPUS, ids=lambda c: getattr(c, "name", ""))
    def test_corpus_fd_matches_closed_form(self, phi, z, _smooth):
        assert hessian_rel_error(phi, z, h=1e-3) <= 1e-4

    def test_fd_is_second_order(self):
        for phi, z, smooth in CORPUS:
            if not smooth:
                continue
            ratio = hessian_rel_error(phi, z, 1e-2) / hessian_rel_error(phi, z, 5e-3)
            assert 3.5 <= ratio <= 4.5, phi.name

    def test_exactly_hermitian(self):
        m = levi_form(fields.neg_gauss(2), np.array([0.4 + 0.1j, -0.2j]), use_analytic=False)
        assert np.array_equal(m, m.conj().T)


class TestMinLeviEigenvalue:
    def test_diagonal(self):
        lam, xi = min_levi_eigenvalue(fields.saddle(2.0), zero_omega(2), np.array([0.1, 0.2j]))
        assert lam == pytest.approx(-2.0, abs=1e-10)
        assert abs(xi[1]) == pytest.approx(1.0, abs=1e-10)

    def test_identity(self):
        lam, _ = min_levi_eigenvalue(fields.sq_norm(2), zero_omega(2), np.array([0.0j, 0.0j]))
        assert lam == pytest.approx(1.0, abs=1e-12)

    def test_cross_eigenpair(self):
        z = np.array([0.1 + 0.2j, 0.3j])
        lam, xi = min_levi_eigenvalue(fields.cross(), zero_omega(2), z)
        assert lam == pytest.approx(-0.5, abs=1e-12)
        m = levi_form(fields.cross(), z)
        res = np.linalg.norm(m @ xi - lam * xi)
        assert res <= 1e-8
        assert abs(np.linalg.norm(xi) - 1.0) <= 1e-12


class TestCheckLowerBound:
    def test_sq_norm_holds(self):
        v = check_lower_bound(fields.sq_norm(2), zero_omega(2), unit_ball(2), resolution=5)
        assert v.holds

    def test_neg_sq_norm_violated(self):
        v = check_lower_bound(fields.neg_sq_norm(1), zero_omega(1), unit_ball(1), resolution=9)
        assert not v.holds
        assert v.c == pytest.approx(1.0, abs=1e-4)

    def test_quartic_versus_scaled_form(self):
        # d2 |z|^4 / dz dzbar = 4|z|^2 >= 2|z|^2, so the bound holds
        quartic = ScalarField(
            "quartic", 1,
            lambda z: np.sum(np.abs(z) ** 2, axis=-1) ** 2,
            hess=lambda z: (4.0 * np.sum(np.abs(z) ** 2, axis=-1))[:, None, None].astype(complex),
        )
        v = check_lower_bound(quartic, scaled_sq_omega(2.0, 1), unit_ball(1), resolution=9)
        assert v.holds

    def test_pole_in_region(self):
        with pytest.raises(PoleInStencilError):
            check_lower_bound(fields.log_abs(n=1), zero_omega(1), unit_ball(1), resolution=9)


class TestRegistry:
    def test_round_trip_ids(self):
        for spec, n in [
            ("sq_norm", 1), ("neg_sq_norm", 2), ("saddle:2", 2),
            ("log_abs:[[1.0,0.0]]", 1), ("re_linear:[[2.0,0.0]]", 1),
            ("log1p_sq", 2), ("max_log", 2), ("cross", 2), ("neg_gauss", 1),
        ]:
            phi = get_field(spec, n)
            assert phi.n == n

    def test_unknown_id(self):
        with pytest.raises(ValueError, match="unknown field id"):
            get_field("nope", 1)

    def test_dimension_mismatches_rejected(self):
        for spec in ("saddle:2", "max_log", "cross"):
            with pytest.raises(ValueError, match="dim 2"):
                get_field(spec, 1)
        with pytest.raises(ValueError, match="dimension"):
            get_field("log_abs:[[1.0,0.0]]", 2)
        with pytest.raises(ValueError, match="dimension"):
            get_field("re_linear:[[1.0,0.0]]", 2)

    def test_omegas(self):
        assert np.allclose(get_omega("zero", 2)(np.zeros((1, 2))), 0.0)
        g = get_omega("const:3", 2)(np.zeros((1, 2)))
        assert np.allclose(g[0], 3.0 * np.eye(2))
        g = get_omega("sq:2", 1)(np.array([[1.0 + 1.0j]]))
        assert g[0, 0, 0] == pytest.approx(4.0)

    def test_field_addition(self):
        both = fields.sq_norm(1) + fields.re_linear(n=1)
        z = np.array([[0.5 + 0.5j]])
        assert both.evaluate(z)[0] == pytest.approx(0.5 + 0.5)
        assert both.hess(z)[0, 0, 0] == pytest.approx(1.0)

    def test_hermitian_field_validates(self):
        bad = HermitianField(
            "bad", 2, lambda z: np.broadcast_to(np.array([[0.0, 1.0], [0.0, 0.0]]), (z.shape[0], 2, 2))
        )
        with pytest.raises(ValueError, match="not Hermitian"):
            bad(np.zeros((1, 2)))
