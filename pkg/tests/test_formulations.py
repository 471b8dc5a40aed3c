import numpy as np
import pytest

from csie import formulations as F
from csie.constants import Z0
from csie.krylov import CGFailure


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_context_and_config():
    ctx = F.PhysicalContext(149.896229e6)
    assert ctx.wavelength == pytest.approx(2.0)
    assert ctx.k0 == pytest.approx(np.pi)
    assert F.PhysicalContext.from_k0(3.2).k0 == pytest.approx(3.2)
    with pytest.raises(ValueError):
        F.PhysicalContext(0.0)
    for bad in (dict(kind="BEM"), dict(alpha=-1.0), dict(kind="CSIE-JM", alpha=0.0),
                dict(cfie_comb=1.5), dict(inner_tol=0.0)):
        with pytest.raises(ValueError):
            F.FormulationConfig(**bad)
    with pytest.raises(ValueError):
        F.FormulationConfig(inner_tol=1e-4).check_outer(1e-4)
    F.FormulationConfig(kind="EFIE", inner_tol=1e-2).check_outer(1e-4)


def test_linear_operator_contract():
    m = np.arange(9.0).reshape(3, 3)
    op = F.LinearOperator(3, lambda x: m @ x)
    assert op.shape == (3, 3)
    assert np.array_equal(op.to_dense(), m)
    with pytest.raises(ValueError):
        op.apply(np.ones(4))
    with pytest.raises(ZeroDivisionError):
        F.DiagonalPreconditioner([1.0, 0.0])
    d = F.DiagonalPreconditioner([2.0, 4.0])
    assert np.allclose(d.solve(np.array([2.0, 4.0])), 1.0)


def test_rhs_descriptor():
    e, h = np.ones(3), 2 * np.ones(3)
    assert np.array_equal(F.RhsDescriptor(pad=3).assemble(e), np.r_[e, np.zeros(3)])
    with pytest.raises(ValueError):
        F.RhsDescriptor(0.0, 1.0).assemble(e)
    assert np.allclose(F.RhsDescriptor(0.5, 0.25).assemble(e, h), np.ones(3))


def test_efie_is_alpha_independent(cube18):
    a = cube18.system("EFIE", alpha=1.0).op.to_dense()
    b = cube18.system("EFIE", alpha=7.0).op.to_dense()
    assert np.array_equal(a, b)
    assert np.array_equal(a, 1j * cube18.k0 * Z0 * cube18.mats["T"])


def test_mfie_has_half_gram_identity(cube18):
    m = cube18.system("MFIE").op.to_dense()
    assert np.allclose(m - cube18.mats["Kn"], 0.5 * cube18.Aprime.toarray(), rtol=0, atol=1e-15)


def test_cfie_limits(cube18):
    s = cube18
    i_e, _, _ = F.solve_system(s.system("EFIE"), s.e, s.h, tol=1e-10)
    i_m, _, _ = F.solve_system(s.system("MFIE"), s.e, s.h, tol=1e-10)
    i_1, _, _ = F.solve_system(s.system("CFIE", cfie_comb=1.0), s.e, s.h, tol=1e-10)
    i_0, _, _ = F.solve_system(s.system("CFIE", cfie_comb=0.0), s.e, s.h, tol=1e-10)
    assert _rel(i_1, i_e) < 1e-8
    assert _rel(i_0, i_m) < 1e-8
    with pytest.raises(ValueError):
        F.build_cfie(s.system("EFIE").op, s.system("MFIE").op, 1.2, s.ctx)


def test_csie_j_alpha_zero_is_efie(cube18, rng):
    op = cube18.system("CSIE-J", alpha=0.0).op
    efie = cube18.system("EFIE").op
    for _ in range(3):
        x = rng.normal(size=18) + 1j * rng.normal(size=18)
        assert np.array_equal(op.apply(x), efie.apply(x))
    assert op.inner_stats.solves == 0


def test_csie_j_matches_dense_oracle(cube18):
    s = cube18
    cfg = dict(alpha=2.0, inner_tol=1e-8)
    dense = s.system("CSIE-J", **cfg).op.to_dense()
    a, ap = s.A.toarray(), s.Aprime.toarray()
    oracle = 2.0 * Z0 * (-0.5 * a + s.mats["K"]) @ np.linalg.solve(ap, a) \
        + 1j * s.k0 * Z0 * s.mats["T"]
    assert np.abs(dense - oracle).max() <= 10 * 1e-8 * np.abs(oracle).max()


def test_csie_j_linearity(sphere480, rng):
    op = sphere480.system("CSIE-J").op
    x = rng.normal(size=480) + 1j * rng.normal(size=480)
    y = rng.normal(size=480) + 1j * rng.normal(size=480)
    lhs = op.apply(x + y) - op.apply(x) - op.apply(y)
    scale = np.linalg.norm(op.apply(x))
    assert np.linalg.norm(lhs) <= 10 * 1e-5 * scale


def test_csie_jm_block_structure(cube18):
    s = cube18
    m = s.system("CSIE-JM", alpha=3.0).op.to_dense()
    a = s.A.toarray()
    assert np.allclose(m[18:, :18], -3.0 * Z0 * a)
    assert np.allclose(m[18:, 18:], s.Aprime.toarray())
    assert np.allclose(m[:18, 18:], -0.5 * a + s.mats["K"])
    w = s.system("CSIE-JM", alpha=3.0, jm_weighting=True).op.to_dense()
    assert np.allclose(w[:18, 18:], Z0 * m[:18, 18:])
    assert np.allclose(w[18:, :18], -3.0 * a)


@pytest.mark.parametrize("alpha", [1.0, 10.0])
def test_csie_j_and_jm_agree(cube18, alpha):
    s, tol = cube18, 1e-4
    i_j, v_j, _ = F.solve_system(s.system("CSIE-J", alpha=alpha), s.e, tol=tol)
    i_m, v_m, _ = F.solve_system(s.system("CSIE-JM", alpha=alpha), s.e, tol=tol)
    assert _rel(i_j, i_m) <= 10 * tol
    assert _rel(v_j, v_m) <= 10 * tol
    # side condition at the CSIE-JM solution
    res = np.linalg.norm(s.Aprime @ v_m - alpha * Z0 * (s.A @ i_m))
    assert res / np.linalg.norm(s.Aprime @ v_m) <= tol


def test_jm_weighting_is_a_reparametrization(cube18):
    s = cube18
    i0, v0, _ = F.solve_system(s.system("CSIE-JM"), s.e, tol=1e-10)
    i1, v1, _ = F.solve_system(s.system("CSIE-JM", jm_weighting=True), s.e, tol=1e-10)
    assert _rel(i1, i0) < 1e-7 and _rel(v1, v0) < 1e-7


def test_recover_magnetic(cube18, rng):
    s = cube18
    cfg = F.FormulationConfig(alpha=2.0)
    assert np.all(F.recover_magnetic(np.zeros(18), s.A, s.Aprime, cfg, s.ctx) == 0)
    i = rng.normal(size=18) + 1j * rng.normal(size=18)
    v = F.recover_magnetic(i, s.A, s.Aprime, cfg, s.ctx)
    b = 2.0 * Z0 * (s.A @ i)
    assert np.linalg.norm(s.Aprime @ v - b) / np.linalg.norm(b) <= cfg.inner_tol / 10


def test_inner_failure_is_reported(cube18, rng):
    op = cube18.system("CSIE-J", inner_tol=1e-12, inner_max_iter=1).op
    with pytest.raises(CGFailure) as info:
        op.apply(rng.normal(size=18) + 0j)
    assert info.value.report.residual > 1e-12


def test_diagonal_preconditioners(cube18):
    s = cube18
    d = F.build_diag_precond(s.mats["T"], s.ctx)
    x = np.arange(1.0, 19.0)
    assert np.allclose(d.solve(d.d * x), x)
    sysm = s.system("CSIE-J", alpha=0.0)
    d0 = F.build_csie_diag_precond(s.mats["T"], s.A, s.Aprime, sysm.cfg, s.ctx)
    assert np.array_equal(d0.d, d.d)
    sysm = s.system("CSIE-J", alpha=2.0)
    d2 = F.build_csie_diag_precond(s.mats["T"], s.A, s.Aprime, sysm.cfg, s.ctx)
    # the correction is real: real skew A, real diagonal of A'
    corr = d2.d - d.d
    assert np.all(corr.imag == 0)
    a, ap = s.A.toarray(), s.Aprime.toarray()
    expected = -2.0 * Z0 * np.diag(a @ np.diag(1 / np.diag(ap)) @ a)
    assert np.allclose(corr.real, expected, rtol=1e-12)


def test_preconditioner_factory(cube18):
    s = cube18
    jm = s.system("CSIE-JM")
    p = F.make_preconditioner(jm, "jacobi")
    assert len(p.d) == 36
    assert F.make_preconditioner(jm, "none") is None
    with pytest.raises(ValueError):
        F.make_preconditioner(s.system("CSIE-J"), "jacobi")
    with pytest.raises(ValueError):
        F.make_preconditioner(jm, "diag")
    with pytest.raises(ValueError):
        F.make_preconditioner(jm, "ilu", T=s.mats["T"])


@pytest.mark.xfail(strict=True, reason="diag(T) is nearly constant on a uniform icosphere "
                   "(max/min 1.29); left scaling changes the minimized norm and costs "
                   "two extra iterations (35 vs 33)")
def test_diag_preconditioner_does_not_hurt(sphere480):
    s = sphere480
    sysm = s.system("CSIE-J")
    _, _, plain = F.solve_system(sysm, s.e, tol=1e-4)
    pre = F.make_preconditioner(sysm, "diag", T=s.mats["T"])
    _, _, diag = F.solve_system(sysm, s.e, tol=1e-4, precond=pre)
    assert plain.converged and diag.converged
    assert diag.iterations <= plain.iterations


def test_mfie_faster_than_efie_off_resonance(sphere480):
    s = sphere480
    _, _, re = F.solve_system(s.system("EFIE"), s.e, s.h, tol=1e-4)
    _, _, rm = F.solve_system(s.system("MFIE"), s.e, s.h, tol=1e-4)
    assert rm.iterations < re.iterations


def test_inner_statistics(sphere480):
    s = sphere480
    _, _, rep = F.solve_system(s.system("CSIE-J"), s.e, tol=1e-4)
    assert rep.inner_solves == rep.matvecs
    assert 0 < rep.inner_mean <= 30
