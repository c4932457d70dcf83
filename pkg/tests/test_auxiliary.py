import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import solution
from narrowgap.auxiliary import (PROFILE_COLUMNS, AuxiliaryDomainError, AuxiliaryField,
                                 ResidualToleranceError, aux_interpolant, compare_gradients,
                                 corrector_residual, difference_field, gap_samples, local_energy,
                                 profile_rows, write_profile_csv)
from narrowgap.geometry import BOUNDARY, Region
from narrowgap.harmonic import FieldSolution
from narrowgap.scenes import ANISO, canonical_scene


def test_flat_gap_midpoint_example():
    s = canonical_scene("flat", 1e-2)
    val, grad = AuxiliaryField("ubar1", s).eval(0.1, 0.005)
    assert val == pytest.approx(0.5, abs=1e-14)
    assert grad[0] == pytest.approx(0.0, abs=1e-12)
    assert grad[1] == pytest.approx(100.0, rel=1e-12)


@pytest.mark.parametrize("name", ["strict", "flat", "m4"])
def test_boundary_values_on_gap_curves(name):
    s = canonical_scene(name, 1e-2)
    x = np.linspace(-s.profile.R1, s.profile.R1, 41)
    for kind, top, bottom in (("ubar1", 1.0, 0.0), ("ubar2", 0.0, 1.0), ("utilde1", 1.0, 0.0)):
        f = AuxiliaryField(kind, s)
        assert np.allclose(f.value(x, s.upper_curve(x)), top, atol=1e-12)
        assert np.allclose(f.value(x, s.lower_curve(x)), bottom, atol=1e-12)


def test_partition_of_unity():
    s = canonical_scene("strict", 1e-2)
    pts = gap_samples(s, np.linspace(-0.9, 0.9, 13), 5)
    a = AuxiliaryField("ubar1", s).value(*pts.T)
    b = AuxiliaryField("ubar2", s).value(*pts.T)
    assert np.allclose(a + b, 1.0, atol=1e-14)


def test_corrector_vanishes_for_identity():
    s = canonical_scene("strict", 1e-2)
    pts = gap_samples(s, np.linspace(-0.9, 0.9, 13), 5)
    v0, g0 = AuxiliaryField("ubar1", s).eval(*pts.T)
    v1, g1 = AuxiliaryField("utilde1", s).eval(*pts.T)
    assert np.array_equal(v0, v1) and np.array_equal(g0, g1)


def test_corrector_agrees_with_plain_profile_on_gap_curves():
    s = canonical_scene("strict", 1e-2, A=ANISO)
    x = np.linspace(-0.95, 0.95, 21)
    for curve in (s.upper_curve, s.lower_curve):
        a = AuxiliaryField("ubar1", s).value(x, curve(x))
        b = AuxiliaryField("utilde1", s).value(x, curve(x))
        assert np.allclose(a, b, atol=1e-12)


def test_normal_derivative_is_inverse_gap_width():
    s = canonical_scene("strict", 1e-3)
    xs = np.linspace(-0.9, 0.9, 7)
    pts = gap_samples(s, xs, 3)
    _, g = AuxiliaryField("ubar1", s).eval(*pts.T)
    assert np.allclose(g[:, 1], 1.0 / np.repeat(s.delta(xs), 3), rtol=1e-12)


def test_outside_block_requires_extension():
    s = canonical_scene("strict", 1e-2)
    with pytest.raises(AuxiliaryDomainError):
        AuxiliaryField("ubar1", s).eval(0.0, 1.0)
    val = AuxiliaryField("ubar1", s, extend=True).value(0.0, 1.0)
    assert 0.0 <= val <= 1.0


def test_kind_preconditions():
    with pytest.raises(ValueError):
        AuxiliaryField("uhat", canonical_scene("strict", 1e-2))
    with pytest.raises(ValueError):
        AuxiliaryField("ubar2", canonical_scene("flat", 1e-2, mode=BOUNDARY))
    with pytest.raises(ValueError):
        AuxiliaryField("nope", canonical_scene("flat", 1e-2))


def test_extension_meets_outer_boundary_at_zero():
    s = canonical_scene("strict", 1e-2)
    f = AuxiliaryField("ubar1", s, extend=True)
    t = np.linspace(0, 2 * np.pi, 50)
    pts = np.column_stack([s.center[0] + s.L * np.cos(t), s.center[1] + s.L * np.sin(t)])
    assert np.allclose(f.value(*pts.T), 0.0, atol=1e-12)


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_plain_profile_residual_vanishes_over_flat_block(eps):
    s = canonical_scene("flat", eps)
    pts = gap_samples(s, np.linspace(-0.45, 0.45, 9), 5)
    assert np.abs(corrector_residual(AuxiliaryField("ubar1", s), pts)).max() <= 1e-6 / eps


def _scaled_residual(kind, eps, A):
    s = canonical_scene("strict", eps, A=A)
    p = s.profile
    pts = gap_samples(s, np.linspace(p.R0 + 0.02, 0.95 * p.R1, 12), 5)
    d = np.maximum(np.abs(pts[:, 0]) - p.R0, 0.0)
    r = corrector_residual(AuxiliaryField(kind, s), pts)
    return float((np.abs(r) * (eps + d ** 2)).max())


def test_corrector_residual_bounded_off_contact_set():
    eps = (1e-2, 1e-3, 1e-4)
    corrected = [_scaled_residual("utilde1", e, ANISO) for e in eps]
    plain = [_scaled_residual("ubar1", e, ANISO) for e in eps]
    # the corrected profile stays O(1/(eps + d^2)); the plain one does not
    assert max(corrected) / min(corrected) < 1.5
    assert plain[-1] / plain[0] > 5
    assert all(c < p for c, p in zip(corrected, plain))


def test_plain_profile_residual_bounded_for_identity():
    vals = [_scaled_residual("ubar1", e, None) for e in (1e-2, 1e-3, 1e-4)]
    assert max(vals) / min(vals) < 1.5


def test_residual_step_too_small():
    s = canonical_scene("strict", 1e-2)
    with pytest.raises(ResidualToleranceError):
        corrector_residual(AuxiliaryField("ubar1", s), [[0.5, 0.01]], rel_step=1e-15)


@settings(max_examples=40)
@given(st.floats(-0.99, 0.99), st.floats(0.0, 1.0), st.sampled_from([1e-2, 1e-3, 1e-4]))
def test_gradient_two_sided_bound(x, t, eps):
    s = canonical_scene("strict", eps)
    p = s.profile
    y = s.lower_curve(x) + t * s.delta(x)
    _, g = AuxiliaryField("ubar1", s).eval(x, y)
    dl = float(s.delta(x))
    slope = abs(float(p.dh1(x))) + abs(float(p.dh2(x)))
    gn = float(np.hypot(*g))
    assert gn >= (1 - 1e-12) / dl
    assert abs(float(g[0])) <= slope / dl * (1 + 1e-12)
    assert gn <= (1 + slope) / dl * (1 + 1e-12)


def test_compare_gradients_of_own_interpolant_is_zero():
    s, _, sol = solution("strict", 1e-2)
    aux = AuxiliaryField("ubar1", s, extend=True)
    v = aux_interpolant(aux, sol.components["v1"])
    assert compare_gradients(v, aux, Region("gap")).max_diff <= 1e-9


def test_fem_potential_close_to_profile_in_gap():
    s, _, sol = solution("strict", 1e-2)
    v1 = sol.components["v1"]
    aux = AuxiliaryField("ubar1", s)
    cmp = compare_gradients(v1, aux, Region("gap"))
    # the difference is O(1) while |grad v1| reaches 1/eps
    assert cmp.max_diff < 0.1 / s.epsilon
    assert np.nanmax(cmp.profile) == pytest.approx(cmp.max_diff)


def test_local_energy_of_zero_field():
    s, mesh, sol = solution("strict", 1e-2)
    z = FieldSolution(mesh, np.zeros(mesh.n_vertices), system=sol.u.system)
    e, dn = local_energy(z, s, 0.3)
    assert e == 0.0 and dn == pytest.approx(float(s.delta(0.3)) ** 2)


def test_profile_rows_and_csv(tmp_path):
    s, _, sol = solution("strict", 1e-2)
    aux = AuxiliaryField("ubar1", s)
    rows = profile_rows(sol.components["v1"], aux, [0.0, 0.25, 0.5])
    assert [r["x_prime"] for r in rows] == [0.0, 0.25, 0.5]
    assert all(r["grad_ubar_max"] >= 1 / r["delta"] * (1 - 1e-12) for r in rows)
    path = tmp_path / "profile.csv"
    write_profile_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(PROFILE_COLUMNS) and len(lines) == 4
    w = difference_field(sol.components["v1"], aux)
    assert w.values.shape == sol.components["v1"].values.shape
