import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastcq.kernels import PowerKernel, SectorialTransform, eval_transform, parse_kernel, verify_sector


def test_power_kernel_values():
    assert eval_transform(PowerKernel(0.5), 4.0) == pytest.approx(0.5, rel=1e-15)
    assert eval_transform(PowerKernel(1.0), 2 + 0j) == pytest.approx(0.5, rel=1e-15)
    val = eval_transform(PowerKernel(0.5), 1j)
    assert val == pytest.approx((1 - 1j) / np.sqrt(2), rel=1e-15)


def test_power_kernel_declaration():
    k = PowerKernel(2 / 3)
    assert k.vertex_c == 0 and k.bound_M == 1 and k.exponent_nu == 2 / 3


def test_singularity_raises():
    with pytest.raises(FloatingPointError):
        with np.errstate(all="ignore"):
            eval_transform(PowerKernel(0.5), 0.0)


@pytest.mark.parametrize("beta", [0.5, 2 / 3])
def test_verify_sector_passes(beta):
    rep = verify_sector(PowerKernel(beta), samples=1000)
    assert rep.passed and rep.worst_ratio <= 1 + 1e-12


def test_verify_sector_detects_bad_bound():
    k = SectorialTransform(evaluate=lambda s: s**-0.5, bound_M=0.5, exponent_nu=0.5)
    assert not verify_sector(k, samples=1000).passed


def test_bad_declarations():
    with pytest.raises(ValueError):
        SectorialTransform(evaluate=lambda s: s, exponent_nu=0.0)
    with pytest.raises(ValueError):
        SectorialTransform(evaluate=lambda s: s, angle_phi=2.0)
    with pytest.raises(ValueError):
        PowerKernel(-1.0)


def test_parse_kernel():
    assert parse_kernel("pow:0.5") == PowerKernel(0.5)
    for bad in ("exp:1", "pow:", "pow"):
        with pytest.raises(ValueError):
            parse_kernel(bad)


def test_matches_principal_log_on_samples():
    rng = np.random.default_rng(1)
    s = 10 ** rng.uniform(-3, 6, 1000) * np.exp(1j * rng.uniform(-3.1, 3.1, 1000))
    for beta in (0.5, 2 / 3, 1.3):
        ref = np.exp(-beta * np.log(s))
        np.testing.assert_allclose(PowerKernel(beta)(s), ref, rtol=1e-15)


@given(st.floats(0.05, 3.0), st.floats(-3.1, 3.1), st.floats(-3, 6))
def test_conjugate_symmetry(beta, arg, logmod):
    s = 10**logmod * np.exp(1j * arg)
    k = PowerKernel(beta)
    a, b = k(np.conj(s)), np.conj(k(s))
    assert abs(a - b) <= 1e-14 * abs(b)


@given(st.floats(0.05, 3.0), st.floats(-3.1, 3.1))
def test_principal_branch_argument(beta, arg):
    val = PowerKernel(beta)(np.exp(1j * arg))
    assert np.angle(val * np.exp(1j * beta * arg)) == pytest.approx(0.0, abs=1e-12)
