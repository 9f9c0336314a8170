import cmath
import math

import mpmath
import numpy as np
import pytest

from qfc.quadrature import gauss_kronrod
from qfc.specfun import (IMAG_WINDOW, PrecisionLossError, parabolic_cylinder_D,
                         pcfd_asymptotic, ray_angle, scaled_pcfd)


def reference(nu, z):
    with mpmath.workdps(30):
        return complex(mpmath.pcfd(nu, z))


class TestQuadrature:
    def test_polynomial_exact(self):
        res = gauss_kronrod(lambda x: x ** 5 - 3 * x ** 2, 0.0, 2.0)
        assert res.converged
        assert abs(res.value - (64 / 6 - 8)) < 1e-13

    def test_oscillatory(self):
        res = gauss_kronrod(lambda x: np.exp(1j * 50 * x), 0.0, 1.0, panels=20, rtol=1e-12)
        exact = (cmath.exp(50j) - 1) / 50j
        assert abs(res.value - exact) < 1e-13

    def test_endpoint_singularity(self):
        res = gauss_kronrod(lambda x: np.sqrt(x) * np.log(x), 0.0, 1.0, rtol=1e-10)
        assert res.converged
        assert abs(res.value + 4 / 9) < 1e-9

    def test_budget_flag(self):
        res = gauss_kronrod(lambda x: 1 / np.sqrt(x), 0.0, 1.0, rtol=1e-15, max_depth=3)
        assert not res.converged

    def test_empty_interval(self):
        assert gauss_kronrod(np.sin, 1.0, 1.0).value == 0


class TestPCFD:
    def test_origin_closed_form(self):
        exact = 2 ** -0.75 * math.sqrt(math.pi) / math.gamma(1.25)
        assert abs(parabolic_cylinder_D(-1.5, 0) - exact) < 1e-13
        assert abs(exact - 1.1627366) < 1e-7

    @pytest.mark.parametrize("nu", [-0.5, -1.5, -2.5])
    @pytest.mark.parametrize("z", [0.3, -2 + 1j, 5 - 3j, -4 + 9j, 1j * 25, -10 - 15j, 12.0])
    def test_against_mpmath(self, nu, z):
        ref = reference(nu, z)
        assert abs(parabolic_cylinder_D(nu, z) - ref) <= 1e-10 * abs(ref)

    def test_large_real_argument_leading_asymptotics(self):
        z = 10.0
        lead = math.exp(-25) * 10 ** -1.5
        value = parabolic_cylinder_D(-1.5, z)
        # first correction is -nu(1 - nu)/(2 z^2) ~ -1.9%
        assert abs(value / lead - 1) < 0.02
        assert abs(value / lead - (1 - 1.5 * 2.5 / 200)) < 1e-3

    def test_schwarz_reflection(self):
        z = 1 + 2j
        a = parabolic_cylinder_D(-1.5, z)
        b = parabolic_cylinder_D(-1.5, z.conjugate())
        assert abs(a - b.conjugate()) <= 1e-14 * abs(a)

    def test_recurrence(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            z = complex(rng.uniform(-8, 8), rng.uniform(-20, 20))
            d_up = parabolic_cylinder_D(-0.5, z)
            d_mid = parabolic_cylinder_D(-1.5, z)
            d_dn = parabolic_cylinder_D(-2.5, z)
            resid = d_up - z * d_mid - 1.5 * d_dn
            scale = max(abs(d_up), abs(z * d_mid), abs(1.5 * d_dn))
            assert abs(resid) <= 1e-8 * scale

    def test_depth_stability(self):
        for z in (3 - 4j, -6 + 20j, 0.5j):
            a = scaled_pcfd(-1.5, z, max_depth=15).log_scaled
            b = scaled_pcfd(-1.5, z, max_depth=30).log_scaled
            assert abs(cmath.exp(a - b) - 1) <= 1e-10

    def test_log_form_survives_overflow(self):
        res = scaled_pcfd(-1.5, 300j)
        # exp(z^2/4) D(z) stays moderate even though D(300i) ~ exp(22500)
        assert math.isfinite(res.mantissa.real) and res.converged
        with mpmath.workdps(30):
            ref = complex(mpmath.log(mpmath.pcfd(-1.5, 300j)) + mpmath.mpf(300) ** 2 / -4)
        assert abs(res.log_scaled - ref) < 1e-9

    def test_asymptotic_branch(self):
        z = 40 + 5j
        quad = scaled_pcfd(-1.5, z, method="quadrature")
        asym = scaled_pcfd(-1.5, z, method="asymptotic")
        assert abs(cmath.exp(asym.log_scaled - quad.log_scaled) - 1) < 1e-7
        assert asym.error < 1e-7
        assert abs(pcfd_asymptotic(-1.5, z) / quad.value - 1) < 1e-7

    def test_auto_uses_asymptotic_outside_window(self):
        res = scaled_pcfd(-1.5, 5 + 1.5j * IMAG_WINDOW)
        assert res.method == "asymptotic"

    def test_precision_flag(self):
        with pytest.raises(PrecisionLossError):
            scaled_pcfd(-1.5, 700j, method="quadrature")
        with pytest.raises(PrecisionLossError):
            scaled_pcfd(-1.5, 2.0, method="asymptotic")

    @pytest.mark.parametrize("nu", [0.0, 0.5])
    def test_rejects_non_negative_order(self, nu):
        with pytest.raises(ValueError):
            parabolic_cylinder_D(nu, 1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            parabolic_cylinder_D(-1.5, complex(math.inf, 0))

    def test_ray_angle_bounds(self):
        for z in (1 + 0j, -1 + 0j, 5j, -5j, -3 + 1j, 2 - 7j):
            assert abs(ray_angle(z)) < math.pi / 4
