import pytest

from kinmoments.collision import CollisionQuadrature
from kinmoments.density import PolyGaussianDensity
from kinmoments.kernel import CollisionKernel, catalog_cross_section

SMALL_QUAD = CollisionQuadrature(v_order=4, r_order=8, ang_order=5, sigma_order=8, sigma_azimuth=12,
                                 sphere_order=6)


@pytest.fixture(scope="session")
def small_quad():
    return SMALL_QUAD


@pytest.fixture(scope="session")
def hard_sphere():
    return CollisionKernel(1.0, catalog_cross_section("hard_sphere"))


@pytest.fixture(scope="session")
def singular_kernel():
    return CollisionKernel(0.5, catalog_cross_section("singular", mu=0.5))


def bimodal(n=3):
    return (PolyGaussianDensity.maxwellian(n, 0.5, 0.5, [1.0] + [0.0] * (n - 1))
            + PolyGaussianDensity.maxwellian(n, 0.8, 0.5, [-1.0] + [0.0] * (n - 1)))


def test_densities(n=3):
    """Five members of the manufactured family: isotropic, shifted, two-bump,
    anisotropic polynomial weight, and a mixture with different widths."""
    z = [0.0] * n
    aniso = PolyGaussianDensity.single(n, {(0,) * n: 1.0, (2,) + (0,) * (n - 1): 0.5,
                                           (0, 1) + (0,) * (n - 2): 0.2}, temperature=0.7,
                                       coef=0.3)
    return {
        "maxwellian": PolyGaussianDensity.maxwellian(n),
        "shifted": PolyGaussianDensity.maxwellian(n, 0.6, 1.0, [0.5, -0.3] + z[2:]),
        "bimodal": bimodal(n),
        "anisotropic": aniso,
        "mixture": PolyGaussianDensity.maxwellian(n, 0.4, 0.7) + PolyGaussianDensity.maxwellian(n, 1.5, 0.3),
    }


test_densities.__test__ = False
