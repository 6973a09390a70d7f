import numpy as np
import pytest
from scipy.integrate import quad

from rdextrap.errors import InvalidKernelError
from rdextrap.kernels import (
    FAMILIES,
    KernelMoments,
    KernelSpec,
    _interior_coefficients,
    equivalent_kernel_boundary,
    equivalent_kernel_interior,
    eval_kernel,
    moments,
    roughness,
)

SPECS = [KernelSpec(f) for f in FAMILIES]


def test_eval_examples():
    tri = KernelSpec("triangular")
    assert eval_kernel(tri, 0.0) == 1.0
    assert eval_kernel(tri, 1.5) == 0.0
    assert eval_kernel(KernelSpec("epanechnikov"), 0.0) == 0.75
    assert eval_kernel(KernelSpec("uniform"), 0.3) == 0.5


def test_unknown_family_rejected():
    with pytest.raises(InvalidKernelError):
        KernelSpec("gaussian")


@pytest.mark.parametrize("spec", SPECS, ids=FAMILIES)
def test_kernel_is_a_density(spec):
    total, _ = quad(lambda w: eval_kernel(spec, w), -1, 1)
    assert abs(total - 1.0) < 1e-10
    grid = np.linspace(-1, 1, 401)
    assert np.all(eval_kernel(spec, grid) >= 0.0)
    assert np.allclose(eval_kernel(spec, grid), eval_kernel(spec, -grid))
    assert eval_kernel(spec, 1.01) == 0.0 and eval_kernel(spec, -1.01) == 0.0


@pytest.mark.parametrize("spec", SPECS, ids=FAMILIES)
def test_moment_table_matches_quadrature(spec):
    mom = moments(spec)
    for r in range(7):
        two_sided, _ = quad(lambda w: w**r * eval_kernel(spec, w), -1, 1)
        one_sided, _ = quad(lambda w: w**r * eval_kernel(spec, w), 0, 1)
        assert abs(mom.pi[r] - two_sided) < 1e-10
        assert abs(mom.nu[r] - one_sided) < 1e-10
        if r % 2 == 1:
            assert abs(mom.pi[r]) < 1e-12
    rough, _ = quad(lambda w: eval_kernel(spec, w) ** 2, -1, 1)
    assert abs(roughness(spec) - rough) < 1e-10


def test_triangular_moment_values():
    mom = moments(KernelSpec("triangular"))
    assert mom.pi[0] == pytest.approx(1.0, abs=1e-15)
    assert mom.pi[2] == pytest.approx(1.0 / 6.0, abs=1e-15)
    assert mom.pi[4] == pytest.approx(1.0 / 15.0, abs=1e-15)
    assert mom.pi[4] - mom.pi[2] ** 2 > 0


def test_interior_equivalent_kernel_peak():
    tri = KernelSpec("triangular")
    assert equivalent_kernel_interior(tri, 0.0) == pytest.approx(12.0 / 7.0, abs=1e-12)
    assert equivalent_kernel_interior(tri, 1.5) == 0.0
    assert equivalent_kernel_interior(tri, -2.0) == 0.0


@pytest.mark.parametrize("spec", SPECS, ids=FAMILIES)
def test_interior_equivalent_kernel_moment_conditions(spec):
    mass, _ = quad(lambda w: equivalent_kernel_interior(spec, w), -1, 1)
    second, _ = quad(lambda w: w * w * equivalent_kernel_interior(spec, w), -1, 1)
    assert abs(mass - 1.0) < 1e-10
    assert abs(second) < 1e-10


@pytest.mark.parametrize("spec", SPECS, ids=FAMILIES)
def test_boundary_equivalent_kernel_moment_conditions(spec):
    for r, target in ((0, 1.0), (1, 0.0), (2, 0.0)):
        val, _ = quad(lambda w: w**r * equivalent_kernel_boundary(spec, w), 0, 1)
        assert abs(val - target) < 1e-10


def test_boundary_kernel_one_sided_support():
    spec = KernelSpec("triangular")
    assert equivalent_kernel_boundary(spec, -0.5) == 0.0
    assert equivalent_kernel_boundary(spec, 1.2) == 0.0


def test_degenerate_moments_rejected():
    # pi_4 == pi_2^2 makes the interior construction singular.
    fake = KernelMoments(pi=(1.0, 0.0, 0.25, 0.0, 0.0625, 0.0, 0.03), nu=(0.5,) * 7,
                         roughness=0.5)
    with pytest.raises(InvalidKernelError):
        _interior_coefficients(fake)
