import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wirecm.geometry import make_dipole, trim_dipole
from wirecm.kernel import QuadratureSpec, Wavenumber
from wirecm.modes import characteristic_modes
from wirecm.mom import assemble_Z, make_plane_wave

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=20,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

WAVELENGTH = 1.0
REF_LENGTH = 2.0
REF_RADIUS = 0.001
REF_SEGMENTS = 40


@pytest.fixture(scope="session")
def k():
    return Wavenumber.from_wavelength(WAVELENGTH)


@pytest.fixture(scope="session")
def quad():
    return QuadratureSpec()


@pytest.fixture(scope="session")
def ref_mesh():
    return make_dipole(REF_LENGTH, REF_RADIUS, REF_SEGMENTS)


@pytest.fixture(scope="session")
def ref_z(ref_mesh, k, quad):
    return assemble_Z(ref_mesh, k, quad)


@pytest.fixture(scope="session")
def ref_basis(ref_z):
    return characteristic_modes(ref_z)


@pytest.fixture(scope="session")
def child_mesh(ref_mesh):
    return trim_dipole(ref_mesh, 1.0)


@pytest.fixture(scope="session")
def child_z(child_mesh, k, quad):
    return assemble_Z(child_mesh, k, quad)


@pytest.fixture(scope="session")
def child_basis(child_z):
    return characteristic_modes(child_z)


@pytest.fixture(scope="session")
def oblique_wave(k):
    return make_plane_wave(
        np.array([1.0, 0.0, -1.0]), np.array([1.0, 0.0, 1.0]), 1.0, k
    )
