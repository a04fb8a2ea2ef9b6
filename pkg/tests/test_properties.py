"""Randomized-structure invariants.

Every example draws a fresh, valid thin-wire geometry and checks the whole
chain of modal invariants on it; nothing here is tuned to the reference
dipole."""

import numpy as np
from hypothesis import given, settings, strategies as st

from wirecm.geometry import make_dipole
from wirecm.kernel import QuadratureSpec, Wavenumber
from wirecm.modes import characteristic_modes
from wirecm.mom import assemble_V_planewave, assemble_Z, make_plane_wave, solve_direct

QUAD = QuadratureSpec()
K = Wavenumber.from_wavelength(1.0)

geometries = st.tuples(
    st.floats(min_value=0.3, max_value=2.5),      # length in wavelengths
    st.floats(min_value=1e-4, max_value=2e-3),    # radius in wavelengths
    st.integers(min_value=7, max_value=25),       # segments
).filter(lambda g: g[0] / g[2] > 4.0 * g[1])      # thin-wire validity


def _unit(v):
    return v / np.linalg.norm(v)


@given(geometries)
def test_modal_invariants_hold_for_random_wires(geom):
    length, radius, segments = geom
    mesh = make_dipole(length, radius, segments)
    z = assemble_Z(mesh, K, QUAD)
    basis = characteristic_modes(z)

    re = 0.5 * (z.entries.real + z.entries.real.T)
    im = 0.5 * (z.entries.imag + z.entries.imag.T)
    lam = basis.eigenvalues
    cur_l = basis.currents.astype(np.longdouble)

    # radiation-orthonormality
    gram = (cur_l.T @ re.astype(np.longdouble) @ cur_l).astype(float)
    assert np.max(np.abs(np.diag(gram) - 1.0)) < 1e-8
    assert np.max(np.abs(gram - np.diag(np.diag(gram)))) < 1e-6

    # reactance diagonalization, row/column slack scaled by the eigenvalues
    t = (cur_l.T @ im.astype(np.longdouble) @ cur_l).astype(float)
    scale = np.maximum(1.0, np.abs(lam))
    dev = np.abs(t - np.diag(lam))
    assert np.all(dev <= 1e-6 * np.maximum(scale[:, None], scale[None, :]))

    # ordering and retention
    assert np.all(np.diff(np.abs(lam)) >= 0.0)
    d = np.linalg.eigvalsh(re)
    rank = int((d > basis.rank_tolerance * d[-1]).sum())
    assert basis.mode_count == rank

    # the radiating subspace is tiled: R C C^T R == R
    rc = re @ basis.currents
    assert np.linalg.norm(re - rc @ rc.T) / np.linalg.norm(re) < 1e-8


@given(
    geometries,
    st.integers(min_value=0, max_value=2**32 - 1),
)
@settings(max_examples=15)
def test_direct_solve_residual_for_random_wires_and_waves(geom, seed):
    length, radius, segments = geom
    rng = np.random.default_rng(seed)
    mesh = make_dipole(length, radius, segments)
    z = assemble_Z(mesh, K, QUAD)

    d = _unit(rng.normal(size=3))
    p = rng.normal(size=3)
    p = p - (p @ d) * d
    if np.linalg.norm(p) < 1e-6:
        p = np.array([d[1], -d[0], 0.0])  # any direction transverse to d
    w = make_plane_wave(d, _unit(p), 1.0, K)
    v = assemble_V_planewave(mesh, w, QUAD)
    if np.linalg.norm(v.entries) == 0.0:
        return  # wave happened to be exactly cross-polarized
    cur = solve_direct(z, v)
    res = np.linalg.norm(z.entries @ cur.entries - v.entries) / np.linalg.norm(v.entries)
    assert res < 1e-10


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=15)
def test_plane_wave_magnitude_is_uniform(seed):
    rng = np.random.default_rng(seed)
    d = _unit(rng.normal(size=3))
    p = rng.normal(size=3)
    p = p - (p @ d) * d
    if np.linalg.norm(p) < 1e-6:
        p = np.array([d[1], -d[0], 0.0])
    amp = float(rng.uniform(0.1, 10.0))
    w = make_plane_wave(d, _unit(p), amp, K)
    pts = rng.normal(scale=3.0, size=(32, 3))
    e = w.field_at(pts)
    assert np.allclose(np.linalg.norm(e, axis=1), amp, rtol=1e-12)
