"""Field evaluation and modal reconstruction.

Sign convention: `near_field_of_current` evaluates the same kernel that the
impedance assembly uses, so testing its output with the basis functions
returns Z @ I (for a scattering solution that is the incident tangential
field on the wire).  The physically radiated field of a current is the
negative of that integral; `radiated_field` exposes it.  Characteristic-mode
reconstruction sums f_n * near_field(I_n), which for the perturbation-matrix
coefficients f = P a lands exactly on the physical scattered field of the
direct solution — the two helpers are two views of one consistent kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from .errors import NumericalError, ValidationError
from .geometry import WireMesh
from .kernel import ETA0, QuadratureSpec, Wavenumber
from .modes import ModalBasis
from .mom import (
    CurrentVector,
    ExcitationVector,
    ImpedanceMatrix,
    PlaneWave,
    assemble_V_planewave,
    assemble_Z,
    segment_quadrature,
    segment_shape_coefficients,
    solve_direct,
)
from .xform import (
    PerturbationMatrix,
    cross_radiation,
    incident_projection,
    perturbation_in_foreign_basis,
)


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Complex electric field (V/m) at one observation point."""

    position: np.ndarray
    E: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.position, dtype=float).reshape(3).copy()
        e = np.asarray(self.E, dtype=complex).reshape(3).copy()
        pos.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "E", e)


@dataclass(frozen=True, eq=False)
class ModalCoefficients:
    """Excitation (a) or scattering (f) coefficients tied to one modal basis."""

    values: np.ndarray
    basis_ref: str
    kind: str  # "excitation" or "scattering"

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex).reshape(-1).copy()
        if self.kind not in ("excitation", "scattering"):
            raise ValidationError(f"unknown coefficient kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class FarFieldSample:
    """Radiation pattern value: (theta, phi) components along a direction."""

    direction: np.ndarray
    F: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.direction, dtype=float).reshape(3).copy()
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValidationError("far-field direction must be a unit vector")
        f = np.asarray(self.F, dtype=complex).reshape(2).copy()
        d.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "F", f)


# ---------------------------------------------------------------------------
# helpers


def _coefficients(mesh: WireMesh, current) -> np.ndarray:
    if isinstance(current, CurrentVector):
        if current.mesh_ref != mesh.fingerprint():
            raise ValidationError("current vector belongs to a different mesh")
        return current.entries
    c = np.asarray(current, dtype=complex).reshape(-1)
    if c.shape[0] != mesh.basis_count:
        raise ValidationError(
            f"coefficient vector has length {c.shape[0]}, mesh has {mesh.basis_count} bases"
        )
    return c


def distance_to_wire(mesh: WireMesh, r) -> float:
    """Minimum distance from a point to the mesh's segment chain."""
    r = np.asarray(r, dtype=float).reshape(3)
    d = mesh.seg_ends - mesh.seg_starts
    rel = r[None, :] - mesh.seg_starts
    t = np.clip((rel * d).sum(axis=1) / (d * d).sum(axis=1), 0.0, 1.0)
    closest = mesh.seg_starts + t[:, None] * d
    return float(np.linalg.norm(r[None, :] - closest, axis=1).min())


def _field_ingredients(mesh: WireMesh, coeffs: np.ndarray, r, quad: QuadratureSpec):
    r = np.asarray(r, dtype=float).reshape(3)
    if distance_to_wire(mesh, r) <= mesh.radius:
        raise ValidationError(
            "field point lies on or inside the wire surface; move it off the structure"
        )
    pts, wts, t = segment_quadrature(mesh, quad.points_per_segment)
    c_fall, c_rise = segment_shape_coefficients(mesh, coeffs)
    amp = c_fall[:, None] * (1.0 - t)[None, :] + c_rise[:, None] * t[None, :]  # (S, q)
    charge = (c_rise - c_fall) / mesh.seg_lengths  # d/dl of the current, per segment
    diff = r[None, None, :] - pts  # (S, q, 3)
    dist = np.sqrt((diff * diff).sum(-1) + mesh.radius**2)
    return pts, wts, t, amp, charge, diff, dist


def near_field_of_current(
    mesh: WireMesh, current, r, k: Wavenumber, quad: QuadratureSpec = QuadratureSpec()
) -> FieldSample:
    """Characteristic-convention field integral of a current distribution.

    Tested with the mesh's basis functions this reproduces Z @ I; see the
    module docstring for how it relates to the physically radiated field.
    The observation point must lie off the wire (reduced kernel or not, the
    integral stops meaning anything on the source support).
    """
    kk = k.k
    coeffs = _coefficients(mesh, current)
    _, wts, _, amp, charge, diff, dist = _field_ingredients(mesh, coeffs, r, quad)
    g = np.exp(-1j * kk * dist) / (4.0 * pi * dist)
    # d/dR of g, divided by R: reused for the gradient of the scalar potential
    gp_over_r = -np.exp(-1j * kk * dist) * (1.0 + 1j * kk * dist) / (4.0 * pi * dist**3)
    vector_term = np.einsum("sq,sc->c", wts * amp * g, mesh.tangents)
    grad_term = ((wts * charge[:, None] * gp_over_r)[..., None] * diff).sum(axis=(0, 1))
    e = 1j * kk * ETA0 * vector_term + 1j * ETA0 / kk * grad_term
    return FieldSample(position=r, E=e)


def radiated_field(
    mesh: WireMesh, current, r, k: Wavenumber, quad: QuadratureSpec = QuadratureSpec()
) -> FieldSample:
    """Physical field radiated by a current (scattered field, for an induced
    solution): the negative of `near_field_of_current`."""
    sample = near_field_of_current(mesh, current, r, k, quad)
    return FieldSample(position=sample.position, E=-sample.E)


def standing_wave_field(
    mesh: WireMesh, modal_current, r, k: Wavenumber, quad: QuadratureSpec = QuadratureSpec()
) -> FieldSample:
    """Standing-wave (real-kernel) field of a real modal current.

    Uses sin(kR)/(4 pi R) in place of the outgoing kernel; equals the even
    combination (E + conj(E))/2 of the radiating evaluation, and is a purely
    real 3-vector for real currents.
    """
    kk = k.k
    coeffs = _coefficients(mesh, modal_current)
    _, wts, _, amp, charge, diff, dist = _field_ingredients(mesh, coeffs, r, quad)
    s = np.sin(kk * dist) / (4.0 * pi * dist)
    sp_over_r = (kk * dist * np.cos(kk * dist) - np.sin(kk * dist)) / (4.0 * pi * dist**3)
    vector_term = np.einsum("sq,sc->c", wts * amp * s, mesh.tangents)
    grad_term = ((wts * charge[:, None] * sp_over_r)[..., None] * diff).sum(axis=(0, 1))
    e = kk * ETA0 * vector_term + ETA0 / kk * grad_term
    return FieldSample(position=r, E=e)


# ---------------------------------------------------------------------------
# modal pipeline


def modal_excitation(basis: ModalBasis, v: ExcitationVector) -> ModalCoefficients:
    """a = I_cm^T V: how strongly the incident field drives each mode."""
    if basis.mesh_ref != v.mesh_ref:
        raise ValidationError("excitation vector belongs to a different mesh than the basis")
    a = basis.currents.T @ v.entries
    return ModalCoefficients(values=a, basis_ref=basis.key(), kind="excitation")


def scatter(p: PerturbationMatrix, a: ModalCoefficients) -> ModalCoefficients:
    """f = P a: modal scattering coefficients from modal excitation."""
    if a.kind != "excitation":
        raise ValidationError(f"scatter needs excitation coefficients, got kind {a.kind!r}")
    if p.basis_ref != a.basis_ref:
        raise ValidationError("perturbation matrix and coefficients use different bases")
    if p.entries.shape[1] != len(a):
        raise ValidationError(
            f"perturbation is {p.entries.shape[0]}x{p.entries.shape[1]}, coefficients length {len(a)}"
        )
    return ModalCoefficients(values=p.entries @ a.values, basis_ref=a.basis_ref, kind="scattering")


def mode_fields(
    basis: ModalBasis, mesh: WireMesh, r, quad: QuadratureSpec = QuadratureSpec()
) -> np.ndarray:
    """Characteristic field of every retained mode at one point, (M, 3)."""
    if basis.mesh_ref != mesh.fingerprint():
        raise ValidationError("modal basis belongs to a different mesh")
    out = np.empty((basis.mode_count, 3), dtype=complex)
    for n in range(basis.mode_count):
        out[n] = near_field_of_current(mesh, basis.currents[:, n], r, basis.k, quad).E
    return out


def reconstruct_field(
    basis_a: ModalBasis,
    mesh_a: WireMesh,
    f: ModalCoefficients,
    r,
    n_trunc: int,
    quad: QuadratureSpec = QuadratureSpec(),
) -> FieldSample:
    """Scattered field rebuilt from the first n_trunc modes: sum f_n E_n(r)."""
    if f.kind != "scattering":
        raise ValidationError(f"reconstruction needs scattering coefficients, got {f.kind!r}")
    if f.basis_ref != basis_a.key():
        raise ValidationError("coefficients were computed in a different modal basis")
    if not 0 <= n_trunc <= basis_a.mode_count:
        raise ValidationError(
            f"truncation {n_trunc} out of range for {basis_a.mode_count} retained modes"
        )
    r = np.asarray(r, dtype=float).reshape(3)
    e = np.zeros(3, dtype=complex)
    for n in range(n_trunc):
        e += f.values[n] * near_field_of_current(mesh_a, basis_a.currents[:, n], r, basis_a.k, quad).E
    return FieldSample(position=r, E=e)


def naive_approx_field(
    basis_a: ModalBasis,
    mesh_a: WireMesh,
    eigenvalues_of_b,
    a: ModalCoefficients,
    r,
    n_trunc: int,
    quad: QuadratureSpec = QuadratureSpec(),
) -> FieldSample:
    """Straw-man reconstruction that pretends B's modes were A's: feeds A's
    excitation through the diagonal response -1/(1 + j lambda^B_n) and sums
    A's mode fields.  Exact when A and B coincide; a controlled error model
    otherwise."""
    if a.kind != "excitation":
        raise ValidationError(f"naive approximation needs excitation coefficients, got {a.kind!r}")
    if a.basis_ref != basis_a.key():
        raise ValidationError("coefficients were computed in a different modal basis")
    lam_b = np.asarray(eigenvalues_of_b, dtype=float).reshape(-1)
    n_use = min(n_trunc, basis_a.mode_count, lam_b.shape[0], len(a))
    r = np.asarray(r, dtype=float).reshape(3)
    e = np.zeros(3, dtype=complex)
    for n in range(n_use):
        f_n = -a.values[n] / (1.0 + 1j * lam_b[n])
        e += f_n * near_field_of_current(mesh_a, basis_a.currents[:, n], r, basis_a.k, quad).E
    return FieldSample(position=r, E=e)


def convergence_curve(
    basis_a: ModalBasis,
    mesh_a: WireMesh,
    mesh_b: WireMesh,
    wave: PlaneWave,
    r_obs,
    n_max: int,
    quad: QuadratureSpec = QuadratureSpec(),
    z_b: ImpedanceMatrix | None = None,
) -> list[tuple[int, float]]:
    """Reconstruction error against the direct solve as modes are added.

    Solves structure B directly, routes the same incident wave through A's
    modal machinery (a = I_cm^T V_A, f = P^ABA a), and reports
    |sum_{n<=N} f_n E_n(r) - E_direct(r)| / |E_direct(r)| for N = 1..n_max.
    """
    if basis_a.mesh_ref != mesh_a.fingerprint():
        raise ValidationError("modal basis belongs to a different mesh than structure A")
    n_max = int(n_max)
    if n_max < 1:
        raise ValidationError("n_max must be at least 1")
    n_max = min(n_max, basis_a.mode_count)

    z_b = z_b if z_b is not None else assemble_Z(mesh_b, wave.k, quad)
    v_b = assemble_V_planewave(mesh_b, wave, quad)
    i_direct = solve_direct(z_b, v_b)
    e_direct = radiated_field(mesh_b, i_direct, r_obs, wave.k, quad).E
    norm_direct = np.linalg.norm(e_direct)
    if norm_direct == 0.0:
        raise NumericalError("direct scattered field vanishes at the observation point; "
                             "the relative convergence error is undefined there")

    r_ab = cross_radiation(mesh_a, mesh_b, wave.k, quad)
    u = incident_projection(basis_a, r_ab)
    p = perturbation_in_foreign_basis(u, z_b)
    v_a = assemble_V_planewave(mesh_a, wave, quad)
    a = modal_excitation(basis_a, v_a)
    f = scatter(p, a)

    fields = mode_fields(basis_a, mesh_a, r_obs, quad)
    curve = []
    acc = np.zeros(3, dtype=complex)
    for n in range(n_max):
        acc = acc + f.values[n] * fields[n]
        err = float(np.linalg.norm(acc - e_direct) / norm_direct)
        curve.append((n + 1, err))
    return curve


# ---------------------------------------------------------------------------
# far field


def _spherical_basis(direction: np.ndarray):
    d = np.asarray(direction, dtype=float).reshape(3)
    nd = np.linalg.norm(d)
    if nd == 0.0:
        raise ValidationError("far-field direction must be nonzero")
    d = d / nd
    sin_theta = np.hypot(d[0], d[1])
    if sin_theta < 1e-12:
        # on the poles the azimuth is arbitrary; pick phi = 0
        theta_hat = np.array([d[2], 0.0, -sin_theta])
        theta_hat = theta_hat / np.linalg.norm(theta_hat)
        phi_hat = np.array([0.0, 1.0, 0.0])
    else:
        cos_phi = d[0] / sin_theta
        sin_phi = d[1] / sin_theta
        theta_hat = np.array([d[2] * cos_phi, d[2] * sin_phi, -sin_theta])
        phi_hat = np.array([-sin_phi, cos_phi, 0.0])
    return d, theta_hat, phi_hat


def far_field_of_current(
    mesh: WireMesh, current, direction, k: Wavenumber, quad: QuadratureSpec = QuadratureSpec()
) -> FarFieldSample:
    """Radiation pattern F(r_hat) = lim r e^{+jkr} E(r r_hat), phase-referenced
    to the origin, in the same sign convention as `near_field_of_current`."""
    kk = k.k
    coeffs = _coefficients(mesh, current)
    d, theta_hat, phi_hat = _spherical_basis(direction)
    pts, wts, t = segment_quadrature(mesh, quad.points_per_segment)
    c_fall, c_rise = segment_shape_coefficients(mesh, coeffs)
    amp = c_fall[:, None] * (1.0 - t)[None, :] + c_rise[:, None] * t[None, :]
    phase = np.exp(1j * kk * (pts @ d))
    j_hat = np.einsum("sq,sc->c", wts * amp * phase, mesh.tangents)
    scale = 1j * kk * ETA0 / (4.0 * pi)
    f = scale * np.array([theta_hat @ j_hat, phi_hat @ j_hat])
    return FarFieldSample(direction=d, F=f)


def two_mode_null_ratio(f_a: FarFieldSample, f_b: FarFieldSample, component: str = "theta") -> complex:
    """Coefficient ratio rho placing a pattern null at these samples' direction:
    rho * F_a + F_b = 0 in the chosen polarization component."""
    idx = {"theta": 0, "phi": 1}.get(component)
    if idx is None:
        raise ValidationError(f"component must be 'theta' or 'phi', got {component!r}")
    if not np.allclose(f_a.direction, f_b.direction, atol=1e-12):
        raise ValidationError("the two far-field samples must share one direction")
    fa = complex(f_a.F[idx])
    fb = complex(f_b.F[idx])
    if fa == 0.0 and fb == 0.0:
        raise NumericalError("both patterns already vanish there; the null ratio is degenerate")
    if fa == 0.0:
        raise NumericalError("the working component of F_a vanishes; no finite ratio exists")
    return -fb / fa
