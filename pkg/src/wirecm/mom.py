"""Method-of-moments assembly for thin-wire structures.

Galerkin discretization with triangle (hat) bases on interior nodes.  The
mixed-potential entry between test function m and source function n is

    Z_mn = j*k*eta0 * Int Int psi_m . psi_n g dl dl'
         - j*eta0/k * Int Int psi_m' psi_n' g dl dl'

with the reduced kernel g = exp(-j*k*R_eff)/(4*pi*R_eff) and
R_eff = sqrt(|r - r'|^2 + a^2), a being the source wire's radius.  The sign
convention makes Re{Z} the radiated-power form (positive semidefinite) and
the tested field of a current column equal to Z @ I.

Implementation notes that matter for reproducibility:

* every reduction in assembly runs over quadrature axes only, one axis at a
  time, so entry values do not depend on how many segments surround them;
* nearly-singular pairs are recomputed per pair from their own coordinates;
* consequently a sub-mesh that shares its parent's node floats produces
  cross-coupling columns numerically indistinguishable from the parent's own
  matrix columns, and assembly is deterministic under any scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import pi

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import NumericalError, ValidationError
from .geometry import WireMesh
from .kernel import ETA0, QuadratureSpec, SingularScheme, Wavenumber, gauss_rule

_FALL, _RISE = 0, 1  # shape 1-t peaks at the segment start, shape t at its end


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True, eq=False)
class PlaneWave:
    """Uniform plane wave E(r) = amplitude * polarization * exp(-j k d.r)."""

    propagation_dir: np.ndarray
    polarization: np.ndarray
    amplitude: float
    k: Wavenumber

    def __post_init__(self) -> None:
        d = np.asarray(self.propagation_dir, dtype=float).reshape(3)
        p = np.asarray(self.polarization, dtype=complex).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValidationError("propagation_dir must be a unit vector")
        if abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise ValidationError("polarization must be a unit vector")
        if abs(np.dot(d, p)) > 1e-12:
            raise ValidationError("polarization must be orthogonal to propagation_dir")
        if not np.isfinite(self.amplitude):
            raise ValidationError("plane-wave amplitude must be finite")
        d.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "propagation_dir", d)
        object.__setattr__(self, "polarization", p)

    def field_at(self, points: np.ndarray) -> np.ndarray:
        """Incident field at an (n, 3) array of points, shape (n, 3) complex."""
        pts = np.asarray(points, dtype=float)
        phase = np.exp(-1j * self.k.k * (pts @ self.propagation_dir))
        return self.amplitude * phase[..., None] * self.polarization


def make_plane_wave(propagation, polarization, amplitude: float, k: Wavenumber) -> PlaneWave:
    """Normalize direction/polarization vectors and build a PlaneWave.

    Orthogonality is checked after normalization, not silently enforced.
    """
    d = np.asarray(propagation, dtype=float).reshape(3)
    nd = np.linalg.norm(d)
    if nd == 0.0:
        raise ValidationError("propagation direction must be nonzero")
    p = np.asarray(polarization, dtype=complex).reshape(3)
    npol = np.linalg.norm(p)
    if npol == 0.0:
        raise ValidationError("polarization must be nonzero")
    return PlaneWave(propagation_dir=d / nd, polarization=p / npol, amplitude=amplitude, k=k)


@dataclass(frozen=True, eq=False)
class ImpedanceMatrix:
    """Dense Galerkin impedance matrix of one structure at one wavenumber."""

    entries: np.ndarray
    mesh_ref: str
    k: Wavenumber

    def __post_init__(self) -> None:
        z = np.asarray(self.entries, dtype=complex)
        if z.ndim != 2 or z.shape[0] != z.shape[1]:
            raise ValidationError(f"impedance matrix must be square, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValidationError("impedance matrix contains non-finite entries")
        scale = np.abs(z).max()
        if scale > 0.0 and np.abs(z - z.T).max() > 1e-10 * scale:
            raise ValidationError("impedance matrix is not symmetric to 1e-10 (max-norm, relative)")
        z = z.copy()
        z.setflags(write=False)
        object.__setattr__(self, "entries", z)

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class ExcitationVector:
    """Tested incident field <psi_m, E_inc> in volts."""

    entries: np.ndarray
    mesh_ref: str
    description: str = ""

    def __post_init__(self) -> None:
        v = np.asarray(self.entries, dtype=complex).reshape(-1).copy()
        if not np.all(np.isfinite(v)):
            raise ValidationError("excitation vector contains non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "entries", v)


@dataclass(frozen=True, eq=False)
class CurrentVector:
    """Basis coefficients of a current distribution, in amperes."""

    entries: np.ndarray
    mesh_ref: str

    def __post_init__(self) -> None:
        i = np.asarray(self.entries, dtype=complex).reshape(-1).copy()
        if not np.all(np.isfinite(i)):
            raise ValidationError("current vector contains non-finite entries")
        i.setflags(write=False)
        object.__setattr__(self, "entries", i)


# ---------------------------------------------------------------------------
# quadrature plumbing


def segment_quadrature(mesh: WireMesh, n_points: int):
    """Gauss points along every segment.

    Returns (points (S, q, 3), weights (S, q), t (q,)) where weights carry the
    segment lengths, i.e. sum(weights[s]) == seg_lengths[s].
    """
    x, w = gauss_rule(n_points)
    t = 0.5 * (x + 1.0)
    delta = mesh.seg_ends - mesh.seg_starts
    pts = mesh.seg_starts[:, None, :] + t[None, :, None] * delta[:, None, :]
    wts = 0.5 * mesh.seg_lengths[:, None] * w[None, :]
    return pts, wts, t


def segment_shape_coefficients(mesh: WireMesh, coeffs: np.ndarray):
    """Split basis coefficients into per-segment (falling, rising) amplitudes.

    On segment s the current is c_fall[s]*(1-t) + c_rise[s]*t along the local
    tangent; end segments see only one half-triangle.
    """
    coeffs = np.asarray(coeffs).reshape(-1)
    if coeffs.shape[0] != mesh.basis_count:
        raise ValidationError(
            f"coefficient vector has length {coeffs.shape[0]}, mesh has {mesh.basis_count} bases"
        )
    s = mesh.segment_count
    c_fall = np.zeros(s, dtype=coeffs.dtype)
    c_rise = np.zeros(s, dtype=coeffs.dtype)
    c_fall[1:] = coeffs
    c_rise[:-1] = coeffs
    return c_fall, c_rise


@lru_cache(maxsize=64)
def _composite_rule(n_sub: int, n_points: int):
    """Composite Gauss rule on [0, 1]: n_sub equal panels, n_points each."""
    x, w = gauss_rule(n_points)
    t = 0.5 * (x + 1.0)
    width = 1.0 / n_sub
    offsets = width * np.arange(n_sub)
    tt = (offsets[:, None] + width * t[None, :]).ravel()
    ww = np.tile(0.5 * width * w, n_sub)
    tt.setflags(write=False)
    ww.setflags(write=False)
    return tt, ww


# ---------------------------------------------------------------------------
# pair classification and singular handling


def _pair_proximity(mesh_a: WireMesh, mesh_b: WireMesh) -> np.ndarray:
    """Conservative segment-pair distance proxy: min over endpoint/midpoint
    combinations.  Exact for collinear and touching wire layouts, which is
    the regime where the near-singular treatment matters."""
    probes_a = np.stack(
        [mesh_a.seg_starts, 0.5 * (mesh_a.seg_starts + mesh_a.seg_ends), mesh_a.seg_ends], axis=1
    )
    probes_b = np.stack(
        [mesh_b.seg_starts, 0.5 * (mesh_b.seg_starts + mesh_b.seg_ends), mesh_b.seg_ends], axis=1
    )
    diff = probes_a[:, :, None, None, :] - probes_b[None, None, :, :, :]
    dist = np.sqrt((diff * diff).sum(-1))
    return dist.min(axis=3).min(axis=1)


def _close_pair_mask(mesh_a: WireMesh, mesh_b: WireMesh) -> np.ndarray:
    prox = _pair_proximity(mesh_a, mesh_b)
    return prox < (mesh_a.seg_lengths[:, None] + mesh_b.seg_lengths[None, :])


def _pair_contract(kernel2d, wa, sa, wb, sb):
    """Contract a (na, nb) kernel against weighted shape functions of one pair.

    Returns (vv (2, 2), dd scalar); summation axes are the point axes only.
    """
    kw = kernel2d * wa[:, None]
    kww = kw * wb[None, :]
    dd = kww.sum(axis=1).sum(axis=0)
    vv = np.empty((2, 2), dtype=kww.dtype)
    for ia in range(2):
        row = (kww * sa[ia][:, None]).sum(axis=0)
        for ib in range(2):
            vv[ia, ib] = (row * sb[ib]).sum(axis=0)
    return vv, dd


def _static_moments(length: float, a: float):
    """Int_0^L w^p / sqrt(w^2 + a^2) dw for p = 0, 1, 3, in closed form."""
    root = np.sqrt(length * length + a * a)
    m0 = np.arcsinh(length / a)
    m1 = root - a
    m3 = (root**3 - a**3) / 3.0 - a * a * m1
    return m0, m1, m3


def _static_self_blocks(length: float, a: float):
    """Exact static double integrals over one segment against itself.

    vv[i, j] = Int Int N_i(u) N_j(v) / (4 pi sqrt((u-v)^2 + a^2)) du dv for
    the falling/rising shapes, dd the same with unit densities.
    """
    m0, m1, m3 = _static_moments(length, a)
    l2 = length * length
    s_same = (2.0 * length * l2 * m0 - 3.0 * l2 * m1 + m3) / (12.0 * pi * l2)
    s_cross = (length * l2 * m0 - m3) / (12.0 * pi * l2)
    vv = np.array([[s_same, s_cross], [s_cross, s_same]])
    dd = (length * m0 - m1) / (2.0 * pi)
    return vv, dd


def _close_pair_block(mesh_a, i, mesh_b, j, kk, radius, quad, r_block, shapes, wa, wb):
    """Recompute one nearly-singular pair: smooth difference kernel on the
    baseline points plus a resolved static 1/(4 pi R_eff) part."""
    # exp(-jkR) - 1 written via sin(kR/2) to dodge cancellation at small kR
    g_osc = (-2j * np.sin(0.5 * kk * r_block)) * np.exp(-0.5j * kk * r_block) / (4.0 * pi * r_block)
    vv, dd = _pair_contract(g_osc, wa, shapes, wb, shapes)

    la = float(mesh_a.seg_lengths[i])
    lb = float(mesh_b.seg_lengths[j])
    same_segment = np.array_equal(mesh_a.nodes[i : i + 2], mesh_b.nodes[j : j + 2])
    if quad.singular_scheme is SingularScheme.SELF_TERM_ANALYTIC and same_segment:
        vv_s, dd_s = _static_self_blocks(lb, radius)
    else:
        n_sub = int(np.clip(np.ceil(max(la, lb) / (2.0 * radius)), 4, 48))
        tt, ww = _composite_rule(n_sub, quad.points_per_segment)
        pa = mesh_a.seg_starts[i] + tt[:, None] * (mesh_a.seg_ends[i] - mesh_a.seg_starts[i])
        pb = mesh_b.seg_starts[j] + tt[:, None] * (mesh_b.seg_ends[j] - mesh_b.seg_starts[j])
        d = pa[:, None, :] - pb[None, :, :]
        r_stat = np.sqrt((d * d).sum(-1) + radius * radius)
        shapes_c = np.stack([1.0 - tt, tt])
        vv_s, dd_s = _pair_contract(
            1.0 / (4.0 * pi * r_stat), la * ww, shapes_c, lb * ww, shapes_c
        )
    return vv + vv_s, dd + dd_s


# ---------------------------------------------------------------------------
# assembly


def assemble_cross_Z(
    mesh_a: WireMesh,
    mesh_b: WireMesh,
    k: Wavenumber,
    quad: QuadratureSpec = QuadratureSpec(),
) -> np.ndarray:
    """Full complex coupling matrix (N_A x N_B): entry (m, mu) is the field of
    source basis mu on structure B tested with basis m on structure A.

    With mesh_a is mesh_b this *is* the impedance matrix; `assemble_Z` simply
    wraps it, so the self-coupling special case holds identically.
    """
    kk = k.k
    radius = mesh_b.radius  # reduced kernel displaces by the source radius
    q = quad.points_per_segment
    pts_a, w_a, t = segment_quadrature(mesh_a, q)
    pts_b, w_b, _ = segment_quadrature(mesh_b, q)
    shapes = np.stack([1.0 - t, t])

    diff = pts_a[:, :, None, None, :] - pts_b[None, None, :, :, :]
    r_all = np.sqrt((diff * diff).sum(-1) + radius * radius)
    g_all = np.exp(-1j * kk * r_all) / (4.0 * pi * r_all)

    # baseline contraction for every pair; quadrature axes reduced one at a time
    gw = g_all * w_a[:, :, None, None]
    gww = gw * w_b[None, None, :, :]
    dd = gww.sum(axis=3).sum(axis=1)  # (Sa, Sb)
    vv = np.empty((2, 2) + dd.shape, dtype=complex)
    for ia in range(2):
        row = (gww * shapes[ia][None, :, None, None]).sum(axis=1)  # (Sa, Sb, q)
        for ib in range(2):
            vv[ia, ib] = (row * shapes[ib][None, None, :]).sum(axis=2)

    # nearly-singular pairs get their own, better-resolved treatment
    close = _close_pair_mask(mesh_a, mesh_b)
    for i, j in zip(*np.nonzero(close)):
        vv[:, :, i, j], dd[i, j] = _close_pair_block(
            mesh_a, i, mesh_b, j, kk, radius, quad, r_all[i, :, j, :], shapes, w_a[i], w_b[j]
        )

    tdot = np.einsum("ic,jc->ij", mesh_a.tangents, mesh_b.tangents)
    d_a = np.stack([-1.0 / mesh_a.seg_lengths, 1.0 / mesh_a.seg_lengths])  # d/dl of fall, rise
    d_b = np.stack([-1.0 / mesh_b.seg_lengths, 1.0 / mesh_b.seg_lengths])

    vec = 1j * kk * ETA0
    sca = -1j * ETA0 / kk
    blocks = [
        [vec * tdot * vv[ia, ib] + sca * (d_a[ia][:, None] * d_b[ib][None, :]) * dd
         for ib in range(2)]
        for ia in range(2)
    ]
    # falling shape on segment s belongs to basis s-1, rising to basis s
    z = (
        blocks[_FALL][_FALL][1:, 1:]
        + blocks[_FALL][_RISE][1:, :-1]
        + blocks[_RISE][_FALL][:-1, 1:]
        + blocks[_RISE][_RISE][:-1, :-1]
    )
    if mesh_a is mesh_b or mesh_a.fingerprint() == mesh_b.fingerprint():
        # self coupling is symmetric by reciprocity; enforce it exactly so the
        # spectral machinery downstream sees a single consistent matrix
        z = 0.5 * (z + z.T)
    return z


def assemble_Z(mesh: WireMesh, k: Wavenumber, quad: QuadratureSpec = QuadratureSpec()) -> ImpedanceMatrix:
    """Impedance matrix of one structure (the A = B case of the cross coupling)."""
    z = assemble_cross_Z(mesh, mesh, k, quad)
    return ImpedanceMatrix(entries=z, mesh_ref=mesh.fingerprint(), k=k)


def assemble_V_planewave(
    mesh: WireMesh, wave: PlaneWave, quad: QuadratureSpec = QuadratureSpec()
) -> ExcitationVector:
    """Tested plane-wave excitation V_m = Int psi_m . E_inc dl."""
    pts, wts, t = segment_quadrature(mesh, quad.points_per_segment)
    e_inc = wave.field_at(pts.reshape(-1, 3)).reshape(pts.shape)
    tangential = np.einsum("sqc,sc->sq", e_inc, mesh.tangents)
    weighted = wts * tangential
    v_fall = (weighted * (1.0 - t)[None, :]).sum(axis=1)
    v_rise = (weighted * t[None, :]).sum(axis=1)
    v = v_fall[1:] + v_rise[:-1]
    desc = (
        f"plane wave k={wave.k.k:.9g} rad/m, dir={np.array2string(wave.propagation_dir, precision=6)}, "
        f"amplitude={wave.amplitude:g} V/m"
    )
    return ExcitationVector(entries=v, mesh_ref=mesh.fingerprint(), description=desc)


def solve_direct(
    z: ImpedanceMatrix, v: ExcitationVector, condition_limit: float = 1e14
) -> CurrentVector:
    """LU solve of Z I = V with an explicit conditioning gate and a residual
    post-check; refuses silently garbage answers."""
    if z.mesh_ref != v.mesh_ref:
        raise ValidationError("impedance matrix and excitation belong to different meshes")
    if v.entries.shape[0] != z.size:
        raise ValidationError(
            f"excitation length {v.entries.shape[0]} does not match matrix size {z.size}"
        )
    a = np.asarray(z.entries, dtype=complex)
    anorm = np.linalg.norm(a, 1)
    lu, piv = sla.lu_factor(a)
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0:
        raise NumericalError(f"condition estimation failed (LAPACK info={info})")
    if rcond <= 0.0 or 1.0 / rcond > condition_limit:
        est = np.inf if rcond <= 0.0 else 1.0 / rcond
        raise NumericalError(
            f"impedance matrix condition estimate {est:.3e} exceeds limit {condition_limit:.3e}"
        )
    x = sla.lu_solve((lu, piv), v.entries)
    vnorm = np.linalg.norm(v.entries)
    if vnorm > 0.0:
        residual = np.linalg.norm(a @ x - v.entries) / vnorm
        if residual >= 1e-10:
            raise NumericalError(f"direct solve residual {residual:.3e} exceeds 1e-10")
    return CurrentVector(entries=x, mesh_ref=z.mesh_ref)
