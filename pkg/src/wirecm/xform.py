"""Cross-structure modal machinery.

Everything here expresses the scattering behaviour of one structure (B) in
the characteristic basis of another structure (A) that radiates over it:

* R^AB  — real part of the cross coupling matrix, the shared "radiation
          inner product" between the two structures' bases;
* U^AB  — A's modal currents tested against that coupling;
* P     — the perturbation operator mapping modal excitation coefficients to
          modal scattering coefficients, P = -U Z_B^-1 U^T;
* Q^AB  — the basis-change matrix between the two modal bases;
* S     — the scattering operator I + 2P.

For A = B these collapse to the classical diagonal forms, which is what the
verification identities lean on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import NumericalError, ValidationError
from .geometry import WireMesh
from .kernel import QuadratureSpec, Wavenumber
from .modes import ModalBasis
from .mom import ImpedanceMatrix, assemble_cross_Z


@dataclass(frozen=True, eq=False)
class CrossRadiationMatrix:
    """Re of the cross coupling; rows test on structure A, columns source B."""

    entries: np.ndarray
    mesh_a: str
    mesh_b: str
    k: Wavenumber

    def __post_init__(self) -> None:
        r = np.asarray(self.entries, dtype=float)
        if r.ndim != 2:
            raise ValidationError(f"cross-radiation matrix must be 2-D, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise ValidationError("cross-radiation matrix contains non-finite entries")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "entries", r)

    def transposed(self) -> "CrossRadiationMatrix":
        """The same coupling viewed with roles swapped (B tested, A sourcing)."""
        return CrossRadiationMatrix(
            entries=self.entries.T, mesh_a=self.mesh_b, mesh_b=self.mesh_a, k=self.k
        )


@dataclass(frozen=True, eq=False)
class IncidentProjection:
    """U = I_cm(A)^T R^AB: how B's bases excite A's modes (M_A x N_B, real)."""

    entries: np.ndarray
    basis_a: str
    mesh_b: str

    def __post_init__(self) -> None:
        u = np.asarray(self.entries, dtype=float)
        if u.ndim != 2:
            raise ValidationError(f"incident projection must be 2-D, got shape {u.shape}")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "entries", u)


@dataclass(frozen=True, eq=False)
class PerturbationMatrix:
    """Modal excitation -> modal scattering map in A's basis (M_A x M_A)."""

    entries: np.ndarray
    basis_ref: str
    structure_ref: str

    def __post_init__(self) -> None:
        p = np.asarray(self.entries, dtype=complex)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValidationError(f"perturbation matrix must be square, got shape {p.shape}")
        scale = np.abs(p).max()
        if scale > 0.0 and np.abs(p - p.T).max() > 1e-8 * scale:
            raise ValidationError("perturbation matrix is not symmetric to 1e-8 relative")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "entries", p)


@dataclass(frozen=True, eq=False)
class TransformMatrix:
    """Q^AB: radiation-inner-product overlap of two modal bases (M_A x M_B)."""

    entries: np.ndarray
    basis_a: str
    basis_b: str

    def __post_init__(self) -> None:
        q = np.asarray(self.entries, dtype=float)
        if q.ndim != 2:
            raise ValidationError(f"transform matrix must be 2-D, got shape {q.shape}")
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "entries", q)


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    """S = I + 2P, kept together with the perturbation it came from."""

    entries: np.ndarray
    basis_ref: str
    structure_ref: str
    source_perturbation: PerturbationMatrix | None = None

    def __post_init__(self) -> None:
        s = np.asarray(self.entries, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValidationError(f"scattering matrix must be square, got shape {s.shape}")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "entries", s)


# ---------------------------------------------------------------------------
# operations


def cross_radiation(
    mesh_a: WireMesh,
    mesh_b: WireMesh,
    k: Wavenumber,
    quad: QuadratureSpec = QuadratureSpec(),
) -> CrossRadiationMatrix:
    """Real part of the full cross coupling between two structures."""
    z = assemble_cross_Z(mesh_a, mesh_b, k, quad)
    return CrossRadiationMatrix(
        entries=z.real, mesh_a=mesh_a.fingerprint(), mesh_b=mesh_b.fingerprint(), k=k
    )


def incident_projection(basis_a: ModalBasis, r_ab: CrossRadiationMatrix) -> IncidentProjection:
    """U^AB = I_cm(A)^T R^AB."""
    if basis_a.mesh_ref != r_ab.mesh_a:
        raise ValidationError("modal basis and cross-radiation matrix disagree on structure A")
    if basis_a.basis_size != r_ab.entries.shape[0]:
        raise ValidationError(
            f"basis has {basis_a.basis_size} rows, coupling matrix {r_ab.entries.shape[0]}"
        )
    # Extended-precision product: rows belonging to large-eigenvalue modes
    # are small differences of large terms, and downstream identities compare
    # them at the 1e-10 level.
    cur_l = np.ascontiguousarray(basis_a.currents, dtype=np.longdouble)
    r_l = np.ascontiguousarray(r_ab.entries, dtype=np.longdouble)
    u = (cur_l.T @ r_l).astype(float)
    return IncidentProjection(entries=u, basis_a=basis_a.key(), mesh_b=r_ab.mesh_b)


def perturbation_in_foreign_basis(
    u: IncidentProjection, z_b: ImpedanceMatrix, condition_limit: float = 1e14
) -> PerturbationMatrix:
    """P = -U Z_B^-1 U^T: B's scattering response expressed in A's modes."""
    if u.mesh_b != z_b.mesh_ref:
        raise ValidationError("incident projection and impedance matrix disagree on structure B")
    if u.entries.shape[1] != z_b.size:
        raise ValidationError(
            f"projection has {u.entries.shape[1]} columns, impedance matrix is {z_b.size}"
        )
    a = np.asarray(z_b.entries, dtype=complex)
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
    x = sla.lu_solve((lu, piv), u.entries.astype(complex).T)  # Z_B^-1 U^T
    # Two rounds of iterative refinement with extended-precision residuals:
    # the diagonal-coherence identities probe P at 1e-10 relative, which a
    # single LU solve does not reliably reach once cond(Z) passes ~1e6.
    ar_l = np.ascontiguousarray(a.real, dtype=np.longdouble)
    ai_l = np.ascontiguousarray(a.imag, dtype=np.longdouble)
    ut_l = np.ascontiguousarray(u.entries.T, dtype=np.longdouble)
    for _ in range(2):
        xr_l = np.ascontiguousarray(x.real, dtype=np.longdouble)
        xi_l = np.ascontiguousarray(x.imag, dtype=np.longdouble)
        res_r = ut_l - (ar_l @ xr_l - ai_l @ xi_l)
        res_i = -(ar_l @ xi_l + ai_l @ xr_l)
        res = res_r.astype(float) + 1j * res_i.astype(float)
        x = x + sla.lu_solve((lu, piv), res)
    ue_l = np.ascontiguousarray(u.entries, dtype=np.longdouble)
    xr_l = np.ascontiguousarray(x.real, dtype=np.longdouble)
    xi_l = np.ascontiguousarray(x.imag, dtype=np.longdouble)
    p = -((ue_l @ xr_l).astype(float) + 1j * (ue_l @ xi_l).astype(float))
    p = 0.5 * (p + p.T)  # symmetric by reciprocity; enforce against lu noise
    return PerturbationMatrix(entries=p, basis_ref=u.basis_a, structure_ref=z_b.mesh_ref)


def _canonical_overlap(c_left: np.ndarray, r: np.ndarray, c_right: np.ndarray) -> np.ndarray:
    """(c_left^T r) c_right with fixed association, contiguous operands and
    extended-precision accumulation, so the same value triple always produces
    the same bits and large-eigenvalue cancellation stays below 1e-10."""
    cl = np.ascontiguousarray(c_left, dtype=np.longdouble)
    rr = np.ascontiguousarray(r, dtype=np.longdouble)
    cr = np.ascontiguousarray(c_right, dtype=np.longdouble)
    return ((cl.T @ rr) @ cr).astype(float)


def transform_matrix(
    basis_a: ModalBasis, r_ab: CrossRadiationMatrix, basis_b: ModalBasis
) -> TransformMatrix:
    """Q^AB = I_cm(A)^T R^AB I_cm(B).

    The product is evaluated in a canonical operand order chosen by the two
    bases' content keys; the reversed call reuses the identical multiplies and
    transposes the result, so Q^BA is the bit-exact transpose of Q^AB.
    """
    if basis_a.mesh_ref != r_ab.mesh_a:
        raise ValidationError("basis A does not belong to the coupling's test structure")
    if basis_b.mesh_ref != r_ab.mesh_b:
        raise ValidationError("basis B does not belong to the coupling's source structure")
    if (basis_a.basis_size, basis_b.basis_size) != r_ab.entries.shape:
        raise ValidationError(
            f"coupling shape {r_ab.entries.shape} does not match bases "
            f"({basis_a.basis_size}, {basis_b.basis_size})"
        )
    key_a = basis_a.key()
    key_b = basis_b.key()
    if key_a <= key_b:
        q = _canonical_overlap(basis_a.currents, r_ab.entries, basis_b.currents)
    else:
        q = _canonical_overlap(basis_b.currents, r_ab.entries.T, basis_a.currents).T
    return TransformMatrix(entries=q, basis_a=key_a, basis_b=key_b)


def transform_perturbation(q: TransformMatrix, p_bbb: PerturbationMatrix) -> PerturbationMatrix:
    """Carry a perturbation matrix from B's own basis into A's: Q P Q^T."""
    if q.basis_b != p_bbb.basis_ref:
        raise ValidationError("transform matrix and perturbation disagree on basis B")
    p = (q.entries @ p_bbb.entries) @ q.entries.T
    p = 0.5 * (p + p.T)
    return PerturbationMatrix(entries=p, basis_ref=q.basis_a, structure_ref=p_bbb.structure_ref)


def scattering_from_perturbation(p: PerturbationMatrix) -> ScatteringMatrix:
    """S = I + 2P, remembering P for lossless later transport."""
    s = np.eye(p.entries.shape[0], dtype=complex) + 2.0 * p.entries
    return ScatteringMatrix(
        entries=s, basis_ref=p.basis_ref, structure_ref=p.structure_ref, source_perturbation=p
    )


def transform_scattering(q: TransformMatrix, s_bbb: ScatteringMatrix) -> ScatteringMatrix:
    """Carry a scattering matrix into A's basis: S^ABA = I + Q (S - I) Q^T.

    Implemented by transporting the underlying perturbation and rebuilding
    I + 2P, which makes the identity with `transform_perturbation` exact (and
    maps S = I to exactly I).
    """
    if s_bbb.source_perturbation is not None:
        p_b = s_bbb.source_perturbation
    else:
        half = 0.5 * (s_bbb.entries - np.eye(s_bbb.entries.shape[0], dtype=complex))
        p_b = PerturbationMatrix(
            entries=half, basis_ref=s_bbb.basis_ref, structure_ref=s_bbb.structure_ref
        )
    return scattering_from_perturbation(transform_perturbation(q, p_b))


def offdiagonal_ratio(matrix: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part over the whole matrix norm."""
    m = np.asarray(matrix)
    total = np.linalg.norm(m)
    if total == 0.0:
        return 0.0
    off = m - np.diag(np.diag(m))
    return float(np.linalg.norm(off) / total)


def export_matrix_csv(matrix: np.ndarray, path, label: str = "entry") -> None:
    """Write a dense matrix as `row,col,re,im` CSV with a header line."""
    m = np.asarray(matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"row,col,{label}_re,{label}_im\n")
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                v = complex(m[i, j])
                fh.write(f"{i},{j},{v.real:.17g},{v.imag:.17g}\n")
