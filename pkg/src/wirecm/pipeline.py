"""End-to-end dipole experiment plumbing shared by the CLI subcommands.

The sweep walks a family of trimmed dipoles nested inside one reference
structure, expresses each one's scattering in the reference modal basis, and
writes plot-ready CSVs plus a self-check report.  Workers run per length in a
thread pool; merges happen afterwards in config order so output bytes do not
depend on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import NumericalError, ValidationError
from .fields import (
    ModalCoefficients,
    modal_excitation,
    naive_approx_field,
    radiated_field,
    reconstruct_field,
    scatter,
)
from .geometry import WireMesh, make_dipole, nest, trim_dipole
from .kernel import QuadratureSpec, Wavenumber
from .modes import ModalBasis, characteristic_modes, diag_perturbation
from .mom import (
    ImpedanceMatrix,
    PlaneWave,
    assemble_V_planewave,
    assemble_Z,
    make_plane_wave,
    solve_direct,
)
from .xform import (
    cross_radiation,
    incident_projection,
    offdiagonal_ratio,
    perturbation_in_foreign_basis,
    transform_matrix,
    transform_perturbation,
)

#: bounds enforced by the sweep's verification report
NESTED_SUBMATRIX_TOL = 1e-12
SELF_COHERENCE_TOL = 1e-10
SELF_TRANSFORM_TOL = 1e-10
ROUTE_EQUIVALENCE_TOL = 1e-8
FULL_RANK_FIELD_TOL = 1e-3
#: below half a wavelength the induced current leans on the reference
#: structure's weakly radiating directions, whose reactive near fields are
#: only ~1e-3 suppressed at the default observation distance; the oracle
#: bound widens accordingly there
FULL_RANK_FIELD_TOL_SHORT = 5e-3
FULL_RANK_FIELD_SHORT_LIMIT = 0.5
DIAGONAL_CONTRAST_LOW = 1e-8
DIAGONAL_CONTRAST_HIGH = 0.1
CONVERGENCE_SIX_MODE_TOL = 0.05


@dataclass(frozen=True)
class Check:
    """One verification line: measured value against its bound."""

    name: str
    value: float
    bound: float
    comparator: str  # "<" or ">"

    @property
    def passed(self) -> bool:
        return self.value < self.bound if self.comparator == "<" else self.value > self.bound

    def line(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        return f"{word}  {self.name}: {self.value:.6e} {self.comparator} {self.bound:.6e}"


@dataclass
class ReferenceState:
    """Everything derived once from the config's reference structure."""

    config: ExperimentConfig
    k: Wavenumber
    quad: QuadratureSpec
    mesh: WireMesh
    z: ImpedanceMatrix
    basis: ModalBasis
    wave: PlaneWave
    a: ModalCoefficients  # modal excitation of the incident wave


def build_reference(cfg: ExperimentConfig) -> ReferenceState:
    k = cfg.wavenumber()
    quad = cfg.quadrature()
    mesh = make_dipole(cfg.ref_length_m(), cfg.ref_radius_m(), cfg.ref_segments())
    z = assemble_Z(mesh, k, quad)
    basis = characteristic_modes(z, rank_tol=cfg.rank_tolerance)
    wave = make_plane_wave(
        np.asarray(cfg.propagation, dtype=float),
        np.asarray(cfg.polarization, dtype=float),
        cfg.amplitude,
        k,
    )
    v = assemble_V_planewave(mesh, wave, quad)
    a = modal_excitation(basis, v)
    return ReferenceState(
        config=cfg, k=k, quad=quad, mesh=mesh, z=z, basis=basis, wave=wave, a=a
    )


@dataclass
class LengthResult:
    """Worker output for one sweep length (lengths in lambda0 units)."""

    length: float
    p_entries: np.ndarray
    q_entries: np.ndarray
    field_rows: list[tuple]
    convergence: list[tuple[int, float]]
    checks: list[Check]


def _is_close(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def sweep_one_length(state: ReferenceState, length: float) -> LengthResult:
    """Solve one nested structure and express it in the reference basis."""
    cfg = state.config
    checks: list[Check] = []
    mesh_l = trim_dipole(state.mesh, length * cfg.wavelength_m)
    nesting = nest(mesh_l, state.mesh)
    cols = np.array(nesting.parent_indices())

    r_ab = cross_radiation(state.mesh, mesh_l, state.k, state.quad)
    sub_dev = float(np.max(np.abs(r_ab.entries - state.z.entries.real[:, cols])))
    checks.append(
        Check(f"nested-coupling submatrix identity (l={length:g})", sub_dev, NESTED_SUBMATRIX_TOL, "<")
    )

    z_l = assemble_Z(mesh_l, state.k, state.quad)
    u = incident_projection(state.basis, r_ab)
    p = perturbation_in_foreign_basis(u, z_l, condition_limit=cfg.condition_limit)

    basis_l = characteristic_modes(z_l, rank_tol=cfg.rank_tolerance)
    q = transform_matrix(state.basis, r_ab, basis_l)
    p_own = perturbation_in_foreign_basis(
        incident_projection(basis_l, cross_radiation(mesh_l, mesh_l, state.k, state.quad)),
        z_l,
        condition_limit=cfg.condition_limit,
    )
    p_transported = transform_perturbation(q, p_own)
    route_dev = float(
        np.max(np.abs(p.entries - p_transported.entries)) / np.max(np.abs(p.entries))
    )
    checks.append(
        Check(f"perturbation route equivalence (l={length:g})", route_dev, ROUTE_EQUIVALENCE_TOL, "<")
    )

    if _is_close(length, cfg.ref_length):
        diag_dev = float(
            np.max(np.abs(p.entries - diag_perturbation(state.basis.eigenvalues)))
            / np.max(np.abs(p.entries))
        )
        checks.append(Check("self-basis diagonal coherence", diag_dev, SELF_COHERENCE_TOL, "<"))
        q_dev = float(np.max(np.abs(q.entries - np.eye(state.basis.mode_count))))
        checks.append(Check("self-transform identity", q_dev, SELF_TRANSFORM_TOL, "<"))
        checks.append(
            Check(
                "diagonal contrast at the reference length",
                offdiagonal_ratio(p.entries),
                DIAGONAL_CONTRAST_LOW,
                "<",
            )
        )

    # direct solve and full-rank reconstruction at every observation point
    v_l = assemble_V_planewave(mesh_l, state.wave, state.quad)
    i_l = solve_direct(z_l, v_l, condition_limit=cfg.condition_limit)
    f = scatter(p, state.a)
    field_rows: list[tuple] = []
    worst_err = 0.0
    for pt_lam, pt_m in zip(cfg.observation_points, cfg.observation_points_m()):
        e_dir = radiated_field(mesh_l, i_l, pt_m, state.k, state.quad).E
        e_rec = reconstruct_field(
            state.basis, state.mesh, f, pt_m, state.basis.mode_count, state.quad
        ).E
        norm = np.linalg.norm(e_dir)
        if norm == 0.0:
            raise NumericalError(
                f"direct scattered field vanishes at observation point {pt_lam}; "
                "relative comparison undefined"
            )
        err = float(np.linalg.norm(e_rec - e_dir) / norm)
        worst_err = max(worst_err, err)
        field_rows.append((length, *pt_lam, *_six(e_dir), *_six(e_rec), err))
    field_tol = (
        FULL_RANK_FIELD_TOL
        if length >= FULL_RANK_FIELD_SHORT_LIMIT
        else FULL_RANK_FIELD_TOL_SHORT
    )
    checks.append(
        Check(f"full-rank field oracle (l={length:g})", worst_err, field_tol, "<")
    )

    # modal convergence toward the direct field at the first observation point
    pt0 = cfg.observation_points_m()[0]
    e_dir0 = radiated_field(mesh_l, i_l, pt0, state.k, state.quad).E
    convergence = _convergence_rows(state, f, pt0, e_dir0)

    return LengthResult(
        length=length,
        p_entries=p.entries,
        q_entries=q.entries,
        field_rows=field_rows,
        convergence=convergence,
        checks=checks,
    )


def _six(e: np.ndarray) -> tuple:
    return (e[0].real, e[0].imag, e[1].real, e[1].imag, e[2].real, e[2].imag)


def _convergence_rows(state, f, pt_m, e_dir) -> list[tuple[int, float]]:
    from .fields import mode_fields

    norm = np.linalg.norm(e_dir)
    fields = mode_fields(state.basis, state.mesh, pt_m, state.quad)
    rows = []
    acc = np.zeros(3, dtype=complex)
    errs = {}
    for n in range(state.basis.mode_count):
        acc = acc + f.values[n] * fields[n]
        errs[n + 1] = float(np.linalg.norm(acc - e_dir) / norm)
    for n in state.config.mode_counts:
        n_eff = min(n, state.basis.mode_count)
        rows.append((n_eff, errs[n_eff]))
    return rows


# ---------------------------------------------------------------------------
# output files


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: Path, header: str, rows) -> None:
    text = header + "\n" + "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)
    path.write_text(text, encoding="utf-8")


def write_matrix_csv(path: Path, matrix: np.ndarray, label: str) -> None:
    m = np.asarray(matrix)
    rows = []
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            v = complex(m[i, j])
            rows.append((i, j, v.real, v.imag))
    write_csv(path, f"row,col,{label}_re_dimensionless,{label}_im_dimensionless", rows)


FIELD_HEADER = (
    "length_lambda0,obs_x_lambda0,obs_y_lambda0,obs_z_lambda0,"
    "e_direct_x_re_v_per_m,e_direct_x_im_v_per_m,"
    "e_direct_y_re_v_per_m,e_direct_y_im_v_per_m,"
    "e_direct_z_re_v_per_m,e_direct_z_im_v_per_m,"
    "e_modal_x_re_v_per_m,e_modal_x_im_v_per_m,"
    "e_modal_y_re_v_per_m,e_modal_y_im_v_per_m,"
    "e_modal_z_re_v_per_m,e_modal_z_im_v_per_m,"
    "relative_error_dimensionless"
)


def run_sweep(state: ReferenceState, out_dir: Path, threads: int = 1) -> list[Check]:
    """Process every sweep length, write per-length and summary files, and
    return the full check list (callers decide what a failure means)."""
    cfg = state.config
    lengths = list(cfg.sweep_lengths)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda l: sweep_one_length(state, l), lengths))
    else:
        results = [sweep_one_length(state, l) for l in lengths]

    out_dir.mkdir(parents=True, exist_ok=True)
    checks: list[Check] = []
    conv_rows = []
    for res in results:  # config order: deterministic merge
        tag = f"{res.length:g}"
        write_matrix_csv(out_dir / f"P_{tag}.csv", res.p_entries, "p")
        write_matrix_csv(out_dir / f"Q_{tag}.csv", res.q_entries, "q")
        write_csv(out_dir / f"field_{tag}.csv", FIELD_HEADER, res.field_rows)
        for n, err in res.convergence:
            conv_rows.append((res.length, n, err))
        checks.extend(res.checks)

    write_csv(
        out_dir / "convergence.csv",
        "length_lambda0,n_modes,relative_error_dimensionless",
        conv_rows,
    )

    # experiment-level thresholds tied to the canonical reference setup
    by_length = {round(r.length, 9): r for r in results}
    if _is_close(cfg.ref_length, 2.0) and 1.0 in by_length:
        checks.append(
            Check(
                "diagonal contrast at half the reference length",
                offdiagonal_ratio(by_length[1.0].p_entries),
                DIAGONAL_CONTRAST_HIGH,
                ">",
            )
        )
    if _is_close(cfg.ref_length, 2.0) and 0.8 in by_length:
        conv = dict(by_length[0.8].convergence)
        if 6 in conv:
            checks.append(
                Check("six-mode convergence at l=0.8", conv[6], CONVERGENCE_SIX_MODE_TOL, "<")
            )

    report = "\n".join(c.line() for c in checks) + "\n"
    (out_dir / "verification.txt").write_text(report, encoding="utf-8")
    return checks


# ---------------------------------------------------------------------------
# reconstruction comparison (direct vs modal vs diagonal shortcut)


RECON_HEADER = (
    "length_lambda0,n_modes,obs_x_lambda0,obs_y_lambda0,obs_z_lambda0,"
    "e_direct_x_re_v_per_m,e_direct_x_im_v_per_m,"
    "e_direct_y_re_v_per_m,e_direct_y_im_v_per_m,"
    "e_direct_z_re_v_per_m,e_direct_z_im_v_per_m,"
    "e_modal_x_re_v_per_m,e_modal_x_im_v_per_m,"
    "e_modal_y_re_v_per_m,e_modal_y_im_v_per_m,"
    "e_modal_z_re_v_per_m,e_modal_z_im_v_per_m,"
    "e_diag_approx_x_re_v_per_m,e_diag_approx_x_im_v_per_m,"
    "e_diag_approx_y_re_v_per_m,e_diag_approx_y_im_v_per_m,"
    "e_diag_approx_z_re_v_per_m,e_diag_approx_z_im_v_per_m,"
    "modal_relative_error_dimensionless,diag_approx_relative_error_dimensionless"
)


def run_reconstruct(
    state: ReferenceState,
    basis: ModalBasis,
    length: float,
    out_dir: Path,
    n_modes: int | None = None,
) -> list[Check]:
    """Three-way field comparison at one length: direct solve, scattering
    through the reference basis, and the diagonal shortcut that pretends the
    trimmed structure shares the reference eigenvalues."""
    cfg = state.config
    if basis.mesh_ref != state.mesh.fingerprint():
        raise ValidationError(
            "modal bundle does not belong to the configured reference structure"
        )
    mesh_l = trim_dipole(state.mesh, length * cfg.wavelength_m)
    z_l = assemble_Z(mesh_l, state.k, state.quad)
    r_ab = cross_radiation(state.mesh, mesh_l, state.k, state.quad)
    u = incident_projection(basis, r_ab)
    p = perturbation_in_foreign_basis(u, z_l, condition_limit=cfg.condition_limit)
    f = scatter(p, state.a)
    basis_l = characteristic_modes(z_l, rank_tol=cfg.rank_tolerance)
    v_l = assemble_V_planewave(mesh_l, state.wave, state.quad)
    i_l = solve_direct(z_l, v_l, condition_limit=cfg.condition_limit)

    n_use = basis.mode_count if n_modes is None else min(n_modes, basis.mode_count)
    rows = []
    errs_modal = []
    errs_diag = []
    for pt_lam, pt_m in zip(cfg.observation_points, cfg.observation_points_m()):
        e_dir = radiated_field(mesh_l, i_l, pt_m, state.k, state.quad).E
        e_mod = reconstruct_field(basis, state.mesh, f, pt_m, n_use, state.quad).E
        e_diag = naive_approx_field(
            basis, state.mesh, basis_l.eigenvalues, state.a, pt_m, n_use, state.quad
        ).E
        norm = np.linalg.norm(e_dir)
        if norm == 0.0:
            raise NumericalError(
                f"direct scattered field vanishes at observation point {pt_lam}"
            )
        err_m = float(np.linalg.norm(e_mod - e_dir) / norm)
        err_d = float(np.linalg.norm(e_diag - e_dir) / norm)
        errs_modal.append(err_m)
        errs_diag.append(err_d)
        rows.append(
            (length, n_use, *pt_lam, *_six(e_dir), *_six(e_mod), *_six(e_diag), err_m, err_d)
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / f"reconstruct_{length:g}.csv", RECON_HEADER, rows)

    checks: list[Check] = []
    if _is_close(length, cfg.ref_length) and n_use == basis.mode_count:
        checks.append(
            Check(
                "reference-length agreement of all three columns",
                max(max(errs_modal), max(errs_diag)),
                1e-6,
                "<",
            )
        )
    if _is_close(cfg.ref_length, 2.0) and _is_close(length, 1.0):
        ratio = min(d / m if m > 0.0 else np.inf for m, d in zip(errs_modal, errs_diag))
        checks.append(Check("diagonal-shortcut penalty at l=1", ratio, 2.0, ">"))
    return checks


# ---------------------------------------------------------------------------
# single-length stage exposure


def run_xform(state: ReferenceState, length: float, out_dir: Path) -> list[Check]:
    """Emit every cross-basis object for one nested length: the coupling
    transform, the perturbation by both routes, and the transported
    scattering matrix."""
    from .xform import scattering_from_perturbation, transform_scattering

    cfg = state.config
    mesh_l = trim_dipole(state.mesh, length * cfg.wavelength_m)
    z_l = assemble_Z(mesh_l, state.k, state.quad)
    basis_l = characteristic_modes(z_l, rank_tol=cfg.rank_tolerance)
    r_ab = cross_radiation(state.mesh, mesh_l, state.k, state.quad)
    q = transform_matrix(state.basis, r_ab, basis_l)
    u = incident_projection(state.basis, r_ab)
    p_direct = perturbation_in_foreign_basis(u, z_l, condition_limit=cfg.condition_limit)
    p_own = perturbation_in_foreign_basis(
        incident_projection(basis_l, cross_radiation(mesh_l, mesh_l, state.k, state.quad)),
        z_l,
        condition_limit=cfg.condition_limit,
    )
    p_transported = transform_perturbation(q, p_own)
    s_transported = transform_scattering(q, scattering_from_perturbation(p_own))

    out_dir.mkdir(parents=True, exist_ok=True)
    tag = f"{length:g}"
    write_matrix_csv(out_dir / f"Q_{tag}.csv", q.entries, "q")
    write_matrix_csv(out_dir / f"P_{tag}.csv", p_direct.entries, "p")
    write_matrix_csv(out_dir / f"P_transported_{tag}.csv", p_transported.entries, "p")
    write_matrix_csv(out_dir / f"S_transported_{tag}.csv", s_transported.entries, "s")

    route_dev = float(
        np.max(np.abs(p_direct.entries - p_transported.entries))
        / np.max(np.abs(p_direct.entries))
    )
    return [
        Check(f"perturbation route equivalence (l={length:g})", route_dev, ROUTE_EQUIVALENCE_TOL, "<")
    ]
