"""Characteristic modes of thin-wire structures, and the machinery to express
one structure's scattering in another structure's modal basis.

The pieces, in dependency order: `geometry` (polylines, meshes, nesting),
`kernel` (wavenumber, quadrature, reduced thin-wire Green function), `mom`
(impedance assembly and the direct solve), `modes` (the characteristic
eigenproblem and bundle persistence), `xform` (cross-structure coupling,
perturbation and scattering transport), `fields` (near/far field evaluation
and modal reconstruction), and the config/pipeline/cli harness around them.
"""

from .config import ExperimentConfig, load_config
from .errors import (
    BundleFormatError,
    NumericalError,
    SingularKernelError,
    ValidationError,
)
from .fields import (
    FarFieldSample,
    FieldSample,
    ModalCoefficients,
    convergence_curve,
    distance_to_wire,
    far_field_of_current,
    modal_excitation,
    mode_fields,
    naive_approx_field,
    near_field_of_current,
    radiated_field,
    reconstruct_field,
    scatter,
    standing_wave_field,
    two_mode_null_ratio,
)
from .geometry import NestingMap, WireMesh, WirePolyline, make_dipole, nest, trim_dipole
from .kernel import (
    C0,
    ETA0,
    QuadratureSpec,
    SingularScheme,
    Wavenumber,
    scalar_green,
    thin_wire_kernel,
)
from .modes import (
    ModalBasis,
    characteristic_modes,
    diag_perturbation,
    load_bundle,
    save_bundle,
)
from .mom import (
    CurrentVector,
    ExcitationVector,
    ImpedanceMatrix,
    PlaneWave,
    assemble_V_planewave,
    assemble_Z,
    assemble_cross_Z,
    make_plane_wave,
    solve_direct,
)
from .pipeline import ReferenceState, build_reference, run_reconstruct, run_sweep, run_xform
from .xform import (
    CrossRadiationMatrix,
    IncidentProjection,
    PerturbationMatrix,
    ScatteringMatrix,
    TransformMatrix,
    cross_radiation,
    export_matrix_csv,
    incident_projection,
    offdiagonal_ratio,
    perturbation_in_foreign_basis,
    scattering_from_perturbation,
    transform_matrix,
    transform_perturbation,
    transform_scattering,
)

__version__ = "0.1.0"
