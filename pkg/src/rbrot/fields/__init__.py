from .grid import FACES, GridSpec
from .operators import (
    ScalarField,
    VectorField,
    boundary_data,
    boundary_normal_flux,
    component_laplacian,
    dirichlet_lift,
    divergence,
    domain_average,
    face_weights,
    gradient,
    harmonic_extension,
    laplacian,
    norms,
    vector_laplacian,
    velocity_kinds,
    vertical_average,
)
from .poisson import SeparableOperator, SolveInfo, pcg
from .snapshot import read_snapshot, write_slice_csv, write_snapshot

__all__ = [
    "FACES", "GridSpec", "ScalarField", "VectorField", "boundary_data", "boundary_normal_flux",
    "component_laplacian", "dirichlet_lift", "divergence", "domain_average", "face_weights",
    "gradient", "harmonic_extension", "laplacian", "norms", "vector_laplacian", "velocity_kinds",
    "vertical_average", "SeparableOperator", "SolveInfo", "pcg", "read_snapshot",
    "write_slice_csv", "write_snapshot",
]
