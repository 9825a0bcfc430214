"""Geodesic distances on flag manifolds, with Grassmann baselines and MDS."""

from flaggeo.dataio import DataMatrix, ExperimentSpec, center, load_csv, save_csv, svd_flag
from flaggeo.embedding import DistanceMatrix, MdsResult, classical_mds, pairwise_distances
from flaggeo.errors import (
    DegenerateSpectrum,
    FlagGeoError,
    InvalidInput,
    LogNearCutLocus,
    NoConvergedTrial,
    NotApplicable,
    ParseError,
    RankDeficient,
    RankTooLow,
)
from flaggeo.flag import (
    FlagPoint,
    FlagSignature,
    GeodesicSolution,
    HorizontalTangent,
    SolverConfig,
    VerticalTangent,
    enumerate_representatives,
    fast_flag_distance,
    flag_distance,
    flag_exp,
    geodesic_length,
    iterative_log,
    project_horizontal,
    project_vertical,
    reduce_2k,
)
from flaggeo.grassmann import GrassmannPoint, grassmann_distance, principal_angles
from flaggeo.matfun import expm_skew, logm_so, qr_thin, svd_compact

__version__ = "0.1.0"
