"""valveseg: user-steered two-stage active-contour segmentation of valve
leaflets in volumetric ultrasound-like images."""

__version__ = "0.1.0"

from .annulus import AnnulusDefinition, AnnulusModel, fit_annulus, signed_height
from .errors import (AnnulusFitError, ContourCollapsedError, EmptyProximalSurfaceError,
                     EmptySurfaceError, GeometryError, NrrdFormatError, StageError,
                     ValveSegError)
from .filters import AUTO, SpeedImage, edge_speed, gaussian_smooth, gradient_magnitude
from .levelset import (BLOODPOOL, LEAFLET, ContourParams, LevelSetState, advance,
                       default_params, init_ball, init_shell, reinitialize, to_mask)
from .mesh import PLY_ASCII, STL_BINARY, TriMesh, export_mesh, load_ply, load_stl, marching_cubes
from .metrics import SurfaceDistanceReport, dice, masd
from .nrrd_io import load_mask, load_nrrd, save_nrrd
from .phantom import PhantomSpec, generate_phantom
from .proximal import extract_proximal
from .session import Session, SessionConfig
from .volume import Grid, LabelMask, Volume3D, index_to_world, trilinear_sample, world_to_index
