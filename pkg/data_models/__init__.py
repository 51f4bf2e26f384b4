from .base import FrozenModel
from .kinetic_system import Cylinder, KineticPoint, LayoutConfig, SystemSpec
from .control_basis import ControlBasis
from .trajectory import AffineMap, RadiusEstimate, SlopeFit, TrajectoryBundle
from .grid_field import BoundaryPolicy, GridConfig, GridField, PathEnsemble
from .reports import EnsembleResult, EnsembleSummary, PoincareReport, RunManifest
