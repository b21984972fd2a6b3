"""Monte Carlo checks of log-Sobolev inequalities on path space of reflecting diffusions."""
from .errors import ConfigurationError, DomainError, PreconditionError
from .geometry import (Ball, CurvatureBounds, HalfLine, HalfSpace, HyperbolicPlane,
                       ManifoldModel, Sphere, make_model)
from .sampler import PathBatch, PathGrid, PathSample, SamplerConfig, simulate_ensemble, simulate_path
from .damped import CylinderPointwise, damped_gradient, malliavin_gradient, q_evolve
from .inequality import EstimateWithError, InequalityReport, verify_lsi, verify_poincare
from .heat import CylinderIntegral, verify_heat_lsi

__version__ = "0.1.0"
