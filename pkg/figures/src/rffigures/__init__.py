"""Static figure replicas rendered from the theory/simulation CSVs."""

from .panels import ALL_PANELS
from .render import SchemaMismatch, load_spec, render

__version__ = "0.1.0"
