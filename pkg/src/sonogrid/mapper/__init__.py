"""Consumes store change events and produces the live noise map products."""

from .colors import DEFAULT_STOPS, ColorStop, color_map
from .grid import GridSpec, HeatGrid, IdwParams, haversine_m, idw_interpolate
from .state import NodeRegistry, NodeState
from .service import MapperConfig, MapperService

__all__ = [
    "ColorStop",
    "DEFAULT_STOPS",
    "GridSpec",
    "HeatGrid",
    "IdwParams",
    "MapperConfig",
    "MapperService",
    "NodeRegistry",
    "NodeState",
    "color_map",
    "haversine_m",
    "idw_interpolate",
]
