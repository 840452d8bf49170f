"""State estimation across geometries with transported reduced models and PBDW."""
from .errors import ShapePBDWError
from .mesh import GeometryDescriptor, Mesh, generate_mesh

__version__ = "0.1.0"

__all__ = ["GeometryDescriptor", "Mesh", "ShapePBDWError", "generate_mesh", "__version__"]
