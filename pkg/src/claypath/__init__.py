"""claypath: toolpath compilation, motion planning, simulation and
streaming for robotic extrusion 3D printing in clay."""

__version__ = "0.1.0"
