"""Planar simulator of a soft bimanual upper body running a pressure-switched whole-body grasp."""

__version__ = "0.1.0"
