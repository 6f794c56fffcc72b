"""Offline figure rendering for gondola-gnc CSV traces."""

from .plots import PlotSpec, SchemaMismatchError, plot

__all__ = ["PlotSpec", "SchemaMismatchError", "plot"]
