from .render import MissingPreset, PlotSpec, PresetStyle, SchemaMismatch, render

__all__ = ["PlotSpec", "PresetStyle", "render", "SchemaMismatch", "MissingPreset"]
