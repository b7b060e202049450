"""
Exceptions raised by splat_volume.
"""


class SplatVolumeError(Exception):
    """
    Base class for all errors raised by this package.
    """


class ShapeError(SplatVolumeError, ValueError):
    """
    Operand shapes are incompatible.
    """


class GradientError(SplatVolumeError):
    """
    A backward pass or gradient check could not be performed.
    """


class GeometryError(SplatVolumeError, ValueError):
    """
    A camera, ray or grid is degenerate.
    """


class RenderError(SplatVolumeError):
    """
    The rasterizer received invalid primitives or is missing forward state.
    """


class ConfigError(SplatVolumeError, ValueError):
    """
    A configuration value is missing or invalid.
    """


class CheckpointError(SplatVolumeError):
    """
    A checkpoint file is malformed or does not match the requested model.
    """


class DatasetError(SplatVolumeError):
    """
    A dataset directory is missing, malformed or unwritable.
    """


class NonFiniteLossError(SplatVolumeError):
    """
    Training produced a NaN or infinite loss.
    """

    def __init__(self, message, scene_id=None, step=None):
        super().__init__(message)
        self.scene_id = scene_id
        self.step = step


class EmptyMaskError(SplatVolumeError, ValueError):
    """
    A masked metric was asked to average over zero pixels.
    """
