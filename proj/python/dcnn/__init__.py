"""Doubly convolutional neural networks (C++ core)."""

from fractions import Fraction

from . import _dcnn
from ._dcnn import (
    Arch,
    DcnnError,
    DegenerateError,
    FormatError,
    IoError,
    NumericError,
    ParameterError,
    ParseError,
    ShapeError,
    SpecError,
    analyze_checkpoint,
    avg_max_translation_correlation,
    classify_variant,
    conv2d,
    double_conv,
    evaluate_checkpoint,
    expand_meta_filters,
    gaussian_baseline,
    load_config,
    parse_config,
    parse_network,
    train,
    translation_correlation,
)


def concat_channel_multiplier(meta_size, z):
    return Fraction(*_dcnn.concat_channel_multiplier(meta_size, z))


def relative_params(arch, reference):
    """Filter-parameter ratio of two architectures as an exact Fraction."""
    return Fraction(*arch.relative_params(reference))


__all__ = [name for name in dir() if not name.startswith("_")]
