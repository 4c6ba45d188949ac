"""Multi-domain image translation with feature switching and continuous
attribute-intensity control."""

from .attributes import (AttributeSchema, IntensityVector, LabelMode, LabelVector,
                         effective_gate, sample_target_labels, validate_label)
from .switching import FeatureBank, feature_switch, feature_switch_grad_check

__version__ = "0.1.0"

__all__ = [
    "AttributeSchema", "IntensityVector", "LabelMode", "LabelVector",
    "effective_gate", "sample_target_labels", "validate_label",
    "FeatureBank", "feature_switch", "feature_switch_grad_check",
    "__version__",
]
