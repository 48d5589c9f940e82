"""Behavioural archetypes, their attitudes, and message-value calibration."""

from .attitudes import (
    ATTITUDES, CUES, MESSAGES, STIMULI, AttitudeMatrix, AttitudeProfile, assign_attitudes,
    read_attitudes_csv,
)
from .calibration import CalibrationTargets, calibrate, verify_response_rates
from .matrix import (
    ARCHETYPES, BEHAVIOUR_ARCHETYPES, ProbabilityMatrix, Signature, assign_archetypes,
    load_probability_matrix,
)

__all__ = [
    "ARCHETYPES", "ATTITUDES", "BEHAVIOUR_ARCHETYPES", "CUES", "MESSAGES", "STIMULI",
    "AttitudeMatrix", "AttitudeProfile", "CalibrationTargets", "ProbabilityMatrix", "Signature",
    "assign_archetypes", "assign_attitudes", "calibrate", "load_probability_matrix",
    "read_attitudes_csv", "verify_response_rates",
]
