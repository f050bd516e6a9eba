"""Exception taxonomy.

Every error carries a stable ``code`` string; the CLI serializes it into the
JSON diagnostic it writes to stderr.
"""

from __future__ import annotations


class ProdFreqError(Exception):
    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": self.message}
        if self.details:
            out["details"] = self.details
        return out


class FormatError(ProdFreqError):
    code = "format_error"


class EmptyLogError(ProdFreqError):
    code = "empty_log"


class DegenerateLogError(ProdFreqError):
    code = "degenerate_log"


class UnknownActivityError(ProdFreqError):
    code = "unknown_activity"


class UnknownSelectorError(ProdFreqError):
    code = "unknown_selector"


class ResolutionError(ProdFreqError):
    code = "resolution_error"


class DomainError(ProdFreqError):
    code = "domain_error"


class GeneratorSpecError(ProdFreqError):
    code = "spec_error"


class InsufficientDataError(ProdFreqError):
    code = "insufficient_data"


class UnidentifiableAlphaError(ProdFreqError):
    code = "unidentifiable_alpha"

    def __init__(self, message: str, ln_A: float, **details):
        super().__init__(message, ln_A=ln_A, **details)
        self.ln_A = ln_A


class WeightError(ProdFreqError):
    code = "weight_error"


class UndefinedMetricError(ProdFreqError):
    code = "undefined_metric"


class ParameterError(ProdFreqError):
    code = "parameter_error"


class DegeneratePolynomialError(ProdFreqError):
    code = "degenerate_polynomial"


class NoResonanceError(ProdFreqError):
    code = "no_resonance"


class ConversionError(ProdFreqError):
    code = "conversion_error"


class UndefinedImprovementError(ProdFreqError):
    code = "undefined_improvement"


class PairingError(ProdFreqError):
    code = "pairing_error"


class TopologyError(ProdFreqError):
    code = "topology_error"


class SchemaError(ProdFreqError):
    code = "schema_error"


class InputError(ProdFreqError):
    code = "input_error"


class UnitError(ProdFreqError):
    code = "unit_error"
