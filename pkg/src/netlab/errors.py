"""Exception taxonomy shared across the lab.

Every error carries a stable machine-readable ``code`` so the CLI and the
HTTP service can surface it without string matching.
"""


class LabError(Exception):
    """Base class; ``code`` is a stable snake_case identifier."""

    code = "error"

    def __init__(self, message: str = "", **context):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.context = context


# engine
class PastTime(LabError):
    code = "past_time"


class ZeroBound(LabError):
    code = "zero_bound"


# topology
class DuplicateName(LabError):
    code = "duplicate_name"


class DuplicateIp(LabError):
    code = "duplicate_ip"


class UnknownNode(LabError):
    code = "unknown_node"


class UnknownSegment(LabError):
    code = "unknown_segment"


class PoweredOff(LabError):
    code = "powered_off"


class Detached(LabError):
    code = "detached"


class OutOfRange(LabError):
    code = "out_of_range"


# address resolution
class OffSubnet(LabError):
    code = "off_subnet"


class AlreadyConfigured(LabError):
    code = "already_configured"


# link / circuit state machines
class BadState(LabError):
    code = "bad_state"


class NotPointToPoint(LabError):
    code = "not_point_to_point"


class NoFreeLci(LabError):
    code = "no_free_lci"


class LinkDown(LabError):
    code = "link_down"


class UnknownLci(LabError):
    code = "unknown_lci"


class BadCircuitState(LabError):
    code = "bad_circuit_state"


# algorithms
class DuplicateKey(LabError):
    code = "duplicate_key"


class KeyNotFound(LabError):
    code = "key_not_found"


class EmptyHeap(LabError):
    code = "empty_heap"


class CycleDetected(LabError):
    code = "cycle_detected"

    def __init__(self, witness):
        super().__init__("graph contains a cycle", witness=sorted(witness))
        self.witness = set(witness)


class NegativeWeight(LabError):
    code = "negative_weight"


# scenario / service
class ScenarioSyntaxError(LabError):
    code = "syntax_error"


class ValidationError(LabError):
    """Scenario validation failure with a JSON-path-ish location."""

    def __init__(self, code: str, message: str, path: str = ""):
        super().__init__(message, path=path)
        self.code = code
        self.path = path


class UnknownRef(LabError):
    code = "unknown_ref"


class UnknownSession(LabError):
    code = "unknown_session"


class SeqTooOld(LabError):
    code = "seq_too_old"
