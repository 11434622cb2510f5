"""Exception hierarchy shared by every stage."""


class SysoptError(Exception):
    """Base class; ``stage`` names the pipeline stage that raised, when known."""

    stage = None


class UnreadableSource(SysoptError):
    pass


class NoSourcesFound(SysoptError):
    pass


class ConfigError(SysoptError):
    pass


class EmptyCatalog(ConfigError):
    pass


class InconsistentInputs(SysoptError):
    pass


class NotApplicable(SysoptError):
    pass


class StaleEvidence(SysoptError):
    pass


class ParseFailureAfterPatch(SysoptError):
    pass


class FingerprintMismatch(SysoptError):
    pass


class PatchConflict(SysoptError):
    pass


class RemoteTimeout(SysoptError):
    pass


class RemoteProtocolError(SysoptError):
    pass


class CommandNotFound(SysoptError):
    pass


class EmptyBenchmarkFile(SysoptError):
    pass


class UnrecognizedHeader(SysoptError):
    pass


class NoSuccessfulSamples(SysoptError):
    pass


class SchemaVersionMismatch(SysoptError):
    pass


class CorruptState(SysoptError):
    pass


class PipelineLocked(SysoptError):
    pass
