"""Exceptions raised by the simulator.

Runtime failures derive from SimulationError, config problems from
ConfigError. The runner maps them to exit codes 3 and 2.
"""


class SimulationError(Exception):
    pass


class ChainTooLong(SimulationError):
    pass


class ZeroPostSelection(SimulationError):
    pass


class OrthogonalPostSelection(SimulationError):
    pass


class AllIdentity(SimulationError):
    pass


class ZeroStrength(SimulationError):
    pass


class NoPhysicalRoot(SimulationError):
    pass


class MissingSetting(SimulationError):
    pass


class FitDiverged(SimulationError):
    pass


class NoPassEvents(SimulationError):
    pass


class NotAWaveplate(SimulationError):
    pass


class InvalidLayout(SimulationError):
    pass


class UnsupportedExtraction(SimulationError):
    pass


class ConfigError(Exception):
    pass


class ParseError(ConfigError):

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ''
        super().__init__(prefix + message)


class ValidationError(ConfigError):

    def __init__(self, message, constraint=None):
        self.constraint = constraint
        super().__init__(message if constraint is None else f"{message} (constraint: {constraint})")
