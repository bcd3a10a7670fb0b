from typing import Optional

INPUT_ERROR = 2
ACCEPTANCE_MISMATCH = 1


class CadEvalError(Exception):
    """Base exception for evaluation errors."""

    exit_code = INPUT_ERROR


class LocatedError(CadEvalError):
    """Error raised at a known position of an input text."""

    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[int] = None
    ):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            message = f"{message} ({where})"
        super().__init__(message)


# Geometry
class EmptyMesh(CadEvalError):
    pass


class InvalidMesh(CadEvalError):
    pass


class NonWatertight(CadEvalError):
    pass


class ZeroVolume(CadEvalError):
    pass


# STL
class StlError(CadEvalError):
    pass


class Truncated(StlError):
    pass


class Malformed(StlError, LocatedError):
    pass


class EmptyStl(StlError):
    pass


# OpenSCAD subset
class ScadError(LocatedError):
    pass


class ScadSyntaxError(ScadError):
    pass


class UnsupportedConstruct(ScadError):
    pass


class UndefinedModule(ScadError):
    pass


class RecursiveModule(ScadError):
    pass


class EmptySolid(CadEvalError):
    pass


class NonManifoldSolid(CadEvalError):
    pass


# Metrics
class EmptyCloud(CadEvalError):
    pass


class DegenerateCloud(CadEvalError):
    pass


class DegenerateTruthBox(CadEvalError):
    pass


class ZeroTruthVolume(CadEvalError):
    pass


class ZeroTruthArea(CadEvalError):
    pass


# Reports
class DuplicateLabel(CadEvalError):
    pass


class MissingInput(CadEvalError):
    pass


class UnsupportedInput(CadEvalError):
    pass


class AcceptanceMismatch(CadEvalError):
    """Reproduced values differ from the expected table values."""

    exit_code = ACCEPTANCE_MISMATCH
