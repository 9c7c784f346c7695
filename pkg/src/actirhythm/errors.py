"""Exception hierarchy.

DataError subclasses indicate problems with user-supplied data and map to
exit code 2 in the CLI; UsageError maps to exit code 1; anything else is an
internal error (exit 3).
"""


class ActirhythmError(Exception):
    pass


class UsageError(ActirhythmError):
    pass


class DataError(ActirhythmError):
    pass


# ingest
class MalformedRow(DataError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class NonMonotonicTime(DataError):
    pass


class IrregularEpoch(DataError):
    pass


class NegativeCount(DataError):
    pass


class IncompatibleEpoch(DataError):
    pass


class DuplicateSubject(DataError):
    pass


class UnknownGroup(DataError):
    pass


class InvalidSpec(DataError):
    pass


# preprocess
class NotMinuteEpoch(DataError):
    pass


class InsufficientData(DataError):
    pass


# features
class IncompleteDays(DataError):
    pass


class BothZero(DataError):
    pass


class TooShort(DataError):
    pass


# nls
class RankDeficient(ActirhythmError):
    pass


class NonFiniteResidual(ActirhythmError):
    pass


class SingularNormalMatrix(ActirhythmError):
    pass


# cosinor
class InsufficientSpan(DataError):
    pass


# report
class MisalignedSeries(DataError):
    pass
