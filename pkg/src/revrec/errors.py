"""Exception types shared across the package.

``DataError`` subclasses signal problems with user-supplied inputs (corpora,
exports, configs, datasets); the CLI maps them to exit code 2. Everything
else deriving from ``RevRecError`` is a contract violation inside a pipeline
and surfaces as an internal error.
"""


class RevRecError(Exception):
    pass


class DataError(RevRecError):
    """Bad input data (malformed file, invalid config, empty export)."""


# corpus
class MalformedLine(DataError):
    pass


class UnknownKind(DataError):
    pass


class MissingField(DataError):
    pass


class OrphanEvent(DataError):
    pass


class DuplicatePublish(DataError):
    pass


class InvalidConfig(DataError):
    pass


class MalformedExport(DataError):
    pass


class EmptyExport(DataError):
    pass


# featurize
class EmptyDataset(DataError):
    pass


# ranker
class DegenerateQuery(RevRecError):
    pass


class InvalidHyperParams(DataError):
    pass


class FeatureMismatch(RevRecError):
    pass


class NoCandidates(RevRecError):
    pass


class EmptyModel(RevRecError):
    pass


# policy
class OutOfRange(RevRecError):
    pass


class EmptyList(RevRecError):
    pass


# evaluate
class EmptyInput(RevRecError):
    pass


class EmptySplit(DataError):
    pass


class MismatchedEvalSets(DataError):
    pass


class NoTerminalEvent(RevRecError):
    pass


# store
class StaleEvent(RevRecError):
    pass


class TooFewRequests(RevRecError):
    pass
