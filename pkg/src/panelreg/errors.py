"""Exception types raised across the package.

Everything derives from :class:`PanelError` so callers (the CLI in
particular) can separate data problems from programming errors.
"""


class PanelError(Exception):
    """Base class for all recoverable errors raised by panelreg."""


class DataError(PanelError):
    """Input data cannot be used as given."""


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing column: {name}")
        self.name = name


class ParseError(DataError):
    def __init__(self, row, column, value=None, reason="not a finite non-negative decimal"):
        msg = f"row {row}, column {column}: {reason}"
        if value is not None:
            msg += f" (got {value!r})"
        super().__init__(msg)
        self.row = row
        self.column = column
        self.value = value


class EmptyDataset(DataError):
    def __init__(self, msg="dataset has no records"):
        super().__init__(msg)


class InvalidBounds(DataError):
    def __init__(self, analyte, low, high):
        super().__init__(f"invalid bounds for {analyte}: min {low} >= max {high}")
        self.analyte = analyte


class NotPositiveSemidefinite(DataError):
    pass


class KTooLarge(DataError):
    def __init__(self, k, n, what="records"):
        super().__init__(f"k={k} exceeds the number of {what} ({n})")
        self.k = k
        self.n = n


class DatasetTooSmall(DataError):
    def __init__(self, n, needed):
        super().__init__(f"dataset has {n} records, need at least {needed}")
        self.n = n
        self.needed = needed


class DegenerateTarget(DataError):
    def __init__(self):
        super().__init__("all actual values are equal; relative error is undefined")


class ZeroVariance(DataError):
    def __init__(self, which):
        super().__init__(f"input {which!r} has zero variance; correlation is undefined")
        self.which = which


class AllFeaturesConstant(DataError):
    def __init__(self):
        super().__init__("every feature is constant; no regression is possible")


class InsufficientPoints(DataError):
    def __init__(self, name, have, needed):
        super().__init__(f"point set {name!r} has {have} points, need at least {needed}")
        self.name = name
        self.have = have
        self.needed = needed


class DivergedLoss(PanelError):
    def __init__(self, epoch, loss):
        super().__init__(f"training loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch


class EmptyMemberSet(PanelError):
    def __init__(self):
        super().__init__("ensemble has no members")


class PredictionOutOfBins(PanelError):
    def __init__(self, value, low, high):
        super().__init__(f"prediction {value} outside bin range [{low}, {high}]")
        self.value = value


class BagFitError(PanelError):
    def __init__(self, bag, cause):
        super().__init__(f"bag {bag}: {cause}")
        self.bag = bag


class UnknownLearner(PanelError):
    def __init__(self, name, valid):
        super().__init__(f"unknown learner {name!r}; valid names: {', '.join(valid)}")
        self.name = name
        self.valid = list(valid)
