"""Exception types shared across goalcast."""


class GoalcastError(Exception):
    """Base class for all library errors."""


class MalformedRow(GoalcastError):
    def __init__(self, line_no, reason):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class DuplicateFixture(GoalcastError):
    pass


class UnknownTeam(GoalcastError):
    pass


class InsufficientGames(GoalcastError):
    pass


class EmptySeason(GoalcastError):
    pass


class NonPositiveLambda(GoalcastError):
    pass


class SingularDesign(GoalcastError):
    pass


class NonFiniteLoss(GoalcastError):
    pass


class FeatureDimensionMismatch(GoalcastError):
    pass


class ClassOutOfRange(GoalcastError):
    pass


class ZeroProbability(GoalcastError):
    pass


class TooFewSeasons(GoalcastError):
    pass


class InvalidConfig(GoalcastError):
    pass


class FoldFailed(GoalcastError):
    def __init__(self, fold_id, cause):
        self.fold_id = fold_id
        self.cause = cause
        super().__init__(f"fold {fold_id} failed: {cause!r}")
