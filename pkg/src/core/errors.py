"""
求解过程中所有可预期的失败都以这里的异常类型抛出，CLI 在边界统一捕获。
"""


class RecoveryError(Exception):
    """所有求解失败的基类。"""


class InputError(RecoveryError, ValueError):
    """形状不符、含非有限值或参数越界。"""


# linalg
class RankDeficient(RecoveryError):
    pass


class NotPositiveDefinite(RecoveryError):
    pass


# dominance
class Infeasible(RecoveryError):
    pass


class Unbounded(RecoveryError):
    pass


class DegenerateParameters(RecoveryError):
    pass


class NoUnitEigenvalue(RecoveryError):
    pass


class PremiseViolated(RecoveryError):
    pass


# recovery / scenarios
class SingularRegularizer(RecoveryError):
    pass


class InfeasibleConstraint(RecoveryError):
    pass


class IllPosed(RecoveryError):
    pass


class DegenerateModel(RecoveryError):
    pass


# io
class IoFailure(RecoveryError):
    pass


class ProblemFileError(InputError):
    pass


class HashMismatch(RecoveryError):
    pass
