"""Exception types raised across the package."""


class GraphFlowError(Exception):
    """Base class for all graphflow errors."""


class IndexOutOfRange(GraphFlowError):
    pass


class SelfLoop(GraphFlowError):
    pass


class NonPositiveWeight(GraphFlowError):
    pass


class EmptyGraph(GraphFlowError):
    pass


class FileError(GraphFlowError):
    pass


class AsymmetricInput(GraphFlowError):
    pass


class IsolatedNode(GraphFlowError):
    pass


class ZeroMatrix(GraphFlowError):
    pass


class DimensionMismatch(GraphFlowError):
    pass


class ShapeMismatch(GraphFlowError):
    pass


class SingularSystem(GraphFlowError):
    pass


class SizeLimit(GraphFlowError):
    pass


class UnsupportedProblem(GraphFlowError):
    pass


class DegenerateCloud(GraphFlowError):
    pass


class NoCachedForward(GraphFlowError):
    pass


class NotPSD(GraphFlowError):
    pass


class InsufficientSamples(GraphFlowError):
    pass


class UninitializedState(GraphFlowError):
    pass


class NonFiniteLoss(GraphFlowError):
    pass


class ThresholdNotReached(GraphFlowError):
    pass


class ParseError(GraphFlowError):
    pass


class ValidationError(GraphFlowError):
    pass
