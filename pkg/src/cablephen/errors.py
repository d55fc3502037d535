"""Exception hierarchy shared by every stage of the pipeline."""


class CablephenError(Exception):
    """Base class for all package errors."""


class ConfigError(CablephenError, ValueError):
    """Invalid or missing configuration."""


class KinematicsError(CablephenError):
    """A pose cannot be realized by the robot."""


class UnreachableError(KinematicsError):
    """Target lies outside the arm's reach annulus or dexterous set."""


class JointLimitError(KinematicsError):
    """Both IK branches violate joint limits."""


class WorkspaceError(KinematicsError):
    """Platform position outside the CDPR workspace."""


class DegenerateStatisticsError(CablephenError, ValueError):
    """Statistical routine received degenerate data."""


class InsufficientPointsError(CablephenError, ValueError):
    """Too few points survive to build a surface."""


class ModelDomainError(CablephenError, ValueError):
    """Evaluation outside the occlusion model's domain."""
