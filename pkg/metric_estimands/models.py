import enum


class StrategyKind(str, enum.Enum):
    CUMULATIVE = "cumulative"
    WINDOWED = "windowed"
    CUMULATIVE_WINDOWED = "cumulative_windowed"


class Sidedness(str, enum.Enum):
    ONE = "one"
    TWO = "two"


class VarianceMode(str, enum.Enum):
    KNOWN = "known"
    ESTIMATED = "estimated"


class ZConvention(str, enum.Enum):
    STANDARD_DEVIATION = "standard_deviation"
    VARIANCE = "variance"
