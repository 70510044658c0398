"""Model parameters for the ring market."""

from dataclasses import asdict, dataclass, fields, replace
from enum import Enum


class Scheme(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


class PricePolicy(str, Enum):
    EVOLVING = "evolving"
    BERTRAND_FIXED = "bertrand_fixed"


class OverheadPool(str, Enum):
    SITES = "sites"  # uniform over all seller sites, vacant draw is a no-op
    LIVE = "live"    # uniform over sellers live at the start of the timestep


class ParamError(ValueError):
    """Invalid model parameter; ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


BERTRAND_PRICE = 1.0


@dataclass(frozen=True)
class ModelParams:
    n_sellers: int
    gamma: float
    delta: float
    overhead: float = 2.0
    p_max: float = 2.0
    scheme: Scheme = Scheme.CONTINUOUS
    price_policy: PricePolicy = PricePolicy.EVOLVING
    island_count: int = 1
    coupling: float = 1.0
    memory_length: int = 1
    seed: int = 0
    overhead_pool: OverheadPool = OverheadPool.SITES
    # True lets a site vacated by bankruptcy be refilled in the same timestep;
    # by default it stays empty for one full trading round first.
    immediate_refill: bool = False

    def __post_init__(self):
        # accept plain strings for the enum fields
        for name, enum in (("scheme", Scheme), ("price_policy", PricePolicy),
                           ("overhead_pool", OverheadPool)):
            value = getattr(self, name)
            try:
                object.__setattr__(self, name, enum(value))
            except ValueError:
                allowed = ", ".join(e.value for e in enum)
                raise ParamError(name, f"{value!r} not one of {allowed}") from None
        self.validate()

    def validate(self):
        def _int(name):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ParamError(name, f"must be an integer, got {value!r}")
            return value

        if _int("n_sellers") < 2:
            raise ParamError("n_sellers", "must be at least 2")
        for name in ("gamma", "coupling"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParamError(name, f"must lie in [0, 1], got {value}")
        if not self.delta >= 0.0:
            raise ParamError("delta", f"must be nonnegative, got {self.delta}")
        if not self.overhead > 0.0:
            raise ParamError("overhead", f"must be positive, got {self.overhead}")
        if not self.p_max > 0.0:
            raise ParamError("p_max", f"must be positive, got {self.p_max}")
        if _int("island_count") < 1:
            raise ParamError("island_count", "must be at least 1")
        if self.n_sellers % self.island_count:
            raise ParamError(
                "island_count",
                f"n_sellers={self.n_sellers} is not divisible by {self.island_count}")
        if _int("memory_length") < 1:
            raise ParamError("memory_length", "must be at least 1")
        if not isinstance(self.immediate_refill, bool):
            raise ParamError("immediate_refill", "must be a boolean")
        if not 0 <= _int("seed") < 1 << 64:
            raise ParamError("seed", "must be a 64-bit unsigned integer")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, Enum):
                d[key] = value.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParamError(sorted(unknown)[0], "unknown parameter")
        return cls(**d)
