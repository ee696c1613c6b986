"""Domain types and bundle arithmetic shared by every other module.

A market consists of resource pools (one tradable cluster x resource-type
aggregate each) and users who submit XOR bids: a set of signed bundle
vectors of which they want at most one, plus a scalar willingness to pay
(positive, buyers) or minimum acceptable receipt (negative, sellers).

All types are immutable values after construction and all operations are
pure functions, so everything here is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping


class MarketError(Exception):
    """Base class for all domain errors raised by this package."""


class ValidationError(MarketError):
    """A value violates a type invariant at construction time."""


class BudgetExceededError(ValidationError):
    """A bid's willingness to pay exceeds the user's stated budget."""


class UnknownPoolError(MarketError):
    """A bundle or bid references a pool that is not priced / not known."""

    def __init__(self, pool_id: str, context: str = "") -> None:
        detail = f"unknown pool {pool_id!r}"
        if context:
            detail += f" ({context})"
        super().__init__(detail)
        self.pool_id = pool_id


class DuplicatePoolError(MarketError):
    """Two pools in the same market share an id."""


class BidderClass(str, Enum):
    """Sign classification of a bid's bundle set.

    Convergence of the clock auction is only guaranteed for markets made
    of pure buyers and pure sellers; traders may cycle.
    """

    PURE_BUYER = "pure-buyer"
    PURE_SELLER = "pure-seller"
    TRADER = "trader"


class IncrementMode(str, Enum):
    """How the per-round price increment is capped.

    FRACTIONAL_CAP limits each price to rise by at most a fraction delta
    of its current value; ABSOLUTE_CAP limits the rise to delta currency
    units regardless of the current price.
    """

    FRACTIONAL_CAP = "fractional-cap"
    ABSOLUTE_CAP = "absolute-cap"


class AuctionStatus(str, Enum):
    """Terminal state of a clock auction run."""

    CONVERGED = "converged"
    ROUND_LIMIT = "round-limit"
    PRICE_CEILING = "price-ceiling"


@dataclass(frozen=True)
class ResourcePool:
    """One tradable pool: a single resource dimension in a single cluster.

    Attributes:
        id: unique identifier within a market.
        cluster: cluster label, e.g. "cluster-a".
        resource_kind: resource dimension label, e.g. "cpu" / "ram" / "disk".
        unit: measurement unit label, e.g. "cores".
        cost: base cost in currency units per resource unit (>= 0).
        utilization: pre-auction utilization in [0, 1].
    """

    id: str
    cluster: str
    resource_kind: str
    unit: str
    cost: float
    utilization: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("pool id must be nonempty")
        if not math.isfinite(self.cost) or self.cost < 0:
            raise ValidationError(f"pool {self.id}: cost must be >= 0, got {self.cost}")
        if not math.isfinite(self.utilization) or not 0.0 <= self.utilization <= 1.0:
            raise ValidationError(
                f"pool {self.id}: utilization must be in [0, 1], got {self.utilization}"
            )


def _frozen_quantities(raw: Mapping[str, float]) -> Mapping[str, float]:
    """Normalize a sparse quantity map: coerce to float, drop exact zeros."""
    cleaned: dict[str, float] = {}
    for pool_id, qty in raw.items():
        q = float(qty)
        if not math.isfinite(q):
            raise ValidationError(f"quantity for pool {pool_id!r} must be finite")
        if q != 0.0:
            cleaned[pool_id] = q
    return MappingProxyType(cleaned)


@dataclass(frozen=True, eq=False)
class BundleVector:
    """A signed, sparse quantity vector over pools.

    Positive components are demanded quantities, negative components are
    offered quantities. Pools absent from the map are implicitly zero;
    explicit zeros are dropped at construction so equality is the
    mathematical vector equality.
    """

    quantities: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "quantities", _frozen_quantities(self.quantities))

    @classmethod
    def zero(cls) -> BundleVector:
        return cls({})

    def get(self, pool_id: str) -> float:
        return self.quantities.get(pool_id, 0.0)

    @property
    def pool_ids(self) -> frozenset[str]:
        return frozenset(self.quantities)

    @property
    def is_zero(self) -> bool:
        return not self.quantities

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BundleVector):
            return NotImplemented
        return dict(self.quantities) == dict(other.quantities)

    def __hash__(self) -> int:
        return hash(frozenset(self.quantities.items()))

    def __repr__(self) -> str:  # compact: BundleVector({'a': 2.0})
        return f"BundleVector({dict(sorted(self.quantities.items()))!r})"


@dataclass(frozen=True)
class Bid:
    """One user's XOR bid: alternative bundles plus a scalar willingness.

    The user wants exactly one of ``bundles`` (or nothing). ``willingness``
    is the maximum total payment if positive, or the minimum acceptable
    total receipt if negative (sign convention: a seller states e.g. -200
    meaning "pay me at least 200"). The optional ``budget`` caps positive
    willingness at submission time.
    """

    user_id: str
    bundles: tuple[BundleVector, ...]
    willingness: float
    budget: float | None = None

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ValidationError("bid user_id must be nonempty")
        bundles = tuple(self.bundles)
        object.__setattr__(self, "bundles", bundles)
        if not bundles:
            raise ValidationError(f"bid {self.user_id}: bundle list must be nonempty")
        for i, bundle in enumerate(bundles):
            if not isinstance(bundle, BundleVector):
                raise ValidationError(f"bid {self.user_id}: bundles[{i}] is not a BundleVector")
            if bundle.is_zero:
                raise ValidationError(f"bid {self.user_id}: bundles[{i}] is the all-zero vector")
        if not math.isfinite(self.willingness):
            raise ValidationError(f"bid {self.user_id}: willingness must be finite")
        if self.budget is not None:
            if not math.isfinite(self.budget) or self.budget < 0:
                raise ValidationError(f"bid {self.user_id}: budget must be >= 0")
            if self.willingness > 0 and self.willingness > self.budget:
                raise BudgetExceededError(
                    f"bid {self.user_id}: willingness {self.willingness} exceeds "
                    f"budget {self.budget}"
                )

    @property
    def referenced_pools(self) -> frozenset[str]:
        pools: set[str] = set()
        for bundle in self.bundles:
            pools.update(bundle.quantities)
        return frozenset(pools)


@dataclass(frozen=True, eq=False)
class PriceVector:
    """Per-pool uniform unit prices; the state of the price clock."""

    prices: Mapping[str, float]

    def __post_init__(self) -> None:
        cleaned: dict[str, float] = {}
        for pool_id, price in self.prices.items():
            p = float(price)
            if not math.isfinite(p) or p < 0.0:
                raise ValidationError(f"price for pool {pool_id!r} must be >= 0, got {price}")
            cleaned[pool_id] = p + 0.0  # normalize -0.0
        object.__setattr__(self, "prices", MappingProxyType(cleaned))

    def get(self, pool_id: str) -> float:
        try:
            return self.prices[pool_id]
        except KeyError:
            raise UnknownPoolError(pool_id, "not priced") from None

    def covers(self, pool_ids: Iterable[str]) -> bool:
        return all(pool_id in self.prices for pool_id in pool_ids)

    def bumped(self, increments: Mapping[str, float]) -> PriceVector:
        """A new vector with the given nonnegative increments applied."""
        updated = dict(self.prices)
        for pool_id, inc in increments.items():
            if inc < 0:
                raise ValidationError(f"price increment for {pool_id!r} must be >= 0")
            if inc:
                updated[pool_id] = updated.get(pool_id, 0.0) + inc
        return PriceVector(updated)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PriceVector):
            return NotImplemented
        return dict(self.prices) == dict(other.prices)

    def __hash__(self) -> int:
        return hash(frozenset(self.prices.items()))

    def __repr__(self) -> str:
        return f"PriceVector({dict(sorted(self.prices.items()))!r})"


@dataclass(frozen=True)
class ReserveCurve:
    """Parameters of the utilization weighting curve used for reserves.

    The curve maps pre-auction utilization to a multiplier on a pool's
    base cost: above ``psi_star`` the multiplier exceeds 1 (congested
    pools start expensive), below it the multiplier is at most 1. ``k``
    fixes the full-to-empty price ratio, ``m`` controls how sharply the
    multiplier accelerates at high utilization.
    """

    k: float = 10.0
    m: float = 2.0
    psi_star: float = 0.6

    def __post_init__(self) -> None:
        if not math.isfinite(self.k) or self.k <= 1.0:
            raise ValidationError(f"reserve curve: k must be > 1, got {self.k}")
        if not math.isfinite(self.m) or self.m <= 1.0:
            raise ValidationError(f"reserve curve: m must be > 1, got {self.m}")
        if not math.isfinite(self.psi_star) or not 0.0 < self.psi_star < 1.0:
            raise ValidationError(
                f"reserve curve: psi_star must be in (0, 1), got {self.psi_star}"
            )


@dataclass(frozen=True)
class MarketConfig:
    """Auction parameters for one market run.

    Attributes:
        alpha: excess-demand multiplier of the price update rule (> 0).
        delta: per-round increment cap; a fraction of the current price in
            fractional-cap mode, an absolute amount in absolute-cap mode.
        increment_mode: which cap interpretation to use.
        normalize_increments: scale each pool's effective alpha by its
            reserve price relative to the dearest pool, so cheap resources
            do not outrun expensive ones.
        max_rounds: hard guard against non-converging (trader) markets.
        price_ceiling: optional upper bound vector; the run aborts rather
            than exceed it.
        reserve_curve: utilization weighting parameters for reserve prices.
    """

    alpha: float = 1.0
    delta: float = 0.1
    increment_mode: IncrementMode = IncrementMode.FRACTIONAL_CAP
    normalize_increments: bool = False
    max_rounds: int = 10_000
    price_ceiling: PriceVector | None = None
    reserve_curve: ReserveCurve = field(default_factory=ReserveCurve)

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "increment_mode", IncrementMode(self.increment_mode))
        except ValueError:
            raise ValidationError(f"unknown increment mode {self.increment_mode!r}") from None
        if not math.isfinite(self.alpha) or self.alpha <= 0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")
        if not math.isfinite(self.delta) or self.delta <= 0:
            raise ValidationError(f"delta must be > 0, got {self.delta}")
        if self.increment_mode == IncrementMode.FRACTIONAL_CAP and not self.delta < 1.0:
            raise ValidationError(
                f"delta must be in (0, 1) in fractional-cap mode, got {self.delta}"
            )
        if self.max_rounds < 1:
            raise ValidationError(f"max_rounds must be >= 1, got {self.max_rounds}")


@dataclass(frozen=True)
class TrajectoryPoint:
    """One recorded clock round: prices evaluated and resulting excess demand."""

    round: int
    prices: PriceVector
    excess_demand: BundleVector


@dataclass(frozen=True)
class AuctionOutcome:
    """Result of one clock auction run.

    Winners received exactly one bundle from their XOR set; losers
    received nothing. On guard statuses (round-limit, price-ceiling) no
    allocation is made and the trajectory's tail is kept for diagnosis.
    """

    final_prices: PriceVector
    allocations: Mapping[str, BundleVector]
    winners: frozenset[str]
    losers: frozenset[str]
    rounds: int
    trajectory: tuple[TrajectoryPoint, ...]
    status: AuctionStatus

    def __post_init__(self) -> None:
        object.__setattr__(self, "allocations", MappingProxyType(dict(self.allocations)))
        object.__setattr__(self, "winners", frozenset(self.winners))
        object.__setattr__(self, "losers", frozenset(self.losers))
        object.__setattr__(self, "trajectory", tuple(self.trajectory))
        if self.winners & self.losers:
            raise ValidationError("winners and losers must be disjoint")
        for user_id, allocation in self.allocations.items():
            if user_id in self.losers and not allocation.is_zero:
                raise ValidationError(f"loser {user_id} has a nonzero allocation")
            if user_id in self.winners and allocation.is_zero:
                raise ValidationError(f"winner {user_id} has a zero allocation")

    def allocation_for(self, user_id: str) -> BundleVector:
        return self.allocations.get(user_id, BundleVector.zero())


def classify_bidder(bid: Bid) -> BidderClass:
    """Classify a bid as pure buyer, pure seller, or trader.

    A pure buyer's bundles are componentwise nonnegative, a pure seller's
    componentwise nonpositive; anything mixed is a trader. Exhaustive and
    mutually exclusive because the all-zero bundle is rejected at
    construction.
    """
    has_positive = False
    has_negative = False
    for bundle in bid.bundles:
        for qty in bundle.quantities.values():
            if qty > 0:
                has_positive = True
            else:
                has_negative = True
    if has_positive and not has_negative:
        return BidderClass.PURE_BUYER
    if has_negative and not has_positive:
        return BidderClass.PURE_SELLER
    return BidderClass.TRADER


def bundle_cost(bundle: BundleVector, prices: PriceVector) -> float:
    """Inner product of a bundle with the price vector.

    Negative for net sellers: offering one unit at price 2 costs -2,
    i.e. brings in revenue 2.

    Raises:
        UnknownPoolError: if the bundle references an unpriced pool.
    """
    total = 0.0
    for pool_id, qty in bundle.quantities.items():
        total += qty * prices.get(pool_id)
    return total


def aggregate_demand(bundles: Iterable[BundleVector]) -> BundleVector:
    """Componentwise sum of bundles; the market's excess demand vector."""
    acc: dict[str, float] = {}
    for bundle in bundles:
        for pool_id, qty in bundle.quantities.items():
            acc[pool_id] = acc.get(pool_id, 0.0) + qty
    return BundleVector(acc)
