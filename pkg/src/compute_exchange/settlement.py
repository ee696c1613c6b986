"""Settlement verification and post-auction analytics.

A settlement is only trusted after it passes six independent checks:
whole bundles only, no net shortage, winners can afford their bundles,
winners got their cheapest alternatives, losers were genuinely priced
out, and prices are nonnegative. The verifier reports every violation it
finds rather than stopping at the first, since a broken outcome usually
breaks several ways at once.

Analytics mirror what operators watch after each auction: the bid
premium (how far above the settled cost each winner was willing to go),
the share of users whose trades settled, where settled volume sat on the
utilization scale, and how far final prices moved from the pre-market
fixed prices.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Sequence

from compute_exchange.core import (
    AuctionOutcome,
    Bid,
    BundleVector,
    MarketError,
    PriceVector,
    ResourcePool,
    bundle_cost,
)

# Relative tolerance for real comparisons: settled prices are sums of
# many increments, so exact equality would be numerically brittle.
DEFAULT_TOLERANCE = 1e-9


class InfeasibleOutcomeError(MarketError):
    """Analytics were requested for an outcome that fails verification."""


class UndefinedPremiumError(MarketError):
    """The settled value is zero, so the relative premium is undefined."""


class Side(str, Enum):
    BID = "bid"
    OFFER = "offer"


@dataclass(frozen=True)
class Violation:
    """One failed settlement check: which constraint, for whom, and why."""

    constraint: int
    subject: str
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    passed: bool
    violations: tuple[Violation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "violations", tuple(self.violations))
        if self.passed != (not self.violations):
            raise ValueError("passed must mean exactly: no violations")


@dataclass(frozen=True)
class UtilizationRecord:
    """One settled allocation component placed on the utilization scale."""

    user_id: str
    pool_id: str
    side: Side
    utilization: float


@dataclass(frozen=True)
class SettlementStats:
    premiums: Mapping[str, float]
    median_premium: float | None
    mean_premium: float | None
    percent_settled: float
    utilization_records: tuple[UtilizationRecord, ...]
    price_ratios: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "premiums", MappingProxyType(dict(self.premiums)))
        object.__setattr__(self, "price_ratios", MappingProxyType(dict(self.price_ratios)))
        object.__setattr__(self, "utilization_records", tuple(self.utilization_records))


def _close_enough(a: float, b: float, tolerance: float) -> bool:
    return abs(a - b) <= tolerance * max(1.0, abs(a), abs(b))


def _definitely_greater(a: float, b: float, tolerance: float) -> bool:
    return a - b > tolerance * max(1.0, abs(a), abs(b))


def _bundles_equal(a: BundleVector, b: BundleVector, tolerance: float) -> bool:
    for pool_id in a.pool_ids | b.pool_ids:
        if not _close_enough(a.get(pool_id), b.get(pool_id), tolerance):
            return False
    return True


def verify_feasibility(
    bids: Sequence[Bid],
    outcome: AuctionOutcome,
    tolerance: float = DEFAULT_TOLERANCE,
) -> FeasibilityReport:
    """Check an outcome against all six settlement constraints.

    Returns every violation found. Constraint ids:
      1 allocations are whole bundles from each user's XOR set (or zero),
      2 no pool is net over-allocated,
      3 winners' willingness covers their settled cost,
      4 winners hold the cheapest bundle of their set at final prices,
      5 losers are priced out (willingness strictly below best cost),
      6 prices are nonnegative.

    Raises:
        MarketError: if the outcome references users absent from ``bids``.
    """
    bids_by_user = {bid.user_id: bid for bid in bids}
    known = set(bids_by_user)
    referenced = set(outcome.winners) | set(outcome.losers) | set(outcome.allocations)
    unknown = referenced - known
    if unknown:
        raise MarketError(f"outcome references unknown users: {sorted(unknown)}")

    prices = outcome.final_prices
    violations: list[Violation] = []

    for pool_id, price in prices.prices.items():
        if price < 0.0:
            violations.append(Violation(6, pool_id, f"negative price {price}"))

    for user_id, bid in bids_by_user.items():
        allocation = outcome.allocation_for(user_id)
        if user_id in outcome.winners:
            if not any(_bundles_equal(allocation, q, tolerance) for q in bid.bundles):
                violations.append(
                    Violation(1, user_id, "winner's allocation is not one of their bundles")
                )
                continue
            settled = bundle_cost(allocation, prices)
            cheapest = min(bundle_cost(q, prices) for q in bid.bundles)
            if _definitely_greater(settled, bid.willingness, tolerance):
                violations.append(
                    Violation(
                        3,
                        user_id,
                        f"settled cost {settled} exceeds willingness {bid.willingness}",
                    )
                )
            if not _close_enough(settled, cheapest, tolerance):
                violations.append(
                    Violation(
                        4,
                        user_id,
                        f"settled cost {settled} is not the cheapest alternative {cheapest}",
                    )
                )
        else:
            if not allocation.is_zero:
                violations.append(Violation(1, user_id, "loser has a nonzero allocation"))
                continue
            cheapest = min(bundle_cost(q, prices) for q in bid.bundles)
            if not _definitely_greater(cheapest, bid.willingness, tolerance):
                violations.append(
                    Violation(
                        5,
                        user_id,
                        f"loser's willingness {bid.willingness} covers cheapest "
                        f"bundle cost {cheapest}",
                    )
                )

    net = {}
    for user_id in bids_by_user:
        for pool_id, qty in outcome.allocation_for(user_id).quantities.items():
            net[pool_id] = net.get(pool_id, 0.0) + qty
    gross = {}
    for user_id in bids_by_user:
        for pool_id, qty in outcome.allocation_for(user_id).quantities.items():
            gross[pool_id] = gross.get(pool_id, 0.0) + abs(qty)
    for pool_id, total in sorted(net.items()):
        if total > tolerance * max(1.0, gross.get(pool_id, 0.0)):
            violations.append(Violation(2, pool_id, f"net excess demand {total} allocated"))

    violations.sort(key=lambda v: (v.constraint, v.subject))
    return FeasibilityReport(passed=not violations, violations=tuple(violations))


def bid_premium(bid: Bid, allocation: BundleVector, prices: PriceVector) -> float:
    """Relative gap between a winner's willingness and the settled value.

    The denominator is taken in absolute value so seller premiums come
    out nonnegative too (a seller's settled value is negative).

    Raises:
        UndefinedPremiumError: if the settled value is zero.
        ValueError: if called with a zero allocation (losers have no premium).
    """
    if allocation.is_zero:
        raise ValueError(f"bid premium is only defined for winners, {bid.user_id} got nothing")
    settled = bundle_cost(allocation, prices)
    if settled == 0.0:
        raise UndefinedPremiumError(f"settled value for {bid.user_id} is zero")
    return abs(bid.willingness - settled) / abs(settled)


def settlement_stats(
    bids: Sequence[Bid],
    outcome: AuctionOutcome,
    pools: Sequence[ResourcePool],
    baseline_prices: PriceVector,
    tolerance: float = DEFAULT_TOLERANCE,
) -> SettlementStats:
    """Post-auction statistics over a verified outcome.

    Refuses infeasible outcomes rather than silently computing numbers
    that would mislead operators. Premiums are computed per winner;
    winners whose settled value is zero are excluded from the premium
    statistics. ``baseline_prices`` are the pre-market fixed prices the
    ratio report compares against; pools with a zero baseline are left
    out of the ratio map.

    Raises:
        InfeasibleOutcomeError: if the outcome fails verification.
    """
    report = verify_feasibility(bids, outcome, tolerance)
    if not report.passed:
        raise InfeasibleOutcomeError(
            f"refusing stats on infeasible outcome: {len(report.violations)} violation(s), "
            f"first: {report.violations[0]}"
        )

    bids_by_user = {bid.user_id: bid for bid in bids}
    utilization_by_pool = {pool.id: pool.utilization for pool in pools}

    premiums: dict[str, float] = {}
    for user_id in sorted(outcome.winners):
        try:
            premiums[user_id] = bid_premium(
                bids_by_user[user_id], outcome.allocations[user_id], outcome.final_prices
            )
        except UndefinedPremiumError:
            continue

    values = list(premiums.values())
    median = statistics.median(values) if values else None
    mean = statistics.fmean(values) if values else None

    total_users = len(outcome.winners) + len(outcome.losers)
    percent_settled = 100.0 * len(outcome.winners) / total_users if total_users else 0.0

    records: list[UtilizationRecord] = []
    for user_id in sorted(outcome.winners):
        allocation = outcome.allocations[user_id]
        for pool_id in sorted(allocation.quantities):
            qty = allocation.quantities[pool_id]
            records.append(
                UtilizationRecord(
                    user_id=user_id,
                    pool_id=pool_id,
                    side=Side.BID if qty > 0 else Side.OFFER,
                    utilization=utilization_by_pool.get(pool_id, 0.0),
                )
            )

    ratios: dict[str, float] = {}
    for pool_id, final in outcome.final_prices.prices.items():
        baseline = baseline_prices.prices.get(pool_id, 0.0)
        if baseline > 0.0:
            ratios[pool_id] = final / baseline

    return SettlementStats(
        premiums=premiums,
        median_premium=median,
        mean_premium=mean,
        percent_settled=percent_settled,
        utilization_records=tuple(records),
        price_ratios=ratios,
    )
