"""Seeded synthetic bidder populations for experiments and property suites.

The generator is deliberately boring: one ``random.Random(seed)`` drives
everything, quantities are integers, and willingness values are anchored
to what the bundle would cost at reserve prices, so a tunable share of
the population is in the market at the opening bell. Same seed, same
pools, same ranges: identical population, byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from compute_exchange.core import (
    Bid,
    BundleVector,
    ReserveCurve,
    ResourcePool,
    ValidationError,
    bundle_cost,
)
from compute_exchange.reserve import reserve_vector


class InvalidRangeError(ValidationError):
    """A population count or range is out of bounds."""


@dataclass(frozen=True)
class PopulationCounts:
    buyers: int = 0
    sellers: int = 0
    traders: int = 0

    def __post_init__(self) -> None:
        for name in ("buyers", "sellers", "traders"):
            if getattr(self, name) < 0:
                raise InvalidRangeError(f"{name} count must be >= 0")


@dataclass(frozen=True)
class PopulationRanges:
    """Sampling ranges; all inclusive. Factors multiply reserve-price value.

    A buyer's willingness is ``factor * cost of its cheapest bundle at
    reserve prices``; factors above 1 mean the buyer is active at the
    opening prices. A seller's minimum receipt is ``factor * revenue of
    its best bundle at reserve prices``; factors at or below 1 mean the
    seller is willing from the start.
    """

    bundles_per_bid: tuple[int, int] = (1, 2)
    pools_per_bundle: tuple[int, int] = (1, 3)
    quantity: tuple[int, int] = (1, 5)
    buyer_price_factor: tuple[float, float] = (0.5, 3.0)
    seller_price_factor: tuple[float, float] = (0.2, 1.0)

    def __post_init__(self) -> None:
        for name in (
            "bundles_per_bid",
            "pools_per_bundle",
            "quantity",
            "buyer_price_factor",
            "seller_price_factor",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidRangeError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
        if self.bundles_per_bid[0] < 1:
            raise InvalidRangeError("bundles_per_bid must be at least 1")
        if self.pools_per_bundle[0] < 1:
            raise InvalidRangeError("pools_per_bundle must be at least 1")
        if self.quantity[0] < 1:
            raise InvalidRangeError("quantity must be at least 1")


def generate_pools(
    rng: random.Random,
    count: int,
    cost_range: tuple[float, float] = (0.5, 4.0),
    utilization_range: tuple[float, float] = (0.05, 0.95),
) -> tuple[ResourcePool, ...]:
    """Random pools spread over synthetic clusters, three kinds per cluster."""
    kinds = ("cpu", "ram", "disk")
    pools = []
    for i in range(count):
        cluster = f"cluster-{i // len(kinds) + 1}"
        kind = kinds[i % len(kinds)]
        pools.append(
            ResourcePool(
                id=f"{cluster}/{kind}",
                cluster=cluster,
                resource_kind=kind,
                unit={"cpu": "cores", "ram": "GiB", "disk": "TiB"}[kind],
                cost=round(rng.uniform(*cost_range), 4),
                utilization=round(rng.uniform(*utilization_range), 4),
            )
        )
    return tuple(pools)


def _random_bundle(
    rng: random.Random,
    pool_ids: Sequence[str],
    ranges: PopulationRanges,
    sign: int,
    mixed: bool = False,
) -> BundleVector:
    lo, hi = ranges.pools_per_bundle
    size = rng.randint(lo, min(hi, len(pool_ids)))
    if mixed:
        size = max(size, 2)
    chosen = rng.sample(list(pool_ids), size)
    quantities = {}
    for j, pool_id in enumerate(chosen):
        qty = float(rng.randint(*ranges.quantity))
        if mixed:
            # first component demanded, at least one offered
            component_sign = 1 if j == 0 else (-1 if j == 1 else rng.choice((1, -1)))
        else:
            component_sign = sign
        quantities[pool_id] = component_sign * qty
    return BundleVector(quantities)


def generate_population(
    seed: int,
    counts: PopulationCounts,
    ranges: PopulationRanges,
    pools: Sequence[ResourcePool],
    curve: ReserveCurve | None = None,
) -> tuple[Bid, ...]:
    """Deterministic population of buyers, sellers, and optional traders.

    Raises:
        InvalidRangeError: on impossible counts/ranges (e.g. traders
            requested with fewer than two pools).
    """
    if not pools:
        raise InvalidRangeError("cannot generate a population without pools")
    if counts.traders > 0 and len(pools) < 2:
        raise InvalidRangeError("traders need at least two pools to mix signs")

    rng = random.Random(seed)
    reserves = reserve_vector(pools, curve or ReserveCurve())
    pool_ids = [pool.id for pool in pools]
    bids: list[Bid] = []

    for i in range(counts.buyers):
        lo, hi = ranges.bundles_per_bid
        bundles = tuple(
            _random_bundle(rng, pool_ids, ranges, sign=1) for _ in range(rng.randint(lo, hi))
        )
        cheapest = min(bundle_cost(b, reserves) for b in bundles)
        factor = rng.uniform(*ranges.buyer_price_factor)
        bids.append(
            Bid(
                user_id=f"buyer-{i + 1:03d}",
                bundles=bundles,
                willingness=round(max(factor * cheapest, 1e-6), 6),
            )
        )

    for i in range(counts.sellers):
        lo, hi = ranges.bundles_per_bid
        bundles = tuple(
            _random_bundle(rng, pool_ids, ranges, sign=-1) for _ in range(rng.randint(lo, hi))
        )
        best_revenue = max(-bundle_cost(b, reserves) for b in bundles)
        factor = rng.uniform(*ranges.seller_price_factor)
        bids.append(
            Bid(
                user_id=f"seller-{i + 1:03d}",
                bundles=bundles,
                willingness=round(-max(factor * best_revenue, 1e-6), 6),
            )
        )

    for i in range(counts.traders):
        lo, hi = ranges.bundles_per_bid
        bundles = tuple(
            _random_bundle(rng, pool_ids, ranges, sign=1, mixed=True)
            for _ in range(rng.randint(lo, hi))
        )
        cheapest = min(bundle_cost(b, reserves) for b in bundles)
        gross = max(
            sum(abs(q) * reserves.prices[p] for p, q in b.quantities.items()) for b in bundles
        )
        slack = rng.uniform(-0.2, 0.5) * gross
        bids.append(
            Bid(
                user_id=f"trader-{i + 1:03d}",
                bundles=bundles,
                willingness=round(cheapest + slack, 6),
            )
        )

    return tuple(bids)
