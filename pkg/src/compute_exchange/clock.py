"""The simulated ascending clock auction.

Each round, every user's proxy is evaluated at the current prices and
the responses are summed into the excess demand vector z. If no
component of z is positive the clock stops: the last responses are the
allocations and the last prices are the settlement prices. Otherwise
every pool with positive excess demand gets a price increment

    g_r = min(alpha * z_r, cap_r)

where cap_r is delta * p_r (fractional-cap mode) or delta (absolute-cap
mode), and the loop repeats. Prices only ever rise, so a buyer who has
dropped out stays out; for markets of pure buyers and pure sellers this
forces termination. Traders can in principle cycle, so the engine also
carries a round-limit guard and an optional price ceiling; on a guard
stop nobody is allocated anything and the trajectory tail is kept so an
operator can see what happened.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from compute_exchange.core import (
    AuctionOutcome,
    AuctionStatus,
    Bid,
    BundleVector,
    IncrementMode,
    MarketConfig,
    PriceVector,
    ResourcePool,
    TrajectoryPoint,
    UnknownPoolError,
    ValidationError,
    aggregate_demand,
)
from compute_exchange.proxy import ProxyResponse, evaluate_proxy
from compute_exchange.reserve import reserve_vector

# Excess demand at or below this (relative) level counts as cleared.
# Settlement verification uses the same epsilon, so any outcome the
# engine accepts also verifies.
CLEARING_EPS = 1e-9


@dataclass(frozen=True)
class RoundState:
    """Snapshot of one clock round."""

    round: int
    prices: PriceVector
    responses: Mapping[str, ProxyResponse]
    excess_demand: BundleVector

    def __post_init__(self) -> None:
        object.__setattr__(self, "responses", MappingProxyType(dict(self.responses)))


def _cleared(excess: BundleVector, gross: Mapping[str, float]) -> bool:
    """True when no component of excess demand is meaningfully positive."""
    for pool_id, z in excess.quantities.items():
        if z > CLEARING_EPS * max(1.0, gross.get(pool_id, 0.0)):
            return False
    return True


def _gross_volume(responses: Iterable[ProxyResponse]) -> dict[str, float]:
    gross: dict[str, float] = {}
    for response in responses:
        for pool_id, qty in response.demand.quantities.items():
            gross[pool_id] = gross.get(pool_id, 0.0) + abs(qty)
    return gross


def price_increment(
    state: RoundState,
    config: MarketConfig,
    *,
    reference_prices: PriceVector | None = None,
    pool_costs: Mapping[str, float] | None = None,
) -> dict[str, float]:
    """Per-pool price increments for one round.

    Components with nonpositive excess demand get 0. When
    ``config.normalize_increments`` is set, each pool's alpha is scaled
    by its reference (reserve) price relative to the dearest pool so
    cheap resources do not climb out of proportion; ``reference_prices``
    defaults to the current prices' pools at the run's starting values
    when invoked through ``run_auction``.

    A pool whose current price is 0 would be frozen forever by a
    fractional cap, so there the cap falls back to delta times the
    pool's base cost (when known, else delta itself) to let the price
    leave zero.
    """
    scale_by_pool: Mapping[str, float] = {}
    if config.normalize_increments and reference_prices is not None:
        top = max(reference_prices.prices.values(), default=0.0)
        if top > 0.0:
            scale_by_pool = {
                pool_id: price / top for pool_id, price in reference_prices.prices.items()
            }

    increments: dict[str, float] = {}
    for pool_id, price in state.prices.prices.items():
        z = state.excess_demand.get(pool_id)
        if z <= 0.0:
            increments[pool_id] = 0.0
            continue
        alpha = config.alpha * scale_by_pool.get(pool_id, 1.0)
        if config.increment_mode == IncrementMode.ABSOLUTE_CAP:
            cap = config.delta
        elif price > 0.0:
            cap = config.delta * price
        elif pool_costs is not None and pool_costs.get(pool_id, 0.0) > 0.0:
            cap = config.delta * pool_costs[pool_id]
        else:
            cap = config.delta
        increments[pool_id] = min(alpha * z, cap)
    return increments


def _settle(
    round_index: int,
    prices: PriceVector,
    responses: Mapping[str, ProxyResponse],
    trajectory: Sequence[TrajectoryPoint],
) -> AuctionOutcome:
    allocations: dict[str, BundleVector] = {}
    winners: set[str] = set()
    losers: set[str] = set()
    for user_id, response in responses.items():
        allocations[user_id] = response.demand
        (winners if response.active else losers).add(user_id)
    return AuctionOutcome(
        final_prices=prices,
        allocations=allocations,
        winners=frozenset(winners),
        losers=frozenset(losers),
        rounds=round_index + 1,
        trajectory=tuple(trajectory),
        status=AuctionStatus.CONVERGED,
    )


def _abort(
    status: AuctionStatus,
    round_index: int,
    prices: PriceVector,
    users: Iterable[str],
    trajectory: Sequence[TrajectoryPoint],
) -> AuctionOutcome:
    return AuctionOutcome(
        final_prices=prices,
        allocations={},
        winners=frozenset(),
        losers=frozenset(users),
        rounds=round_index + 1,
        trajectory=tuple(trajectory),
        status=status,
    )


def run_auction(
    bids: Sequence[Bid],
    start_prices: PriceVector,
    config: MarketConfig,
    pools: Sequence[ResourcePool] | None = None,
) -> AuctionOutcome:
    """Run the multi-round clock auction to a settlement or a guarded stop.

    ``pools`` is optional metadata: when provided, zero-price escapes use
    the pool's base cost and increment normalization uses the pools'
    reserve prices; without it the starting prices stand in as the
    normalization reference.

    Raises:
        ValidationError: if two bids share a user id.
        UnknownPoolError: if a bid references a pool missing from
            ``start_prices``.
    """
    seen_users: set[str] = set()
    for bid in bids:
        if bid.user_id in seen_users:
            raise ValidationError(f"duplicate bid for user {bid.user_id!r}")
        seen_users.add(bid.user_id)
        for pool_id in bid.referenced_pools:
            if pool_id not in start_prices.prices:
                raise UnknownPoolError(pool_id, f"referenced by bid {bid.user_id!r}")

    pool_costs: dict[str, float] | None = None
    reference_prices = start_prices
    if pools is not None:
        pool_costs = {pool.id: pool.cost for pool in pools}
        if config.normalize_increments:
            reference_prices = reserve_vector(pools, config.reserve_curve)

    prices = start_prices
    trajectory: list[TrajectoryPoint] = []
    for round_index in range(config.max_rounds):
        responses = {bid.user_id: evaluate_proxy(bid, prices) for bid in bids}
        excess = aggregate_demand(r.demand for r in responses.values())
        trajectory.append(TrajectoryPoint(round=round_index, prices=prices, excess_demand=excess))

        if _cleared(excess, _gross_volume(responses.values())):
            return _settle(round_index, prices, responses, trajectory)
        if round_index == config.max_rounds - 1:
            return _abort(AuctionStatus.ROUND_LIMIT, round_index, prices, seen_users, trajectory)

        state = RoundState(
            round=round_index, prices=prices, responses=responses, excess_demand=excess
        )
        increments = price_increment(
            state, config, reference_prices=reference_prices, pool_costs=pool_costs
        )
        next_prices = prices.bumped(increments)
        if config.price_ceiling is not None:
            for pool_id, price in next_prices.prices.items():
                ceiling = config.price_ceiling.prices.get(pool_id)
                if ceiling is not None and price > ceiling:
                    return _abort(
                        AuctionStatus.PRICE_CEILING, round_index, prices, seen_users, trajectory
                    )
        prices = next_prices

    raise AssertionError("unreachable: loop always returns")  # pragma: no cover
