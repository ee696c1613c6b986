"""Shared fixtures: the three-party golden scenario, market generators."""

from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from compute_exchange.core import (
    Bid,
    BundleVector,
    IncrementMode,
    MarketConfig,
    ResourcePool,
)

# Golden values, frozen from tests/oracles.py::replay_three_party_clock
# (buyers at 10 and 6 for one unit, seller at -2 for one unit, clock
# starting at 2.818 with alpha=1, delta=0.25, fractional cap).
E1_START = 2.818
E1_TRAJECTORY = (2.818, 3.5225, 4.403125, 5.403125, 6.403125)
E1_FINAL = 6.403125
E1_GAMMA_A = 0.5617374328940946
E1_GAMMA_S = 0.687652513421181
E1_MEDIAN_PREMIUM = 0.6246949731576379
E1_PERCENT_SETTLED = 100.0 * 2 / 3


def e1_pool() -> ResourcePool:
    # cost equals the intended start price and utilization sits exactly at
    # the curve's break-even, so the reserve price is the cost itself.
    return ResourcePool(
        id="c1/cpu",
        cluster="c1",
        resource_kind="cpu",
        unit="cores",
        cost=E1_START,
        utilization=0.6,
    )


def e1_bids() -> list[Bid]:
    return [
        Bid(user_id="A", bundles=(BundleVector({"c1/cpu": 1}),), willingness=10.0),
        Bid(user_id="B", bundles=(BundleVector({"c1/cpu": 1}),), willingness=6.0),
        Bid(user_id="S", bundles=(BundleVector({"c1/cpu": -1}),), willingness=-2.0),
    ]


def e1_config() -> MarketConfig:
    return MarketConfig(alpha=1.0, delta=0.25, increment_mode=IncrementMode.FRACTIONAL_CAP)


@pytest.fixture
def golden_pool() -> ResourcePool:
    return e1_pool()


@pytest.fixture
def golden_bids() -> list[Bid]:
    return e1_bids()


@pytest.fixture
def golden_config() -> MarketConfig:
    return e1_config()


def seeded_pure_market(seed: int, max_users: int = 50, max_pools: int = 10):
    """One random pure-buyer/pure-seller market with a cap-binding alpha.

    Quantities are integers, so positive excess demand is at least 1, and
    alpha is chosen so the delta cap binds whenever demand is positive;
    that is the regime the increment rule is designed for and the one the
    closed-form round bound is derived in. Returns (pools, bids, config,
    pi_max).
    """
    from compute_exchange.population import (
        PopulationCounts,
        PopulationRanges,
        generate_pools,
        generate_population,
    )

    rng = random.Random(seed)
    pools = generate_pools(rng, rng.randint(1, max_pools))
    buyers = rng.randint(1, max_users - 10)
    sellers = rng.randint(0, 10)
    counts = PopulationCounts(buyers=buyers, sellers=sellers)
    bids = generate_population(seed, counts, PopulationRanges(), pools)
    delta = rng.choice([0.05, 0.1, 0.25])
    pi_max = max((b.willingness for b in bids if b.willingness > 0), default=1.0)
    alpha = delta * (1.0 + delta) * max(pi_max, 1.0)
    config = MarketConfig(alpha=alpha, delta=delta)
    return pools, bids, config, pi_max


def single_resource_market(seed: int):
    """Unit-demand buyers against s units of supply on one pool.

    Valuations are spaced wider than any possible clock increment, so the
    sort oracle's winner set is exact. Returns (bids, start_price, config,
    valuations, supply).
    """
    rng = random.Random(seed)
    n_buyers = rng.randint(2, 12)
    supply = rng.randint(1, n_buyers - 1)
    start = rng.uniform(0.3, 2.0)
    valuations = []
    level = start * rng.uniform(1.1, 1.6)
    for _ in range(n_buyers):
        valuations.append(round(level, 6))
        level += rng.uniform(1.3, 2.5)
    rng.shuffle(valuations)

    bids = [
        Bid(user_id=f"b{i}", bundles=(BundleVector({"pool": 1}),), willingness=v)
        for i, v in enumerate(valuations)
    ]
    bids.append(
        Bid(
            user_id="seller",
            bundles=(BundleVector({"pool": -float(supply)}),),
            willingness=-0.01,
        )
    )
    config = MarketConfig(alpha=2.0 / n_buyers, delta=0.1)
    return bids, start, config, valuations, supply


def assert_trajectory_monotone_and_capped(outcome, config) -> None:
    """Prices never fall, rise only under excess demand, respect the cap."""
    for earlier, later in zip(outcome.trajectory, outcome.trajectory[1:]):
        for pool_id, before in earlier.prices.prices.items():
            after = later.prices.prices[pool_id]
            assert after >= before, f"price fell on {pool_id}: {before} -> {after}"
            if after > before:
                assert earlier.excess_demand.get(pool_id) > 0, (
                    f"price rose on {pool_id} without excess demand"
                )
            if config.increment_mode == IncrementMode.FRACTIONAL_CAP and before > 0:
                cap = (1.0 + config.delta) * before
                assert after <= cap * (1.0 + 1e-12), (
                    f"cap violated on {pool_id}: {before} -> {after}"
                )
