"""Acceptance suite: one test per release criterion, one PASS line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.
"""

import math
import random
import time

import pytest

from compute_exchange.clock import run_auction
from compute_exchange.core import (
    AuctionStatus,
    Bid,
    BundleVector,
    MarketConfig,
    PriceVector,
    ReserveCurve,
    ResourcePool,
)
from compute_exchange.population import (
    PopulationCounts,
    PopulationRanges,
    generate_pools,
    generate_population,
)
from compute_exchange.reserve import reserve_vector, weight
from compute_exchange.service import ExchangeService, ServiceSettings, replay_ledger
from compute_exchange.settlement import Side, settlement_stats, verify_feasibility

from conftest import (
    E1_FINAL,
    E1_GAMMA_A,
    E1_GAMMA_S,
    E1_PERCENT_SETTLED,
    E1_TRAJECTORY,
    assert_trajectory_monotone_and_capped,
    e1_bids,
    e1_config,
    e1_pool,
    seeded_pure_market,
    single_resource_market,
)
from oracles import (
    fractional_cap_round_bound,
    marginal_loser_valuation,
    replay_three_party_clock,
    uniform_price_winners,
)

SWEEP_SIZE = 500
ORACLE_MARKETS = 200


@pytest.fixture(scope="module")
def sweep():
    """500 seeded pure-buyer/pure-seller markets, run once, reused below."""
    results = []
    started = time.monotonic()
    for seed in range(SWEEP_SIZE):
        pools, bids, config, pi_max = seeded_pure_market(seed)
        reserves = reserve_vector(pools, config.reserve_curve)
        outcome = run_auction(bids, reserves, config, pools)
        bound = fractional_cap_round_bound(
            pi_max, min(reserves.prices.values()), config.delta
        )
        results.append((seed, bids, config, outcome, bound))
    return results, time.monotonic() - started


@pytest.fixture(scope="module")
def oracle_runs():
    """200 seeded single-pool unit-bundle markets."""
    results = []
    for seed in range(ORACLE_MARKETS):
        bids, start, config, valuations, supply = single_resource_market(20_000 + seed)
        outcome = run_auction(bids, PriceVector({"pool": start}), config)
        results.append((seed, config, outcome, valuations, supply))
    return results


@pytest.fixture(scope="module")
def golden_run():
    outcome = run_auction(e1_bids(), PriceVector({"c1/cpu": 2.818}), e1_config())
    return outcome, e1_config()


def test_criterion_1_termination_and_feasibility_sweep(sweep):
    results, elapsed = sweep
    for seed, bids, config, outcome, bound in results:
        assert outcome.status == AuctionStatus.CONVERGED, f"seed {seed} did not converge"
        assert outcome.rounds <= bound, (
            f"seed {seed}: {outcome.rounds} rounds exceeded bound {bound}"
        )
        report = verify_feasibility(bids, outcome, tolerance=1e-9)
        assert report.passed, f"seed {seed}: {report.violations}"
    assert elapsed < 30.0, f"sweep took {elapsed:.1f}s, expected under 30s"
    print(
        f"\nACCEPTANCE 1 termination+feasibility: PASS "
        f"({len(results)} markets converged within bound, 0 violations, {elapsed:.2f}s)"
    )


def test_criterion_2_single_resource_oracle(oracle_runs):
    for seed, config, outcome, valuations, supply in oracle_runs:
        assert outcome.status == AuctionStatus.CONVERGED, f"seed {seed}"
        expected = {f"b{i}" for i in uniform_price_winners(valuations, supply)}
        assert outcome.winners - {"seller"} == expected, f"seed {seed}: wrong winner set"
        cutoff = marginal_loser_valuation(valuations, supply)
        final = outcome.final_prices.prices["pool"]
        previous = (
            outcome.trajectory[-2].prices.prices["pool"]
            if len(outcome.trajectory) > 1
            else final
        )
        assert final > cutoff, f"seed {seed}: price {final} not above cutoff {cutoff}"
        assert final <= cutoff + (final - previous) + 1e-12, (
            f"seed {seed}: price {final} overshot cutoff {cutoff} by more than one step"
        )
    print(
        f"\nACCEPTANCE 2 single-resource oracle: PASS "
        f"({len(oracle_runs)} markets, exact winner sets, price in half-open interval)"
    )


def test_criterion_3_golden_scenario(golden_run):
    outcome, config = golden_run
    # recompute the goldens with the independent replay before asserting
    replayed = replay_three_party_clock(2.818, 1.0, 0.25, 10.0, 6.0, -2.0)
    assert tuple(replayed) == E1_TRAJECTORY

    assert outcome.status == AuctionStatus.CONVERGED
    engine_trajectory = tuple(p.prices.prices["c1/cpu"] for p in outcome.trajectory)
    assert engine_trajectory == E1_TRAJECTORY
    assert outcome.winners == {"A", "S"}
    # the settling price is the first clock price strictly above the losing
    # buyer's willingness of 6
    assert all(p <= 6.0 for p in engine_trajectory[:-1]) and E1_FINAL > 6.0

    stats = settlement_stats(
        e1_bids(), outcome, [e1_pool()], PriceVector({"c1/cpu": 4.0})
    )
    assert stats.premiums["A"] == pytest.approx(E1_GAMMA_A, rel=1e-9)
    assert stats.premiums["S"] == pytest.approx(E1_GAMMA_S, rel=1e-9)
    assert stats.percent_settled == pytest.approx(E1_PERCENT_SETTLED, abs=0.1)
    print(
        f"\nACCEPTANCE 3 golden scenario: PASS (trajectory {engine_trajectory}, "
        f"winners A+S, premiums A={stats.premiums['A']:.4f} S={stats.premiums['S']:.4f}, "
        f"settled {stats.percent_settled:.1f}%)"
    )


def test_criterion_4_reserve_curve_property_suite():
    rng = random.Random(2024)
    draws = 1000
    for _ in range(draws):
        curve = ReserveCurve(
            k=rng.uniform(1.000001, 100.0),
            m=rng.uniform(1.000001, 5.0),
            psi_star=rng.uniform(0.1, 0.9),
        )
        grid = sorted(rng.uniform(0.0, 1.0) for _ in range(8))
        values = [weight(curve, psi) for psi in grid]
        for (p0, w0), (p1, w1) in zip(zip(grid, values), zip(grid[1:], values[1:])):
            if p1 > p0:
                assert w1 > w0, "weight must increase with utilization"
        for psi, value in zip(grid, values):
            if psi > curve.psi_star:
                assert value > 1.0, "congested pools must weigh above 1"
            else:
                assert value <= 1.0 + 1e-15, "idle pools must weigh at most 1"
        slopes = [
            (math.log(w1) - math.log(w0)) / (p1 - p0)
            for (p0, w0), (p1, w1) in zip(zip(grid, values), zip(grid[1:], values[1:]))
            if p1 - p0 > 1e-9
        ]
        for s0, s1 in zip(slopes, slopes[1:]):
            assert s1 >= s0 - 1e-9 * max(1.0, abs(s0)), "log-slope must increase"
        full, empty = weight(curve, 1.0), weight(curve, 0.0)
        assert abs(full - curve.k * empty) <= 1e-9 * abs(full), "phi(1) must equal k*phi(0)"
    print(f"\nACCEPTANCE 4 reserve-curve properties: PASS ({draws} random curves)")


def test_criterion_5_scale_check():
    rng = random.Random(424242)
    pools = generate_pools(rng, 100)
    bids = generate_population(
        424242, PopulationCounts(buyers=85, sellers=15), PopulationRanges(), pools
    )
    assert len(bids) == 100 and len(pools) == 100
    pi_max = max(b.willingness for b in bids if b.willingness > 0)
    config = MarketConfig(alpha=0.1 * 1.1 * pi_max, delta=0.1)
    reserves = reserve_vector(pools, config.reserve_curve)

    started = time.monotonic()
    outcome = run_auction(list(bids), reserves, config, pools)
    elapsed = time.monotonic() - started

    assert outcome.status == AuctionStatus.CONVERGED
    assert verify_feasibility(bids, outcome).passed
    assert elapsed <= 10.0, f"100x100 market took {elapsed:.2f}s, limit is 10s"
    print(
        f"\nACCEPTANCE 5 scale check: PASS (100 bidders x 100 pools settled in "
        f"{elapsed:.3f}s, {outcome.rounds} rounds)"
    )


def test_criterion_6_migration_to_underutilized_cluster():
    def pool(pid, util):
        return ResourcePool(
            id=pid, cluster=pid.split("/")[0], resource_kind="cpu", unit="cores",
            cost=1.0, utilization=util,
        )

    hot, cold = pool("hot/cpu", 0.95), pool("cold/cpu", 0.30)
    # every buyer is indifferent between the clusters; the congested pool
    # is listed first so only price, not list order, can steer them
    buyers = [
        Bid(
            user_id=f"team{i}",
            bundles=(BundleVector({hot.id: 2}), BundleVector({cold.id: 2})),
            willingness=pi,
        )
        for i, pi in enumerate((1.2, 1.5, 1.8, 4.0, 5.0))
    ]
    operator = Bid(
        user_id="operator", bundles=(BundleVector({cold.id: -6}),), willingness=-0.5
    )
    bids = buyers + [operator]
    config = MarketConfig(alpha=1.0, delta=0.25)
    reserves = reserve_vector([hot, cold], config.reserve_curve)
    assert reserves.prices[hot.id] > reserves.prices[cold.id]

    outcome = run_auction(bids, reserves, config, [hot, cold])
    assert outcome.status == AuctionStatus.CONVERGED

    winning_buyers = outcome.winners - {"operator"}
    assert winning_buyers, "some buyers must win"
    for user_id in winning_buyers:
        allocation = outcome.allocations[user_id]
        assert allocation.get(cold.id) > 0, f"{user_id} was not moved to the idle cluster"
        assert allocation.get(hot.id) == 0

    stats = settlement_stats(
        bids, outcome, [hot, cold], PriceVector({hot.id: 1.0, cold.id: 1.0})
    )
    bid_side = [r for r in stats.utilization_records if r.side == Side.BID]
    assert bid_side and all(r.pool_id == cold.id for r in bid_side)
    assert all(r.utilization == pytest.approx(0.30) for r in bid_side)
    print(
        f"\nACCEPTANCE 6 migration: PASS ({len(winning_buyers)} winning buyers all "
        f"allocated at the 0.30-utilization pool; final cold price "
        f"{outcome.final_prices.prices[cold.id]:.4f} vs hot reserve "
        f"{reserves.prices[hot.id]:.4f})"
    )


def test_criterion_7_monotone_trajectories_and_caps(sweep, oracle_runs, golden_run):
    checked = 0
    for _, _, config, outcome, _ in sweep[0]:
        assert_trajectory_monotone_and_capped(outcome, config)
        checked += 1
    for _, config, outcome, _, _ in oracle_runs:
        assert_trajectory_monotone_and_capped(outcome, config)
        checked += 1
    outcome, config = golden_run
    assert_trajectory_monotone_and_capped(outcome, config)
    checked += 1
    print(
        f"\nACCEPTANCE 7 monotonicity+cap: PASS ({checked} trajectories componentwise "
        f"nondecreasing, fractional cap respected)"
    )


def test_criterion_8_ledger_replay(tmp_path):
    ledger_path = tmp_path / "ledger.jsonl"
    service = ExchangeService(
        [e1_pool()],
        e1_config(),
        settings=ServiceSettings(preliminary_cadence_seconds=60),
        ledger_path=ledger_path,
    )

    golden = service.open_window(duration_seconds=600)
    for bid in e1_bids():
        service.submit_bid(golden.window_id, bid)
    service.run_preliminary(golden.window_id)
    service.close_window(golden.window_id)
    service.finalize_window(golden.window_id)

    # a second, larger window with a generated population
    rng = random.Random(77)
    pools = generate_pools(rng, 6)
    generated = service.open_window(duration_seconds=600, pools=pools)
    population = generate_population(
        77, PopulationCounts(buyers=25, sellers=6), PopulationRanges(), pools
    )
    for bid in population:
        service.submit_bid(generated.window_id, bid)
    service.close_window(generated.window_id)
    service.finalize_window(generated.window_id)

    checks = replay_ledger(ledger_path)
    assert len(checks) == 2
    for check in checks:
        assert check.recorded == check.replayed, (
            f"window {check.window_id}: replay diverged from the recorded outcome"
        )
    print(
        f"\nACCEPTANCE 8 ledger replay: PASS ({len(checks)} settled windows reproduced "
        f"byte-identically)"
    )
