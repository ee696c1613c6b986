"""Batch front door: run auctions from files, generate populations, serve.

Exit codes for `run`:
  0  converged and feasible
  1  bad input (parse/validation errors)
  2  stopped at the round limit
  3  stopped at the price ceiling
  4  converged but failed feasibility verification
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from compute_exchange.clock import run_auction
from compute_exchange.core import (
    AuctionStatus,
    IncrementMode,
    MarketError,
    PriceVector,
)
from compute_exchange.files import (
    SchemaError,
    dump_bids_file,
    feasibility_to_record,
    load_bids_file,
    load_market_file,
    outcome_to_record,
    stats_to_record,
)
from compute_exchange.population import (
    PopulationCounts,
    PopulationRanges,
    generate_population,
)
from compute_exchange.reserve import reserve_vector
from compute_exchange.settlement import settlement_stats, verify_feasibility

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ROUND_LIMIT = 2
EXIT_PRICE_CEILING = 3
EXIT_INFEASIBLE = 4

_STATUS_EXIT = {
    AuctionStatus.ROUND_LIMIT: EXIT_ROUND_LIMIT,
    AuctionStatus.PRICE_CEILING: EXIT_PRICE_CEILING,
}


def _write_json(path: Path, record) -> None:
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _write_trajectory(path: Path, outcome) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "pool_id", "price", "excess_demand"])
        for point in outcome.trajectory:
            for pool_id in sorted(point.prices.prices):
                writer.writerow(
                    [
                        point.round,
                        pool_id,
                        repr(point.prices.prices[pool_id]),
                        repr(point.excess_demand.get(pool_id)),
                    ]
                )


def _write_stats_tables(output_dir: Path, stats_record: dict) -> None:
    with (output_dir / "price_ratios.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pool_id", "ratio"])
        for pool_id in sorted(stats_record["price_ratios"]):
            writer.writerow([pool_id, repr(stats_record["price_ratios"][pool_id])])
    with (output_dir / "utilization_records.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "pool_id", "side", "utilization"])
        for record in stats_record["utilization_records"]:
            writer.writerow(
                [
                    record["user_id"],
                    record["pool_id"],
                    record["side"],
                    repr(record["utilization"]),
                ]
            )


def _apply_overrides(config, args) -> tuple:
    """Returns (config, curve) with any command-line overrides applied."""
    changes = {}
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.delta is not None:
        changes["delta"] = args.delta
    if args.increment_mode is not None:
        changes["increment_mode"] = IncrementMode(args.increment_mode)
    if args.max_rounds is not None:
        changes["max_rounds"] = args.max_rounds
    curve = config.reserve_curve
    curve_changes = {}
    if args.curve_k is not None:
        curve_changes["k"] = args.curve_k
    if args.curve_m is not None:
        curve_changes["m"] = args.curve_m
    if args.curve_psi_star is not None:
        curve_changes["psi_star"] = args.curve_psi_star
    if curve_changes:
        curve = dataclasses.replace(curve, **curve_changes)
        changes["reserve_curve"] = curve
    if changes:
        config = dataclasses.replace(config, **changes)
    return config, config.reserve_curve


def cmd_run(args: argparse.Namespace) -> int:
    try:
        market = load_market_file(args.market)
        bids = load_bids_file(args.bids)
        config, curve = _apply_overrides(market.config, args)
        baseline = market.baseline_prices
        if args.baseline_prices is not None:
            baseline = PriceVector(json.loads(Path(args.baseline_prices).read_text()))
        if baseline is None:
            baseline = PriceVector({pool.id: pool.cost for pool in market.pools})

        output_dir = Path(args.output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)

        reserves = reserve_vector(market.pools, curve)
        outcome = run_auction(list(bids), reserves, config, market.pools)

        _write_json(output_dir / "outcome.json", outcome_to_record(outcome))
        _write_trajectory(output_dir / "trajectory.csv", outcome)

        if outcome.status != AuctionStatus.CONVERGED:
            print(f"status: {outcome.status.value} after {outcome.rounds} rounds")
            return _STATUS_EXIT[outcome.status]

        report = verify_feasibility(bids, outcome)
        _write_json(output_dir / "feasibility.json", feasibility_to_record(report))
        if not report.passed:
            print(f"status: converged but infeasible ({len(report.violations)} violations)")
            return EXIT_INFEASIBLE

        stats = stats_to_record(settlement_stats(bids, outcome, market.pools, baseline))
        _write_json(output_dir / "stats.json", stats)
        _write_stats_tables(output_dir, stats)

        print(
            f"status: converged in {outcome.rounds} rounds; "
            f"{len(outcome.winners)} of {len(outcome.winners) + len(outcome.losers)} "
            f"users settled"
        )
        for pool_id in sorted(outcome.final_prices.prices):
            print(f"  {pool_id}: {outcome.final_prices.prices[pool_id]}")
        return EXIT_OK
    except (SchemaError, MarketError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        market = load_market_file(args.market)
        counts = PopulationCounts(
            buyers=args.buyers, sellers=args.sellers, traders=args.traders
        )
        ranges = PopulationRanges(
            bundles_per_bid=tuple(args.bundles_per_bid),
            pools_per_bundle=tuple(args.pools_per_bundle),
            quantity=tuple(args.quantity),
            buyer_price_factor=tuple(args.buyer_factor),
            seller_price_factor=tuple(args.seller_factor),
        )
        bids = generate_population(
            args.seed, counts, ranges, market.pools, market.config.reserve_curve
        )
        dump_bids_file(args.out, bids)
        print(f"wrote {len(bids)} bids to {args.out}")
        return EXIT_OK
    except (SchemaError, MarketError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from compute_exchange.api import create_app
    from compute_exchange.service import service_from_market_file

    try:
        service = service_from_market_file(
            args.market, ledger_path=args.ledger, operator_token=args.token
        )
        if args.cadence is not None:
            service.settings = dataclasses.replace(
                service.settings, preliminary_cadence_seconds=args.cadence
            )
        duration = args.window_duration
        window = service.open_window(duration)
        print(f"opened window {window.window_id}, closes at {window.closes_at}")
        service.start_scheduler()
        try:
            uvicorn.run(create_app(service), host=args.host, port=args.port, log_level="warning")
        finally:
            service.stop_scheduler()
        return EXIT_OK
    except (SchemaError, MarketError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compute-exchange",
        description="Clock-auction pricing and allocation of cluster resources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one auction from market and bid files")
    run.add_argument("--market", required=True, help="market JSON file (pools + config)")
    run.add_argument("--bids", required=True, help="bids JSON file")
    run.add_argument("--output-dir", required=True, help="directory for result files")
    run.add_argument("--alpha", type=float, default=None)
    run.add_argument("--delta", type=float, default=None)
    run.add_argument(
        "--increment-mode", choices=[mode.value for mode in IncrementMode], default=None
    )
    run.add_argument("--max-rounds", type=int, default=None)
    run.add_argument("--curve-k", type=float, default=None)
    run.add_argument("--curve-m", type=float, default=None)
    run.add_argument("--curve-psi-star", type=float, default=None)
    run.add_argument(
        "--baseline-prices", default=None, help="JSON file of pool-id to pre-market price"
    )
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("generate", help="generate a seeded synthetic bid population")
    gen.add_argument("--market", required=True)
    gen.add_argument("--out", required=True, help="output bids JSON file")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--buyers", type=int, default=0)
    gen.add_argument("--sellers", type=int, default=0)
    gen.add_argument("--traders", type=int, default=0)
    gen.add_argument("--bundles-per-bid", type=int, nargs=2, default=[1, 2], metavar=("LO", "HI"))
    gen.add_argument("--pools-per-bundle", type=int, nargs=2, default=[1, 3], metavar=("LO", "HI"))
    gen.add_argument("--quantity", type=int, nargs=2, default=[1, 5], metavar=("LO", "HI"))
    gen.add_argument(
        "--buyer-factor", type=float, nargs=2, default=[0.5, 3.0], metavar=("LO", "HI")
    )
    gen.add_argument(
        "--seller-factor", type=float, nargs=2, default=[0.2, 1.0], metavar=("LO", "HI")
    )
    gen.set_defaults(func=cmd_generate)

    serve = sub.add_parser("serve", help="serve the exchange HTTP API for one market")
    serve.add_argument("--market", required=True, help="market JSON file")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--token", default=None, help="operator token for close/finalize")
    serve.add_argument("--ledger", default=None, help="event ledger path (JSON lines)")
    serve.add_argument("--cadence", type=float, default=None, help="preliminary cadence seconds")
    serve.add_argument(
        "--window-duration", type=float, default=None, help="seconds until the window closes"
    )
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
