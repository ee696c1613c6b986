"""File schemas and canonical serialization.

Market and bid files are plain JSON. Every record emitted for the event
ledger or the batch runner goes through ``canonical_json`` (sorted keys,
no whitespace, shortest round-trip floats) so identical inputs always
serialize to identical bytes; ledger replay relies on that.

Parse errors carry a JSON-pointer-ish path ("bids[2].willingness") so a
malformed file points at the offending field, not just the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from compute_exchange.core import (
    AuctionOutcome,
    Bid,
    BundleVector,
    IncrementMode,
    MarketConfig,
    MarketError,
    PriceVector,
    ReserveCurve,
    ResourcePool,
    ValidationError,
)
from compute_exchange.settlement import FeasibilityReport, SettlementStats


class SchemaError(MarketError):
    """A file failed to parse or a field failed validation."""


def canonical_json(record: Any) -> str:
    """Deterministic JSON: sorted keys, compact separators."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


# ---------------------------------------------------------------------------
# low-level field access


def _expect(value: Any, kind: type | tuple[type, ...], path: str, what: str) -> Any:
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaError(f"{path}: expected {what}, got {type(value).__name__}")
    return value


def _get(mapping: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in mapping:
        raise SchemaError(f"{path}: missing required field {key!r}")
    return mapping[key]


def _number(mapping: Mapping[str, Any], key: str, path: str) -> float:
    return _expect(_get(mapping, key, path), float, f"{path}.{key}", "a number")


def _string(mapping: Mapping[str, Any], key: str, path: str) -> str:
    return _expect(_get(mapping, key, path), str, f"{path}.{key}", "a string")


def _mapping(value: Any, path: str) -> Mapping[str, Any]:
    return _expect(value, dict, path, "an object")


def _sequence(value: Any, path: str) -> Sequence[Any]:
    return _expect(value, list, path, "an array")


def _number_map(value: Any, path: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for key, entry in _mapping(value, path).items():
        out[key] = _expect(entry, float, f"{path}.{key}", "a number")
    return out


# ---------------------------------------------------------------------------
# pools and market config


def pool_to_record(pool: ResourcePool) -> dict[str, Any]:
    return {
        "id": pool.id,
        "cluster": pool.cluster,
        "resource_kind": pool.resource_kind,
        "unit": pool.unit,
        "cost": pool.cost,
        "utilization": pool.utilization,
    }


def pool_from_record(record: Any, path: str = "pool") -> ResourcePool:
    body = _mapping(record, path)
    try:
        return ResourcePool(
            id=_string(body, "id", path),
            cluster=_string(body, "cluster", path),
            resource_kind=_string(body, "resource_kind", path),
            unit=body.get("unit", ""),
            cost=_number(body, "cost", path),
            utilization=_number(body, "utilization", path),
        )
    except ValidationError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def config_to_record(config: MarketConfig) -> dict[str, Any]:
    return {
        "alpha": config.alpha,
        "delta": config.delta,
        "increment_mode": config.increment_mode.value,
        "normalize_increments": config.normalize_increments,
        "max_rounds": config.max_rounds,
        "price_ceiling": (
            dict(config.price_ceiling.prices) if config.price_ceiling is not None else None
        ),
        "reserve_curve": {
            "k": config.reserve_curve.k,
            "m": config.reserve_curve.m,
            "psi_star": config.reserve_curve.psi_star,
        },
    }


def config_from_record(record: Any, path: str = "config") -> MarketConfig:
    body = _mapping(record, path)
    kwargs: dict[str, Any] = {}
    if "alpha" in body:
        kwargs["alpha"] = _number(body, "alpha", path)
    if "delta" in body:
        kwargs["delta"] = _number(body, "delta", path)
    if "increment_mode" in body:
        raw = _string(body, "increment_mode", path)
        try:
            kwargs["increment_mode"] = IncrementMode(raw)
        except ValueError:
            choices = ", ".join(mode.value for mode in IncrementMode)
            raise SchemaError(f"{path}.increment_mode: must be one of {choices}") from None
    if "normalize_increments" in body:
        kwargs["normalize_increments"] = _expect(
            body["normalize_increments"], bool, f"{path}.normalize_increments", "a boolean"
        )
    if "max_rounds" in body:
        rounds = _get(body, "max_rounds", path)
        if not isinstance(rounds, int) or isinstance(rounds, bool):
            raise SchemaError(f"{path}.max_rounds: expected an integer")
        kwargs["max_rounds"] = rounds
    if body.get("price_ceiling") is not None:
        kwargs["price_ceiling"] = PriceVector(
            _number_map(body["price_ceiling"], f"{path}.price_ceiling")
        )
    if "reserve_curve" in body:
        curve = _mapping(body["reserve_curve"], f"{path}.reserve_curve")
        kwargs["reserve_curve"] = ReserveCurve(
            k=_number(curve, "k", f"{path}.reserve_curve"),
            m=_number(curve, "m", f"{path}.reserve_curve"),
            psi_star=_number(curve, "psi_star", f"{path}.reserve_curve"),
        )
    try:
        return MarketConfig(**kwargs)
    except ValidationError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class MarketFile:
    pools: tuple[ResourcePool, ...]
    config: MarketConfig
    baseline_prices: PriceVector | None
    extras: Mapping[str, Any]


def parse_market(record: Any, path: str = "market") -> MarketFile:
    body = _mapping(record, path)
    pool_records = _sequence(_get(body, "pools", path), f"{path}.pools")
    pools = tuple(
        pool_from_record(entry, f"{path}.pools[{i}]") for i, entry in enumerate(pool_records)
    )
    seen: set[str] = set()
    for i, pool in enumerate(pools):
        if pool.id in seen:
            raise SchemaError(f"{path}.pools[{i}]: duplicate pool id {pool.id!r}")
        seen.add(pool.id)
    config = config_from_record(body.get("config", {}), f"{path}.config")
    baseline = None
    if body.get("baseline_prices") is not None:
        baseline = PriceVector(_number_map(body["baseline_prices"], f"{path}.baseline_prices"))
    return MarketFile(
        pools=pools,
        config=config,
        baseline_prices=baseline,
        extras=body.get("service", {}),
    )


def load_market_file(path: str | Path) -> MarketFile:
    return parse_market(_load_json(path), str(path))


# ---------------------------------------------------------------------------
# bids


def bid_to_record(bid: Bid) -> dict[str, Any]:
    record: dict[str, Any] = {
        "user_id": bid.user_id,
        "bundles": [dict(bundle.quantities) for bundle in bid.bundles],
        "willingness": bid.willingness,
    }
    if bid.budget is not None:
        record["budget"] = bid.budget
    return record


def bid_from_record(record: Any, path: str = "bid") -> Bid:
    body = _mapping(record, path)
    bundle_records = _sequence(_get(body, "bundles", path), f"{path}.bundles")
    bundles = tuple(
        BundleVector(_number_map(entry, f"{path}.bundles[{i}]"))
        for i, entry in enumerate(bundle_records)
    )
    budget = body.get("budget")
    try:
        return Bid(
            user_id=_string(body, "user_id", path),
            bundles=bundles,
            willingness=_number(body, "willingness", path),
            budget=_expect(budget, float, f"{path}.budget", "a number") if budget is not None else None,
        )
    except ValidationError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def parse_bids(record: Any, path: str = "bids") -> tuple[Bid, ...]:
    body = _mapping(record, path)
    entries = _sequence(_get(body, "bids", path), f"{path}.bids")
    bids = tuple(
        bid_from_record(entry, f"{path}.bids[{i}]") for i, entry in enumerate(entries)
    )
    seen: set[str] = set()
    for i, bid in enumerate(bids):
        if bid.user_id in seen:
            raise SchemaError(f"{path}.bids[{i}]: duplicate user_id {bid.user_id!r}")
        seen.add(bid.user_id)
    return bids


def load_bids_file(path: str | Path) -> tuple[Bid, ...]:
    return parse_bids(_load_json(path), str(path))


def dump_bids_file(path: str | Path, bids: Sequence[Bid]) -> None:
    record = {"bids": [bid_to_record(bid) for bid in bids]}
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _load_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc


# ---------------------------------------------------------------------------
# outcome / report / stats records


def outcome_to_record(outcome: AuctionOutcome) -> dict[str, Any]:
    return {
        "status": outcome.status.value,
        "final_prices": dict(outcome.final_prices.prices),
        "allocations": {
            user_id: dict(bundle.quantities)
            for user_id, bundle in outcome.allocations.items()
        },
        "winners": sorted(outcome.winners),
        "losers": sorted(outcome.losers),
        "rounds": outcome.rounds,
        "trajectory": [
            {
                "round": point.round,
                "prices": dict(point.prices.prices),
                "excess_demand": dict(point.excess_demand.quantities),
            }
            for point in outcome.trajectory
        ],
    }


def feasibility_to_record(report: FeasibilityReport) -> dict[str, Any]:
    return {
        "passed": report.passed,
        "violations": [
            {"constraint": v.constraint, "subject": v.subject, "detail": v.detail}
            for v in report.violations
        ],
    }


def stats_to_record(stats: SettlementStats) -> dict[str, Any]:
    return {
        "premiums": dict(stats.premiums),
        "median_premium": stats.median_premium,
        "mean_premium": stats.mean_premium,
        "percent_settled": stats.percent_settled,
        "utilization_records": [
            {
                "user_id": r.user_id,
                "pool_id": r.pool_id,
                "side": r.side.value,
                "utilization": r.utilization,
            }
            for r in stats.utilization_records
        ],
        "price_ratios": dict(stats.price_ratios),
    }
