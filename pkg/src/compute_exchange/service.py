"""The long-running exchange: auction windows, bids, and settlements.

A window opens with a pool set and market parameters, publishes reserve
prices as the initial market prices, and collects bids. While it is
open, a background loop periodically re-simulates the auction on a
snapshot of the current bids and republishes the resulting preliminary
prices so bidders can react before the close. At close, one last
simulation fixes the binding prices and allocations.

Everything that changes state is appended to a line-delimited event
ledger. Replaying the ledger re-runs the final simulation from the same
inputs and must reproduce the recorded settlement byte for byte; this is
the audit contract for a market that moves real quota.

Concurrency: the service serializes mutations with one lock. Preliminary
and final simulations run on immutable snapshots taken under the lock,
so a long simulation never blocks bid submission.
"""

from __future__ import annotations

import itertools
import json
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

from compute_exchange.clock import run_auction
from compute_exchange.core import (
    AuctionOutcome,
    AuctionStatus,
    Bid,
    BundleVector,
    MarketConfig,
    MarketError,
    PriceVector,
    ResourcePool,
    UnknownPoolError,
    ValidationError,
)
from compute_exchange.files import (
    MarketFile,
    SchemaError,
    bid_from_record,
    bid_to_record,
    canonical_json,
    config_from_record,
    config_to_record,
    feasibility_to_record,
    load_market_file,
    outcome_to_record,
    pool_from_record,
    pool_to_record,
    stats_to_record,
)
from compute_exchange.reserve import reserve_vector
from compute_exchange.settlement import settlement_stats, verify_feasibility


class WindowStateError(MarketError):
    """An operation is not valid in the window's current state."""


class UnknownWindowError(MarketError):
    """No window with the given id."""


class UnknownServiceError(MarketError):
    """A requirement request names a service with no translation table."""


class SettlementInfeasibleError(MarketError):
    """A converged final outcome failed verification; settlement aborted."""


class WindowState(str, Enum):
    OPEN = "open"
    CLOSED = "closed"
    SETTLED = "settled"


@dataclass(frozen=True)
class RequirementTranslation:
    """Linear translation from one service unit to raw resource amounts.

    ``coefficients`` maps a resource kind (cpu/ram/disk) to the covering
    amount needed per requested service unit.
    """

    service_name: str
    coefficients: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", dict(self.coefficients))
        for kind, amount in self.coefficients.items():
            if amount < 0:
                raise ValidationError(
                    f"translation {self.service_name}: coefficient for {kind} must be >= 0"
                )


def translate_requirements(
    request: Mapping[str, float],
    tables: Sequence[RequirementTranslation],
    pools: Sequence[ResourcePool],
    cluster: str,
) -> BundleVector:
    """Expand service-level requirements into a demand bundle.

    Sums units times coefficients across the requested services, then
    maps each resource kind to that cluster's pool. An empty request
    yields the zero bundle (which bid validation rejects downstream).

    Raises:
        UnknownServiceError: if a requested service has no table.
        UnknownPoolError: if the cluster has no pool for a needed kind.
        ValidationError: if requested units are negative.
    """
    by_name = {table.service_name: table for table in tables}
    kind_totals: dict[str, float] = {}
    for service_name, units in request.items():
        if units < 0:
            raise ValidationError(f"requested units for {service_name!r} must be >= 0")
        table = by_name.get(service_name)
        if table is None:
            raise UnknownServiceError(f"no translation table for service {service_name!r}")
        for kind, per_unit in table.coefficients.items():
            kind_totals[kind] = kind_totals.get(kind, 0.0) + units * per_unit

    pool_by_kind = {pool.resource_kind: pool.id for pool in pools if pool.cluster == cluster}
    quantities: dict[str, float] = {}
    for kind, total in kind_totals.items():
        if total == 0.0:
            continue
        if kind not in pool_by_kind:
            raise UnknownPoolError(f"{cluster}/{kind}", "cluster has no pool of this kind")
        quantities[pool_by_kind[kind]] = total
    return BundleVector(quantities)


@dataclass
class AuctionWindow:
    """One bid-collection window and its auction results."""

    window_id: str
    pools: tuple[ResourcePool, ...]
    config: MarketConfig
    opened_at: float
    closes_at: float
    reserve_prices: PriceVector
    state: WindowState = WindowState.OPEN
    bids: dict[str, Bid] = field(default_factory=dict)
    preliminary: AuctionOutcome | None = None
    final: AuctionOutcome | None = None
    last_preliminary_at: float | None = None

    @property
    def pool_ids(self) -> frozenset[str]:
        return frozenset(pool.id for pool in self.pools)


@dataclass(frozen=True)
class ServiceSettings:
    """Operational knobs that are not market parameters."""

    preliminary_cadence_seconds: float = 60.0
    window_duration_seconds: float = 3600.0
    translations: tuple[RequirementTranslation, ...] = ()


def settings_from_market_file(market: MarketFile) -> ServiceSettings:
    extras = market.extras
    path = "market.service"
    translations = []
    for i, entry in enumerate(extras.get("translations", [])):
        if not isinstance(entry, dict):
            raise SchemaError(f"{path}.translations[{i}]: expected an object")
        try:
            translations.append(
                RequirementTranslation(
                    service_name=entry["service_name"],
                    coefficients=entry.get("coefficients", {}),
                )
            )
        except (KeyError, TypeError, ValidationError) as exc:
            raise SchemaError(f"{path}.translations[{i}]: {exc}") from exc
    return ServiceSettings(
        preliminary_cadence_seconds=float(extras.get("preliminary_cadence_seconds", 60.0)),
        window_duration_seconds=float(extras.get("window_duration_seconds", 3600.0)),
        translations=tuple(translations),
    )


class Ledger:
    """Append-only, line-delimited event log with deterministic payloads."""

    def __init__(self, path: str | Path | None) -> None:
        self.path = Path(path) if path is not None else None
        self._seq = itertools.count()
        self._events: list[dict[str, Any]] = []

    def append(self, event: str, ts: float, payload: Mapping[str, Any]) -> None:
        record = {"seq": next(self._seq), "event": event, "ts": ts, "payload": payload}
        self._events.append(record)
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(canonical_json(record) + "\n")

    @property
    def events(self) -> tuple[dict[str, Any], ...]:
        return tuple(self._events)


def read_ledger(path: str | Path) -> list[dict[str, Any]]:
    events = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid ledger line: {exc.msg}") from exc
    return events


class ExchangeService:
    """Window lifecycle, bid intake, and settlement around the clock engine."""

    def __init__(
        self,
        pools: Sequence[ResourcePool],
        config: MarketConfig,
        *,
        settings: ServiceSettings | None = None,
        baseline_prices: PriceVector | None = None,
        ledger_path: str | Path | None = None,
        operator_token: str | None = None,
        clock=time.time,
    ) -> None:
        self.default_pools = tuple(pools)
        self.default_config = config
        self.settings = settings or ServiceSettings()
        self.baseline_prices = baseline_prices
        self.operator_token = operator_token
        self.clock = clock
        self.ledger = Ledger(ledger_path)
        self.windows: dict[str, AuctionWindow] = {}
        self._lock = threading.RLock()
        self._window_counter = itertools.count(1)
        self._scheduler: threading.Thread | None = None
        self._stop = threading.Event()

    # -- lifecycle ---------------------------------------------------------

    def open_window(
        self,
        duration_seconds: float | None = None,
        pools: Sequence[ResourcePool] | None = None,
        config: MarketConfig | None = None,
    ) -> AuctionWindow:
        """Open a new window; reserve prices become the published prices."""
        pools = tuple(pools if pools is not None else self.default_pools)
        config = config if config is not None else self.default_config
        if not pools:
            raise ValidationError("cannot open a window with no pools")
        duration = (
            duration_seconds
            if duration_seconds is not None
            else self.settings.window_duration_seconds
        )
        if duration <= 0:
            raise ValidationError(f"window duration must be > 0, got {duration}")
        reserves = reserve_vector(pools, config.reserve_curve)  # raises on duplicate ids
        with self._lock:
            now = self.clock()
            window = AuctionWindow(
                window_id=f"w{next(self._window_counter):04d}",
                pools=pools,
                config=config,
                opened_at=now,
                closes_at=now + duration,
                reserve_prices=reserves,
                # reserves are the initial published prices; the first
                # preliminary re-publication comes one cadence later
                last_preliminary_at=now,
            )
            self.windows[window.window_id] = window
            self.ledger.append(
                "window_opened",
                now,
                {
                    "window_id": window.window_id,
                    "opened_at": window.opened_at,
                    "closes_at": window.closes_at,
                    "pools": [pool_to_record(pool) for pool in pools],
                    "config": config_to_record(config),
                    "reserve_prices": dict(reserves.prices),
                },
            )
            return window

    def get_window(self, window_id: str) -> AuctionWindow:
        try:
            return self.windows[window_id]
        except KeyError:
            raise UnknownWindowError(f"no window {window_id!r}") from None

    def list_windows(self) -> list[dict[str, Any]]:
        with self._lock:
            return [
                {
                    "window_id": w.window_id,
                    "state": w.state.value,
                    "opened_at": w.opened_at,
                    "closes_at": w.closes_at,
                }
                for w in self.windows.values()
            ]

    def latest_preliminary(self, window_id: str) -> AuctionOutcome | None:
        with self._lock:
            return self.get_window(window_id).preliminary

    def submit_bid(self, window_id: str, bid: Bid) -> dict[str, Any]:
        """Store a bid, replacing any earlier bid from the same user."""
        with self._lock:
            window = self.get_window(window_id)
            if window.state != WindowState.OPEN:
                raise WindowStateError(f"window {window_id} is {window.state.value}, not open")
            unknown = bid.referenced_pools - window.pool_ids
            if unknown:
                raise UnknownPoolError(sorted(unknown)[0], f"not traded in window {window_id}")
            replaced = bid.user_id in window.bids
            window.bids[bid.user_id] = bid
            now = self.clock()
            self.ledger.append(
                "bid_submitted",
                now,
                {"window_id": window_id, "bid": bid_to_record(bid), "replaced": replaced},
            )
            return {
                "window_id": window_id,
                "user_id": bid.user_id,
                "replaced": replaced,
                "bid": bid_to_record(bid),
            }

    def translate(
        self, window_id: str, request: Mapping[str, float], cluster: str
    ) -> BundleVector:
        window = self.get_window(window_id)
        return translate_requirements(
            request, self.settings.translations, window.pools, cluster
        )

    def run_preliminary(self, window_id: str) -> AuctionOutcome:
        """Simulate the auction on a snapshot of current bids and publish it.

        Does not bind anyone; non-convergence is reported in the outcome's
        status, never raised.
        """
        with self._lock:
            window = self.get_window(window_id)
            if window.state != WindowState.OPEN:
                raise WindowStateError(f"window {window_id} is {window.state.value}, not open")
            snapshot = list(window.bids.values())
            pools = window.pools
            config = window.config
            reserves = window.reserve_prices

        outcome = run_auction(snapshot, reserves, config, pools)

        with self._lock:
            window = self.get_window(window_id)
            if window.state == WindowState.OPEN:
                window.preliminary = outcome
                window.last_preliminary_at = self.clock()
                self.ledger.append(
                    "preliminary_published",
                    window.last_preliminary_at,
                    {
                        "window_id": window_id,
                        "status": outcome.status.value,
                        "prices": dict(outcome.final_prices.prices),
                        "bid_count": len(snapshot),
                    },
                )
        return outcome

    def close_window(self, window_id: str) -> AuctionWindow:
        with self._lock:
            window = self.get_window(window_id)
            if window.state != WindowState.OPEN:
                raise WindowStateError(f"window {window_id} is {window.state.value}, not open")
            window.state = WindowState.CLOSED
            self.ledger.append("window_closed", self.clock(), {"window_id": window_id})
            return window

    def finalize_window(self, window_id: str) -> AuctionOutcome:
        """Run the binding final simulation and settle the window.

        The final run restarts from reserve prices so the settlement does
        not depend on the preliminary cadence. A converged outcome that
        fails verification aborts the settlement (the window stays
        closed) because binding an infeasible allocation is worse than
        requiring operator intervention.
        """
        with self._lock:
            window = self.get_window(window_id)
            if window.state != WindowState.CLOSED:
                raise WindowStateError(
                    f"window {window_id} is {window.state.value}, expected closed"
                )
            snapshot = list(window.bids.values())
            pools = window.pools
            config = window.config
            reserves = window.reserve_prices

        outcome = run_auction(snapshot, reserves, config, pools)
        if outcome.status == AuctionStatus.CONVERGED:
            report = verify_feasibility(snapshot, outcome)
            if not report.passed:
                raise SettlementInfeasibleError(
                    f"final outcome for {window_id} failed verification: "
                    + "; ".join(v.detail for v in report.violations)
                )

        with self._lock:
            window = self.get_window(window_id)
            if window.state != WindowState.CLOSED:
                raise WindowStateError(f"window {window_id} was finalized concurrently")
            window.final = outcome
            window.state = WindowState.SETTLED
            self.ledger.append(
                "window_finalized",
                self.clock(),
                {"window_id": window_id, "outcome": outcome_to_record(outcome)},
            )
        return outcome

    # -- read side ---------------------------------------------------------

    def market_summary(self, window_id: str) -> dict[str, Any]:
        """Per-pool prices and activity counts for the summary page."""
        with self._lock:
            window = self.get_window(window_id)
            now = self.clock()
            if window.state == WindowState.SETTLED and window.final is not None:
                stage, price_source = "final", window.final.final_prices
            elif window.preliminary is not None:
                stage, price_source = "preliminary", window.preliminary.final_prices
            else:
                stage, price_source = "reserve", window.reserve_prices

            rows = []
            for pool in sorted(window.pools, key=lambda p: p.id):
                bid_users = 0
                offer_users = 0
                for bid in window.bids.values():
                    if any(b.get(pool.id) > 0 for b in bid.bundles):
                        bid_users += 1
                    if any(b.get(pool.id) < 0 for b in bid.bundles):
                        offer_users += 1
                rows.append(
                    {
                        "pool_id": pool.id,
                        "cluster": pool.cluster,
                        "resource_kind": pool.resource_kind,
                        "unit": pool.unit,
                        "price": price_source.prices.get(pool.id, 0.0),
                        "price_stage": stage,
                        "reserve_price": window.reserve_prices.prices[pool.id],
                        "active_bids": bid_users,
                        "active_offers": offer_users,
                        "utilization": pool.utilization,
                    }
                )
            return {
                "window_id": window_id,
                "state": window.state.value,
                "opened_at": window.opened_at,
                "closes_at": window.closes_at,
                "seconds_remaining": max(0.0, window.closes_at - now)
                if window.state == WindowState.OPEN
                else 0.0,
                "pools": rows,
            }

    def settlement_report(self, window_id: str) -> dict[str, Any]:
        """Final outcome plus analytics, once a window is settled."""
        with self._lock:
            window = self.get_window(window_id)
            if window.state != WindowState.SETTLED or window.final is None:
                raise WindowStateError(f"window {window_id} is not settled")
            outcome = window.final
            bids = list(window.bids.values())
            pools = window.pools

        record: dict[str, Any] = {
            "window_id": window_id,
            "outcome": outcome_to_record(outcome),
            "stats": None,
            "stats_unavailable_reason": None,
        }
        if outcome.status != AuctionStatus.CONVERGED:
            record["stats_unavailable_reason"] = (
                f"auction ended with status {outcome.status.value}; operator intervention needed"
            )
            return record
        baseline = self.baseline_prices or PriceVector(
            {pool.id: pool.cost for pool in pools}
        )
        report = verify_feasibility(bids, outcome)
        record["feasibility"] = feasibility_to_record(report)
        stats = settlement_stats(bids, outcome, pools, baseline)
        record["stats"] = stats_to_record(stats)
        return record

    # -- background loop ---------------------------------------------------

    def poll(self) -> None:
        """One scheduler tick: auto-close due windows, refresh preliminaries."""
        now = self.clock()
        with self._lock:
            due_close = [
                w.window_id
                for w in self.windows.values()
                if w.state == WindowState.OPEN and now >= w.closes_at
            ]
            due_preliminary = [
                w.window_id
                for w in self.windows.values()
                if w.state == WindowState.OPEN
                and now < w.closes_at
                and (
                    w.last_preliminary_at is None
                    or now - w.last_preliminary_at >= self.settings.preliminary_cadence_seconds
                )
            ]
        for window_id in due_close:
            try:
                self.close_window(window_id)
            except WindowStateError:
                pass
        for window_id in due_preliminary:
            try:
                self.run_preliminary(window_id)
            except WindowStateError:
                pass

    def start_scheduler(self, poll_interval: float = 0.25) -> None:
        if self._scheduler is not None:
            return
        self._stop.clear()

        def loop() -> None:
            while not self._stop.wait(poll_interval):
                self.poll()

        self._scheduler = threading.Thread(target=loop, name="exchange-scheduler", daemon=True)
        self._scheduler.start()

    def stop_scheduler(self) -> None:
        if self._scheduler is None:
            return
        self._stop.set()
        self._scheduler.join()
        self._scheduler = None


def service_from_market_file(
    path: str | Path,
    *,
    ledger_path: str | Path | None = None,
    operator_token: str | None = None,
    clock=time.time,
) -> ExchangeService:
    market = load_market_file(path)
    return ExchangeService(
        market.pools,
        market.config,
        settings=settings_from_market_file(market),
        baseline_prices=market.baseline_prices,
        ledger_path=ledger_path,
        operator_token=operator_token,
        clock=clock,
    )


# ---------------------------------------------------------------------------
# ledger replay


@dataclass(frozen=True)
class ReplayCheck:
    """Outcome of re-deriving one settled window from its ledger events."""

    window_id: str
    recorded: str
    replayed: str

    @property
    def match(self) -> bool:
        return self.recorded == self.replayed


def replay_ledger(path: str | Path) -> list[ReplayCheck]:
    """Re-run every settled window found in a ledger file.

    Rebuilds each window's pools, config, and bid book from the events
    (in ledger order, so float summation order is identical), re-runs the
    final simulation, and compares the canonical serialization against
    the recorded outcome. A mismatch means the ledger and the engine
    disagree, which should never happen.
    """
    opened: dict[str, dict[str, Any]] = {}
    books: dict[str, dict[str, Bid]] = {}
    checks: list[ReplayCheck] = []
    for event in read_ledger(path):
        kind = event.get("event")
        payload = event.get("payload", {})
        window_id = payload.get("window_id")
        if kind == "window_opened":
            opened[window_id] = payload
            books[window_id] = {}
        elif kind == "bid_submitted":
            bid = bid_from_record(payload["bid"], f"ledger bid for {window_id}")
            books[window_id][bid.user_id] = bid
        elif kind == "window_finalized":
            meta = opened[window_id]
            pools = tuple(
                pool_from_record(p, f"ledger pool for {window_id}") for p in meta["pools"]
            )
            config = config_from_record(meta["config"], f"ledger config for {window_id}")
            reserves = reserve_vector(pools, config.reserve_curve)
            outcome = run_auction(list(books[window_id].values()), reserves, config, pools)
            checks.append(
                ReplayCheck(
                    window_id=window_id,
                    recorded=canonical_json(payload["outcome"]),
                    replayed=canonical_json(outcome_to_record(outcome)),
                )
            )
    return checks
