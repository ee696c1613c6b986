"""HTTP face of the exchange service.

Thin adapter: every route delegates to ``ExchangeService`` and maps
domain errors onto status codes and a small ``{"error", "detail"}``
body. No pricing or market logic lives here.
"""

from __future__ import annotations

from fastapi import FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from compute_exchange.core import (
    Bid,
    BudgetExceededError,
    BundleVector,
    MarketError,
    UnknownPoolError,
    ValidationError,
)
from compute_exchange.files import SchemaError, outcome_to_record, pool_to_record
from compute_exchange.reserve import reserve_price
from compute_exchange.service import (
    ExchangeService,
    SettlementInfeasibleError,
    UnknownServiceError,
    UnknownWindowError,
    WindowStateError,
)

_ERROR_CODES: tuple[tuple[type[MarketError], str, int], ...] = (
    (BudgetExceededError, "budget-exceeded", 400),
    (UnknownWindowError, "unknown-window", 404),
    (UnknownPoolError, "unknown-pool", 400),
    (UnknownServiceError, "unknown-service", 400),
    (WindowStateError, "wrong-state", 409),
    (SettlementInfeasibleError, "settlement-infeasible", 500),
    (SchemaError, "invalid-input", 400),
    (ValidationError, "invalid-input", 400),
    (MarketError, "market-error", 400),
)


class BidBody(BaseModel):
    user_id: str
    bundles: list[dict[str, float]]
    willingness: float
    budget: float | None = None


class TranslateBody(BaseModel):
    services: dict[str, float] = Field(default_factory=dict)
    cluster: str


class OperatorUnauthorized(MarketError):
    pass


def create_app(service: ExchangeService) -> FastAPI:
    app = FastAPI(title="compute-exchange", version="0.1.0")
    # the bidding front end is served separately (static files)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(MarketError)
    async def market_error_handler(_: Request, exc: MarketError) -> JSONResponse:
        if isinstance(exc, OperatorUnauthorized):
            return JSONResponse(
                status_code=403, content={"error": "forbidden", "detail": str(exc)}
            )
        for kind, code, status in _ERROR_CODES:
            if isinstance(exc, kind):
                return JSONResponse(status_code=status, content={"error": code, "detail": str(exc)})
        return JSONResponse(status_code=500, content={"error": "internal", "detail": str(exc)})

    def check_token(token: str | None) -> None:
        if service.operator_token is not None and token != service.operator_token:
            raise OperatorUnauthorized("missing or invalid operator token")

    @app.get("/pools")
    def pools() -> list[dict]:
        curve = service.default_config.reserve_curve
        return [
            {**pool_to_record(pool), "reserve_price": reserve_price(pool, curve)}
            for pool in service.default_pools
        ]

    @app.get("/windows")
    def windows() -> list[dict]:
        return service.list_windows()

    @app.get("/windows/{window_id}/summary")
    def summary(window_id: str) -> dict:
        return service.market_summary(window_id)

    @app.post("/windows/{window_id}/bids")
    def submit_bid(window_id: str, body: BidBody) -> dict:
        bid = Bid(
            user_id=body.user_id,
            bundles=tuple(BundleVector(b) for b in body.bundles),
            willingness=body.willingness,
            budget=body.budget,
        )
        return service.submit_bid(window_id, bid)

    @app.post("/windows/{window_id}/translate")
    def translate(window_id: str, body: TranslateBody) -> dict:
        bundle = service.translate(window_id, body.services, body.cluster)
        summary = service.market_summary(window_id)
        prices = {
            row["pool_id"]: row["price"]
            for row in summary["pools"]
            if row["pool_id"] in bundle.quantities
        }
        cost = sum(qty * prices[pool_id] for pool_id, qty in bundle.quantities.items())
        return {
            "window_id": window_id,
            "cluster": body.cluster,
            "bundle": dict(bundle.quantities),
            "current_prices": prices,
            "cost_at_current_prices": cost,
        }

    @app.get("/windows/{window_id}/preliminary")
    def preliminary(window_id: str) -> JSONResponse:
        outcome = service.latest_preliminary(window_id)
        if outcome is None:
            return JSONResponse(
                status_code=404,
                content={"error": "no-preliminary", "detail": "no preliminary run yet"},
            )
        return JSONResponse(status_code=200, content=outcome_to_record(outcome))

    @app.post("/windows/{window_id}/close")
    def close(window_id: str, x_operator_token: str | None = Header(default=None)) -> dict:
        check_token(x_operator_token)
        window = service.close_window(window_id)
        return {"window_id": window_id, "state": window.state.value}

    @app.post("/windows/{window_id}/finalize")
    def finalize(window_id: str, x_operator_token: str | None = Header(default=None)) -> dict:
        check_token(x_operator_token)
        outcome = service.finalize_window(window_id)
        return {
            "window_id": window_id,
            "state": service.get_window(window_id).state.value,
            "status": outcome.status.value,
        }

    @app.get("/windows/{window_id}/settlement")
    def settlement(window_id: str) -> dict:
        return service.settlement_report(window_id)

    return app
