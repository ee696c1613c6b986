"""Tests for the HTTP API against an in-process service."""

import pytest
from fastapi.testclient import TestClient

from compute_exchange.api import create_app
from compute_exchange.core import ResourcePool
from compute_exchange.service import (
    ExchangeService,
    RequirementTranslation,
    ServiceSettings,
)

from conftest import E1_FINAL, e1_config, e1_pool


@pytest.fixture
def service(tmp_path):
    pools = [
        e1_pool(),
        ResourcePool(
            id="c1/ram", cluster="c1", resource_kind="ram", unit="GiB", cost=0.5, utilization=0.6
        ),
    ]
    return ExchangeService(
        pools,
        e1_config(),
        settings=ServiceSettings(
            translations=(
                RequirementTranslation(
                    service_name="blobstore", coefficients={"cpu": 0.5, "ram": 2.0}
                ),
            )
        ),
        ledger_path=tmp_path / "ledger.jsonl",
        operator_token="secret",
    )


@pytest.fixture
def client(service):
    return TestClient(create_app(service))


@pytest.fixture
def window_id(service):
    return service.open_window(duration_seconds=600).window_id


def post_e1_bids(client, window_id):
    for body in (
        {"user_id": "A", "bundles": [{"c1/cpu": 1}], "willingness": 10.0},
        {"user_id": "B", "bundles": [{"c1/cpu": 1}], "willingness": 6.0},
        {"user_id": "S", "bundles": [{"c1/cpu": -1}], "willingness": -2.0},
    ):
        response = client.post(f"/windows/{window_id}/bids", json=body)
        assert response.status_code == 200, response.text


def test_pools_lists_costs_utilizations_reserves(client):
    rows = client.get("/pools").json()
    assert {row["id"] for row in rows} == {"c1/cpu", "c1/ram"}
    cpu = next(row for row in rows if row["id"] == "c1/cpu")
    assert cpu["cost"] == 2.818
    assert cpu["utilization"] == 0.6
    assert cpu["reserve_price"] == pytest.approx(2.818)


def test_windows_listing(client, window_id):
    rows = client.get("/windows").json()
    assert [row["window_id"] for row in rows] == [window_id]
    assert rows[0]["state"] == "open"


def test_summary_round_trip(client, window_id):
    summary = client.get(f"/windows/{window_id}/summary").json()
    assert summary["state"] == "open"
    cpu = next(row for row in summary["pools"] if row["pool_id"] == "c1/cpu")
    assert cpu["price"] == pytest.approx(2.818)
    assert cpu["price_stage"] == "reserve"


def test_unknown_window_is_404(client):
    response = client.get("/windows/nope/summary")
    assert response.status_code == 404
    assert response.json()["error"] == "unknown-window"


def test_submit_bid_and_budget_rejection(client, window_id):
    ok = client.post(
        f"/windows/{window_id}/bids",
        json={"user_id": "A", "bundles": [{"c1/cpu": 1}], "willingness": 10.0, "budget": 15.0},
    )
    assert ok.status_code == 200
    assert ok.json()["replaced"] is False

    over = client.post(
        f"/windows/{window_id}/bids",
        json={"user_id": "C", "bundles": [{"c1/cpu": 1}], "willingness": 150.0, "budget": 100.0},
    )
    assert over.status_code == 400
    assert over.json()["error"] == "budget-exceeded"


def test_submit_rejects_unknown_pool(client, window_id):
    response = client.post(
        f"/windows/{window_id}/bids",
        json={"user_id": "A", "bundles": [{"ghost": 1}], "willingness": 1.0},
    )
    assert response.status_code == 400
    assert response.json()["error"] == "unknown-pool"


def test_translate_two_step(client, window_id):
    response = client.post(
        f"/windows/{window_id}/translate",
        json={"services": {"blobstore": 4}, "cluster": "c1"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["bundle"] == {"c1/cpu": 2.0, "c1/ram": 8.0}
    assert body["current_prices"]["c1/cpu"] == pytest.approx(2.818)
    assert body["cost_at_current_prices"] == pytest.approx(2 * 2.818 + 8 * 0.5)

    missing = client.post(
        f"/windows/{window_id}/translate",
        json={"services": {"mystery": 1}, "cluster": "c1"},
    )
    assert missing.status_code == 400
    assert missing.json()["error"] == "unknown-service"


def test_preliminary_endpoint(client, service, window_id):
    assert client.get(f"/windows/{window_id}/preliminary").status_code == 404
    post_e1_bids(client, window_id)
    service.run_preliminary(window_id)
    body = client.get(f"/windows/{window_id}/preliminary").json()
    assert body["status"] == "converged"
    assert body["final_prices"]["c1/cpu"] == E1_FINAL


def test_operator_lifecycle_requires_token(client, window_id):
    assert client.post(f"/windows/{window_id}/close").status_code == 403
    assert (
        client.post(
            f"/windows/{window_id}/close", headers={"X-Operator-Token": "wrong"}
        ).status_code
        == 403
    )
    ok = client.post(f"/windows/{window_id}/close", headers={"X-Operator-Token": "secret"})
    assert ok.status_code == 200
    assert ok.json()["state"] == "closed"


def test_full_settlement_over_http(client, window_id):
    post_e1_bids(client, window_id)
    token = {"X-Operator-Token": "secret"}
    assert client.post(f"/windows/{window_id}/close", headers=token).status_code == 200
    finalized = client.post(f"/windows/{window_id}/finalize", headers=token)
    assert finalized.status_code == 200
    assert finalized.json()["status"] == "converged"

    settlement = client.get(f"/windows/{window_id}/settlement").json()
    assert settlement["outcome"]["final_prices"]["c1/cpu"] == E1_FINAL
    assert settlement["outcome"]["winners"] == ["A", "S"]
    assert settlement["stats"]["premiums"]["A"] == pytest.approx(0.5617374328940946)

    # settled windows refuse further bids
    rejected = client.post(
        f"/windows/{window_id}/bids",
        json={"user_id": "late", "bundles": [{"c1/cpu": 1}], "willingness": 1.0},
    )
    assert rejected.status_code == 409
    assert rejected.json()["error"] == "wrong-state"
