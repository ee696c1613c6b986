"""Market-based provisioning of cluster compute resources.

An internal exchange that prices and allocates bundles of cluster
resources (CPU, RAM, disk per cluster) across competing users via a
simulated ascending clock auction with utilization-weighted reserve
prices.
"""

from compute_exchange.core import (
    AuctionOutcome,
    AuctionStatus,
    Bid,
    BidderClass,
    BudgetExceededError,
    BundleVector,
    DuplicatePoolError,
    IncrementMode,
    MarketConfig,
    MarketError,
    PriceVector,
    ReserveCurve,
    ResourcePool,
    TrajectoryPoint,
    UnknownPoolError,
    ValidationError,
    aggregate_demand,
    bundle_cost,
    classify_bidder,
)
from compute_exchange.clock import RoundState, price_increment, run_auction
from compute_exchange.proxy import ProxyResponse, evaluate_proxy
from compute_exchange.reserve import reserve_price, reserve_vector, weight
from compute_exchange.settlement import (
    FeasibilityReport,
    InfeasibleOutcomeError,
    SettlementStats,
    UndefinedPremiumError,
    bid_premium,
    settlement_stats,
    verify_feasibility,
)

__all__ = [
    "AuctionOutcome",
    "AuctionStatus",
    "Bid",
    "BidderClass",
    "BudgetExceededError",
    "BundleVector",
    "DuplicatePoolError",
    "FeasibilityReport",
    "IncrementMode",
    "InfeasibleOutcomeError",
    "MarketConfig",
    "MarketError",
    "PriceVector",
    "ProxyResponse",
    "ReserveCurve",
    "ResourcePool",
    "RoundState",
    "SettlementStats",
    "TrajectoryPoint",
    "UndefinedPremiumError",
    "UnknownPoolError",
    "ValidationError",
    "aggregate_demand",
    "bid_premium",
    "bundle_cost",
    "classify_bidder",
    "evaluate_proxy",
    "price_increment",
    "reserve_price",
    "reserve_vector",
    "run_auction",
    "settlement_stats",
    "verify_feasibility",
    "weight",
]

__version__ = "0.1.0"
