"""The automated bidder proxy.

Real participants submit a bid once; during the simulated clock rounds a
proxy answers on their behalf. The proxy is deliberately simple: at the
current prices it picks the cheapest bundle from the user's XOR set and
demands it if it is acceptable, otherwise it demands nothing. The same
rule serves sellers: for a seller the "cheapest" bundle is the one with
the most negative cost, i.e. the highest revenue, and it is acceptable
once that revenue covers the stated minimum.
"""

from __future__ import annotations

from dataclasses import dataclass

from compute_exchange.core import Bid, BundleVector, PriceVector, ValidationError, bundle_cost


@dataclass(frozen=True)
class ProxyResponse:
    """A proxy's answer for one round: a bundle demand or nothing.

    ``active`` is true exactly when a bundle was chosen; the zero
    response means the user sits this round out (and, at settlement,
    loses).
    """

    demand: BundleVector
    chosen_index: int | None
    active: bool

    def __post_init__(self) -> None:
        consistent = self.active == (self.chosen_index is not None) == (not self.demand.is_zero)
        if not consistent:
            raise ValidationError(
                "proxy response: active, chosen_index, and demand must agree"
            )

    @classmethod
    def inactive(cls) -> ProxyResponse:
        return cls(demand=BundleVector.zero(), chosen_index=None, active=False)


def evaluate_proxy(bid: Bid, prices: PriceVector) -> ProxyResponse:
    """Pick the user's cheapest acceptable bundle at the given prices.

    The cheapest bundle is the argmin of bundle cost over the XOR set,
    ties broken by lowest list index so auction runs replay identically.
    It is accepted when its cost is at most the user's willingness
    (inclusive: a bundle costing exactly the willingness is still taken).

    Raises:
        UnknownPoolError: if the bid references an unpriced pool.
    """
    best_index = 0
    best_cost = bundle_cost(bid.bundles[0], prices)
    for index in range(1, len(bid.bundles)):
        cost = bundle_cost(bid.bundles[index], prices)
        if cost < best_cost:
            best_index = index
            best_cost = cost
    if best_cost <= bid.willingness:
        return ProxyResponse(demand=bid.bundles[best_index], chosen_index=best_index, active=True)
    return ProxyResponse.inactive()
