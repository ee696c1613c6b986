"""Utilization-weighted reserve prices.

Reserve prices are the starting prices of the clock auction and the
operator's steering tool: congested pools start expensive so demand is
nudged toward idle capacity. The weighting curve

    phi(psi) = k ** (psi**m - psi_star**m)

multiplies a pool's base cost by a factor that is 1 exactly at the
break-even utilization psi_star, below 1 for idle pools, above 1 for
congested ones, and accelerates near full utilization: the relative
price gap between 99% and 80% utilization is much larger than between
40% and 15%, so nobody is pushed to shuffle between already-idle
clusters. The full-to-empty ratio phi(1)/phi(0) equals k exactly, which
keeps the curve's overall impact on the money supply bounded.
"""

from __future__ import annotations

import math
from typing import Iterable

from compute_exchange.core import (
    DuplicatePoolError,
    PriceVector,
    ReserveCurve,
    ResourcePool,
    ValidationError,
)

__all__ = ["ReserveCurve", "weight", "reserve_price", "reserve_vector"]


def weight(curve: ReserveCurve, utilization: float) -> float:
    """Cost multiplier for a pool at the given utilization.

    Raises:
        ValidationError: if utilization is outside [0, 1].
    """
    if not math.isfinite(utilization) or not 0.0 <= utilization <= 1.0:
        raise ValidationError(f"utilization must be in [0, 1], got {utilization}")
    exponent = math.pow(utilization, curve.m) - math.pow(curve.psi_star, curve.m)
    return math.exp(math.log(curve.k) * exponent)


def reserve_price(pool: ResourcePool, curve: ReserveCurve) -> float:
    """Weighted reserve price for one unit of the pool's resource."""
    return weight(curve, pool.utilization) * pool.cost


def reserve_vector(pools: Iterable[ResourcePool], curve: ReserveCurve) -> PriceVector:
    """Reserve prices for a whole market, keyed by pool id.

    Used as the clock auction's starting prices.

    Raises:
        DuplicatePoolError: if two pools share an id.
    """
    prices: dict[str, float] = {}
    for pool in pools:
        if pool.id in prices:
            raise DuplicatePoolError(f"duplicate pool id {pool.id!r}")
        prices[pool.id] = reserve_price(pool, curve)
    return PriceVector(prices)
