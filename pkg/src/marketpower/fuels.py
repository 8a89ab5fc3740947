"""Fuel and carbon cost series per unit technology."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class FuelParams:
    # tCO2 per MWh thermal
    ef_gas: float = 0.202
    ef_hard_coal: float = 0.340
    ef_lignite: float = 0.364
    # no traded lignite index exists; flat mine-mouth cost, EUR/MWh thermal
    lignite_price: float = 4.0

    def emission_factor(self, fuel_type) -> float:
        if fuel_type in ("ccgt", "gas_other"):
            return self.ef_gas
        if fuel_type == "hard_coal":
            return self.ef_hard_coal
        if fuel_type == "lignite":
            return self.ef_lignite
        raise DomainError(f"unknown fuel type {fuel_type!r}")


def carbon_adjust(fuel_price, emission_factor, carbon_price):
    """Fuel price plus the carbon cost of burning one MWh thermal."""
    if np.any(np.asarray(emission_factor) < 0):
        raise DomainError("emission factor must be non-negative")
    if np.any(np.asarray(fuel_price) < 0) or np.any(np.asarray(carbon_price) < 0):
        raise DomainError("fuel and carbon prices must be non-negative")
    return np.asarray(fuel_price) + np.asarray(emission_factor) * np.asarray(carbon_price)


def fuel_series(fuel_type, market, params: FuelParams) -> np.ndarray:
    if fuel_type in ("ccgt", "gas_other"):
        return np.asarray(market.gas_price, dtype=float)
    if fuel_type == "hard_coal":
        return np.asarray(market.coal_price, dtype=float)
    if fuel_type == "lignite":
        return np.full(len(market), params.lignite_price)
    raise DomainError(f"unknown fuel type {fuel_type!r}")


def carbon_series(fuel_type, market, params: FuelParams) -> np.ndarray:
    """Carbon cost in EUR per MWh thermal."""
    return params.emission_factor(fuel_type) * np.asarray(market.carbon_price, dtype=float)


def unit_variable_cost(unit, market, params: FuelParams) -> np.ndarray:
    """Nominal EUR/MWh electric for every hour."""
    th = fuel_series(unit.fuel_type, market, params) + carbon_series(unit.fuel_type, market, params)
    return th / unit.efficiency
