"""Physical and economic constants of the two-CSTR benchmark plant."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..exceptions import ConfigurationError

SPECIES = ("A", "P", "U", "B", "E", "D")
N_SPECIES = len(SPECIES)
N_REACTIONS = 4
GAS_CONSTANT = 8.314
SECONDS_PER_HOUR = 3600.0

# rows: species A P U B E D; columns: reactions 2A<->P, P<->2U, U+B<->E, U+D->2A
STOICHIOMETRY = np.array(
    [
        [-2.0, 0.0, 0.0, 2.0],
        [1.0, -1.0, 0.0, 0.0],
        [0.0, 2.0, -1.0, -1.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
    ]
)


def _vec(value, n, name):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ConfigurationError(f"{name} must have {n} entries, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ReactorParams:
    """Constants of the plant; arrays are ordered A, P, U, B, E, D (species)
    or 1..4 (reactions).

    Units: rate constants in L/mol/s or 1/s, energies in J/mol, volumes in
    L, flows in L/s, concentrations in mol/L, temperatures in K, heat
    capacities in J/kg/K, density in kg/L, prices in USD/mol or USD/kg.
    """

    k0: np.ndarray
    activation_energy: np.ndarray
    heat_of_reaction: np.ndarray
    volume: tuple = (1.0, 1.0)
    feed_flow: float = 0.01
    feed_concentration: np.ndarray = field(default_factory=lambda: np.zeros(N_SPECIES))
    side_flow: float = 0.005
    side_concentration: np.ndarray = field(default_factory=lambda: np.zeros(N_SPECIES))
    inlet_temperature: tuple = (423.0, 423.0)
    density: float = 1.0
    heat_capacity: float = 4000.0
    coolant_heat_capacity: float = 4184.0
    coolant_in: float = 288.0
    coolant_out: float = 298.0
    relative_volatility: np.ndarray = field(default_factory=lambda: np.ones(N_SPECIES))
    k_p: float = 1.0
    latent_heat: np.ndarray = field(default_factory=lambda: np.full(N_SPECIES, 3.0e4))
    steam_latent_heat: float = 2.26e6
    price: np.ndarray = field(default_factory=lambda: np.zeros(N_SPECIES))
    coolant_price: float = 0.0
    steam_price: float = 0.0
    transfer_price: np.ndarray = field(default_factory=lambda: np.zeros(N_SPECIES))
    reverse_factor: float = 0.01
    hours_per_year: float = 8000.0

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        for name in ("k0", "activation_energy", "heat_of_reaction"):
            set_(name, _vec(getattr(self, name), N_REACTIONS, name))
        for name in ("feed_concentration", "side_concentration", "relative_volatility",
                     "latent_heat", "price", "transfer_price"):
            set_(name, _vec(getattr(self, name), N_SPECIES, name))
        set_("volume", tuple(float(v) for v in self.volume))
        t_in = np.broadcast_to(np.asarray(self.inlet_temperature, dtype=float), (2,))
        set_("inlet_temperature", tuple(float(v) for v in t_in))
        if len(self.volume) != 2:
            raise ConfigurationError("volume needs one entry per reactor")
        if np.any(self.k0 < 0) or np.any(self.activation_energy < 0):
            raise ConfigurationError("pre-exponential factors and activation energies must be >= 0")
        positive = ("feed_flow", "density", "heat_capacity", "coolant_heat_capacity",
                    "k_p", "steam_latent_heat", "hours_per_year")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if min(self.inlet_temperature) <= 0:
            raise ConfigurationError("inlet temperatures must be positive")
        if self.side_flow < 0 or min(self.volume) <= 0:
            raise ConfigurationError("volumes must be positive and side_flow nonnegative")
        if not self.coolant_out > self.coolant_in:
            raise ConfigurationError("coolant_out must exceed coolant_in")
        if np.any(self.feed_concentration < 0) or np.any(self.side_concentration < 0):
            raise ConfigurationError("feed concentrations must be nonnegative")
        if np.any(self.relative_volatility <= 0) or np.any(self.latent_heat < 0):
            raise ConfigurationError("volatilities must be positive, latent heats nonnegative")

    @property
    def seconds_per_year(self) -> float:
        return self.hours_per_year * SECONDS_PER_HOUR

    def replace(self, **changes) -> "ReactorParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else (list(v) if isinstance(v, tuple) else v)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ReactorParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown reactor parameter(s): {sorted(unknown)}")
        return cls(**data)
