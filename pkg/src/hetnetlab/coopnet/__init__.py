"""Network-coded cooperative relaying over prime fields."""

from .cooperation import (
    CoopConfig,
    CoopRound,
    DestinationResult,
    OutageEstimate,
    bottleneck_snr,
    destination_decode,
    ml_decode,
    modulate,
    network_encode,
    outage_probability,
    relay_outage_oracle,
    relay_transmit,
    run_round,
    select_relays,
    select_sources,
    transmit,
)
from .field import PrimeField

__all__ = [
    "CoopConfig",
    "CoopRound",
    "DestinationResult",
    "OutageEstimate",
    "PrimeField",
    "bottleneck_snr",
    "destination_decode",
    "ml_decode",
    "modulate",
    "network_encode",
    "outage_probability",
    "relay_outage_oracle",
    "relay_transmit",
    "run_round",
    "select_relays",
    "select_sources",
    "transmit",
]
