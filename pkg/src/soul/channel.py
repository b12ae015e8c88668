"""Drone-to-base-station uplink model and per-round timing.

The air-to-ground link mixes line-of-sight and non-line-of-sight free-space
path loss by an elevation-dependent LoS probability; the averaged loss gives
a channel gain and a Shannon uplink rate. Round time is the slowest drone's
computation plus upload time; downlink time is not modelled.

Angles are in degrees throughout.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    a: float = 9.6
    b: float = 0.28
    psi_los_db: float = 1.0
    psi_nlos_db: float = 20.0
    carrier_hz: float = 2e9
    bandwidth_hz: float = 2e6
    noise_dbm_per_hz: float = -174.0
    light_speed: float = 3e8

    def __post_init__(self) -> None:
        for name in ("a", "b", "carrier_hz", "bandwidth_hz", "light_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def noise_w_per_hz(self) -> float:
        return dbm_to_watts(self.noise_dbm_per_hz)


@dataclass(frozen=True)
class LinkBudget:
    elevation_deg: float
    distance_m: float
    p_los: float
    pl_los_db: float
    pl_nlos_db: float
    pl_avg_db: float
    gain: float
    rate_bps: float

    @property
    def p_nlos(self) -> float:
        return 1.0 - self.p_los


@dataclass(frozen=True)
class ComputeModel:
    """How local computation time is obtained.

    ``modeled``: samples * episodes * flops_per_sample / flops_per_sec, with
    an optional per-drone capacity list overriding ``drone_flops_per_sec``.
    ``measured``: wall-clock seconds of the training calls.
    ``flops_per_sample=None`` means "derive from the model size".
    """

    mode: str = "modeled"
    flops_per_sample: float | None = None
    drone_flops_per_sec: float = 5e7
    capacities: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.mode not in ("modeled", "measured"):
            raise ValueError("compute mode must be 'modeled' or 'measured'")
        if self.mode == "modeled":
            if self.drone_flops_per_sec <= 0 or any(c <= 0 for c in self.capacities):
                raise ValueError("modeled compute rates must be positive")
            if self.flops_per_sample is not None and self.flops_per_sample < 0:
                raise ValueError("flops_per_sample must be non-negative")

    def capacity(self, drone: int) -> float:
        if self.capacities:
            return self.capacities[drone % len(self.capacities)]
        return self.drone_flops_per_sec


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def geometry(drone_pos: Sequence[float], bs_pos: Sequence[float] = (0.0, 0.0, 0.0)) -> tuple[float, float]:
    """Slant distance (m) and elevation angle (deg) from the base station."""
    x, y, h = drone_pos
    bx, by = bs_pos[0], bs_pos[1]
    bh = bs_pos[2] if len(bs_pos) > 2 else 0.0
    height = h - bh
    if height <= 0:
        raise ValueError("drone must fly above the base station")
    horiz = math.hypot(x - bx, y - by)
    distance = math.hypot(horiz, height)
    elevation = 90.0 if horiz == 0 else math.degrees(math.atan(height / horiz))
    return distance, elevation


def p_los(elevation_deg, params: ChannelParams = ChannelParams()):
    """LoS probability 1 / (1 + a exp(-b (phi - a))) for phi in degrees."""
    return 1.0 / (1.0 + params.a * np.exp(-params.b * (np.asarray(elevation_deg, dtype=np.float64) - params.a)))


def free_space_loss_db(distance_m, params: ChannelParams = ChannelParams()):
    d = np.asarray(distance_m, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return 20.0 * np.log10(4.0 * np.pi * params.carrier_hz * d / params.light_speed)


def path_loss(distance_m, params: ChannelParams = ChannelParams(), line_of_sight: bool = True):
    offset = params.psi_los_db if line_of_sight else params.psi_nlos_db
    return free_space_loss_db(distance_m, params) + offset


def shannon_rate(gain: float, tx_power_w: float, params: ChannelParams = ChannelParams()) -> float:
    snr = tx_power_w * gain / (params.noise_w_per_hz * params.bandwidth_hz)
    return params.bandwidth_hz * math.log2(1.0 + snr)


def link_budget(
    drone_pos: Sequence[float],
    bs_pos: Sequence[float],
    params: ChannelParams,
    tx_power_w: float,
) -> LinkBudget:
    if tx_power_w <= 0:
        raise ValueError("transmit power must be positive")
    d, phi = geometry(drone_pos, bs_pos)
    prob = float(p_los(phi, params))
    pl_los = float(path_loss(d, params, True))
    pl_nlos = float(path_loss(d, params, False))
    pl_avg = prob * pl_los + (1.0 - prob) * pl_nlos
    gain = 10.0 ** (-pl_avg / 10.0)
    return LinkBudget(phi, d, prob, pl_los, pl_nlos, pl_avg, gain, shannon_rate(gain, tx_power_w, params))


def comm_time(payload_bytes: float, rate_bps: float) -> float:
    """Upload seconds for ``payload_bytes`` at ``rate_bps`` (8 bits per byte)."""
    if rate_bps <= 0:
        raise ValueError("rate must be positive")
    return 8.0 * payload_bytes / rate_bps


def compute_time(
    samples: int,
    cfg: ComputeModel,
    *,
    local_episodes: int = 1,
    flops_per_sample: float | None = None,
    drone: int = 0,
    measured_seconds: float | None = None,
) -> float:
    """Local computation seconds for ``samples`` rows trained ``local_episodes`` times.

    Callers charge an unlearning drone for both of its models by summing
    the two workloads.
    """
    if cfg.mode == "measured":
        if measured_seconds is None:
            raise ValueError("measured compute mode needs the recorded wall-clock time")
        return float(measured_seconds)
    fps = cfg.flops_per_sample if cfg.flops_per_sample is not None else flops_per_sample
    if fps is None:
        raise ValueError("flops_per_sample is not set")
    return samples * local_episodes * fps / cfg.capacity(drone)


def training_flops_per_sample(num_params: int) -> float:
    # forward + backward multiply-adds, ~3 passes of 2 flops per weight
    return 6.0 * num_params


def round_time(per_client: Sequence[tuple[float, float]]) -> float:
    """Slowest drone's computation + upload time."""
    if not per_client:
        raise ValueError("round_time needs at least one client")
    return max(tc + tw for tc, tw in per_client)


def drone_positions(count: int, field_size: float, height: float, seed: int) -> np.ndarray:
    """Uniform placement over a square field; base station at its centre."""
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, field_size, size=(count, 2))
    return np.column_stack([xy, np.full(count, float(height))])


def base_station(field_size: float) -> tuple[float, float, float]:
    return (field_size / 2.0, field_size / 2.0, 0.0)


class Stopwatch:
    """Context manager accumulating wall-clock seconds."""

    def __init__(self) -> None:
        self.elapsed = 0.0

    def __enter__(self) -> "Stopwatch":
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed += time.perf_counter() - self._start
