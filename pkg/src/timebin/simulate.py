"""Monte-Carlo forward model of the pulsed photon-pair experiment.

Generates time-tag streams for either the plain pair-characterization
setup (one time bin, no analysis interferometers) or the full time-bin
configuration: pump interferometer, pair creation, one analysis
interferometer per arm, detection losses, timing jitter and dark counts.

Interference is handled at the level of analytic outcome probabilities
per pair rather than amplitude tracking: each created pair is assigned a
(signal slot, idler slot, signal port, idler port) outcome drawn from the
exact quantum probabilities, which reproduces the central-peak fringe
law rate ~ 1 - V cos(phi_s + phi_i - phi_p) by construction.

Streams are numpy structured arrays with fields ``channel`` (u8) and
``time_ps`` (u64).  Generation is organized in fixed-size pulse blocks,
each with its own RNG substream derived from (seed, block index), so the
output is deterministic and independent of how it is chunked or
parallelized.
"""

from __future__ import annotations

from dataclasses import dataclass, replace, asdict
from typing import Iterator

import numpy as np

__all__ = [
    "CH_SIGNAL",
    "CH_IDLER",
    "CH_TRIGGER",
    "TAG_DTYPE",
    "ExperimentConfig",
    "JointSlotDistribution",
    "joint_slot_distribution",
    "simulate",
    "simulate_no_pump_interferometer",
    "iter_simulate",
    "iter_simulate_single_bin",
]

CH_SIGNAL = 0
CH_IDLER = 1
CH_TRIGGER = 2

TAG_DTYPE = np.dtype([("channel", "u1"), ("time_ps", "u8")])

# Pulses per generation block; fixed so that RNG substreams (and hence the
# output stream) do not depend on consumer chunking.
BLOCK_PULSES = 1 << 20

DEFAULT_GATE_WIDTH = 0.5e-9


@dataclass(frozen=True)
class ExperimentConfig:
    """Source, interferometer, detector and noise parameters of one run.

    Defaults follow the apparatus this models: 76.2 MHz pulsed pump,
    ~3 ns bin delay (13.1 ns pulse period), dark rates of a few hundred
    per second.
    """

    rep_rate: float = 76.2e6          # pulses / s
    bin_delay: float = 3e-9           # early/late separation, s
    mean_pairs_per_pulse: float = 0.001
    pump_power: float = 0.0           # W; reporting / mu scaling only
    pair_yield_per_watt: float | None = None  # mu = yield * power when set
    eta_signal: float = 1.0
    eta_idler: float = 1.0
    dark_rate_signal: float = 0.0     # counts / s
    dark_rate_idler: float = 0.0
    phi_p: float = 0.0
    phi_s: float = 0.0
    phi_i: float = 0.0
    interference_visibility: float = 1.0   # V0, mode-overlap ceiling
    duration: float = 0.01            # s
    rng_seed: int = 0
    jitter_sigma: float = 50e-12      # detector timing jitter, s
    detection_delay: float = 2e-9     # optical/electronic delay after trigger, s

    @property
    def mu(self) -> float:
        """Mean pairs per pump pulse, resolved from power if configured."""
        if self.pair_yield_per_watt is not None:
            return self.pair_yield_per_watt * self.pump_power
        return self.mean_pairs_per_pulse

    @property
    def pulse_period(self) -> float:
        return 1.0 / self.rep_rate

    def with_power(self, power: float) -> "ExperimentConfig":
        """Copy of this config at a different pump power."""
        return replace(self, pump_power=power)

    def validate(self) -> None:
        if self.rep_rate <= 0:
            raise ValueError("rep_rate must be positive")
        for name in ("bin_delay", "mean_pairs_per_pulse", "dark_rate_signal",
                     "dark_rate_idler", "duration", "jitter_sigma",
                     "detection_delay", "pump_power"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("eta_signal", "eta_idler", "interference_visibility"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("phi_p", "phi_s", "phi_i"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.mu < 0:
            raise ValueError("mean pairs per pulse must be non-negative")
        # Keep the late-late slot plus a detection gate inside one period so
        # coincidence peaks of neighboring pulses cannot overlap.
        if self.detection_delay + 2 * self.bin_delay + DEFAULT_GATE_WIDTH >= self.pulse_period:
            raise ValueError("2*bin_delay + gate width does not fit in the pulse period")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class JointSlotDistribution:
    """Pair outcome weights over arrival slots at the monitored ports.

    ``joint`` is the 3x3 table over (signal slot, idler slot) with slots
    0 = short/early, 1 = central, 2 = long/late; ``marginal`` is the
    per-photon slot distribution of a single arm.  Both retain the
    non-unity total mass left after the unmonitored interferometer ports.
    """

    joint: np.ndarray
    marginal: np.ndarray


def joint_slot_distribution(
    phi_p: float, phi_s: float, phi_i: float, v0: float
) -> JointSlotDistribution:
    """Monitored-port slot weights of one photon pair.

    Each of the six satellite joint slots carries weight 1/32; the central
    slot (1,1) carries (1 - v0*cos(phi_s + phi_i - phi_p))/16, which is the
    two-photon interference of the early-pump/long-paths and
    late-pump/short-paths amplitudes.  The singles marginal is 1/8, 1/4,
    1/8: no single-photon interference, the central slot just collects two
    indistinguishable path alternatives.
    """
    if not 0.0 <= v0 <= 1.0:
        raise ValueError(f"v0 must lie in [0, 1], got {v0}")
    delta = phi_s + phi_i - phi_p
    joint = np.zeros((3, 3))
    for s, i in ((0, 0), (0, 1), (1, 0), (1, 2), (2, 1), (2, 2)):
        joint[s, i] = 1.0 / 32.0
    joint[1, 1] = (1.0 - v0 * np.cos(delta)) / 16.0
    marginal = np.array([1.0 / 8.0, 1.0 / 4.0, 1.0 / 8.0])
    return JointSlotDistribution(joint=joint, marginal=marginal)


def _outcome_table(phi_p: float, phi_s: float, phi_i: float, v0: float):
    """Full pair outcome table including the unmonitored ports.

    Returns (probabilities, signal slot, idler slot, signal monitored,
    idler monitored) arrays over the 36 outcomes (3 slots x 2 ports per
    photon).  Satellite slots are port-independent at 1/32 each; the
    central slot splits (1 -/+ v0 cos)/16 between like and unlike port
    combinations.  The table sums to exactly 1.
    """
    delta = phi_s + phi_i - phi_p
    interference = v0 * np.cos(delta)
    probs, s_slot, i_slot, s_mon, i_mon = [], [], [], [], []
    for s in range(3):
        for i in range(3):
            if (s, i) in ((0, 2), (2, 0)):
                continue
            for ps in (True, False):
                for pi in (True, False):
                    if s == 1 and i == 1:
                        sign = -1.0 if ps == pi else 1.0
                        p = (1.0 + sign * interference) / 16.0
                    else:
                        p = 1.0 / 32.0
                    probs.append(p)
                    s_slot.append(s)
                    i_slot.append(i)
                    s_mon.append(ps)
                    i_mon.append(pi)
    probs = np.array(probs)
    probs = probs / probs.sum()
    return (probs, np.array(s_slot), np.array(i_slot),
            np.array(s_mon), np.array(i_mon))


def _block_range(config: ExperimentConfig):
    n_pulses = int(round(config.duration * config.rep_rate))
    n_blocks = max(1, -(-n_pulses // BLOCK_PULSES)) if n_pulses else 0
    return n_pulses, n_blocks


def _dark_tags(rng, channel, rate, t0_ps, t1_ps):
    if rate <= 0 or t1_ps <= t0_ps:
        return np.empty(0, dtype=np.float64), channel
    span_s = (t1_ps - t0_ps) * 1e-12
    n = rng.poisson(rate * span_s)
    return t0_ps + rng.random(n) * (t1_ps - t0_ps), channel


def _emit_block(config, block, n_pulses, table, time_bin: bool):
    """Generate all tags of one pulse block, time-sorted, as float times.

    Pair counts use the superposition property of the Poisson process:
    one total Poisson draw for the block, pulse indices assigned
    uniformly, which is distributionally identical to a per-pulse draw.
    """
    period_ps = 1e12 / config.rep_rate
    first = block * BLOCK_PULSES
    count = min(BLOCK_PULSES, n_pulses - first)
    rng = np.random.default_rng([config.rng_seed, block])

    pulse_times = np.round((first + np.arange(count)) * period_ps)

    n_pairs = rng.poisson(config.mu * count)
    pulse_of_pair = np.sort(rng.integers(0, count, n_pairs))
    base = pulse_times[pulse_of_pair] + config.detection_delay * 1e12

    jitter_ps = config.jitter_sigma * 1e12
    bin_ps = config.bin_delay * 1e12

    if time_bin:
        probs, s_slot, i_slot, s_mon, i_mon = table
        outcome = rng.choice(len(probs), size=n_pairs, p=probs)
        det_s = s_mon[outcome] & (rng.random(n_pairs) < config.eta_signal)
        det_i = i_mon[outcome] & (rng.random(n_pairs) < config.eta_idler)
        t_s = base[det_s] + s_slot[outcome][det_s] * bin_ps
        t_i = base[det_i] + i_slot[outcome][det_i] * bin_ps
    else:
        det_s = rng.random(n_pairs) < config.eta_signal
        det_i = rng.random(n_pairs) < config.eta_idler
        t_s = base[det_s]
        t_i = base[det_i]
    t_s = t_s + rng.normal(0.0, jitter_ps, t_s.size)
    t_i = t_i + rng.normal(0.0, jitter_ps, t_i.size)

    t0 = pulse_times[0]
    t1 = pulse_times[-1] + period_ps
    dark_rng = np.random.default_rng([config.rng_seed, block, 1])
    d_s, _ = _dark_tags(dark_rng, CH_SIGNAL, config.dark_rate_signal, t0, t1)
    d_i, _ = _dark_tags(dark_rng, CH_IDLER, config.dark_rate_idler, t0, t1)

    times = np.concatenate([pulse_times, t_s, d_s, t_i, d_i])
    channels = np.concatenate([
        np.full(count, CH_TRIGGER, dtype=np.uint8),
        np.full(t_s.size + d_s.size, CH_SIGNAL, dtype=np.uint8),
        np.full(t_i.size + d_i.size, CH_IDLER, dtype=np.uint8),
    ])
    times = np.clip(times, 0.0, None)
    order = np.lexsort((channels, times))
    return times[order], channels[order], t1


def _iter_tags(config: ExperimentConfig, time_bin: bool) -> Iterator[np.ndarray]:
    config.validate()
    n_pulses, n_blocks = _block_range(config)
    if n_pulses == 0:
        return
    table = _outcome_table(config.phi_p, config.phi_s, config.phi_i,
                           config.interference_visibility) if time_bin else None

    carry_t = np.empty(0, dtype=np.float64)
    carry_c = np.empty(0, dtype=np.uint8)
    for block in range(n_blocks):
        times, channels, t_end = _emit_block(config, block, n_pulses, table, time_bin)
        times = np.concatenate([carry_t, times])
        channels = np.concatenate([carry_c, channels])
        order = np.lexsort((channels, times))
        times, channels = times[order], channels[order]
        if block < n_blocks - 1:
            # Jittered events may spill past the block's last pulse; hold
            # them back so emitted chunks stay globally time-sorted.
            cut = np.searchsorted(times, t_end, side="left")
            carry_t, carry_c = times[cut:], channels[cut:]
            times, channels = times[:cut], channels[:cut]
        out = np.empty(times.size, dtype=TAG_DTYPE)
        out["channel"] = channels
        out["time_ps"] = np.round(times).astype(np.uint64)
        yield out


def iter_simulate(config: ExperimentConfig) -> Iterator[np.ndarray]:
    """Stream the full time-bin experiment in memory-bounded chunks."""
    return _iter_tags(config, time_bin=True)


def iter_simulate_single_bin(config: ExperimentConfig) -> Iterator[np.ndarray]:
    """Stream the single-bin characterization experiment in chunks."""
    return _iter_tags(config, time_bin=False)


def _collect(chunks) -> np.ndarray:
    parts = list(chunks)
    if not parts:
        return np.empty(0, dtype=TAG_DTYPE)
    return np.concatenate(parts)


def simulate(config: ExperimentConfig) -> np.ndarray:
    """Full time-bin run as one sorted tag array.

    Per pump pulse: one trigger tag; Poisson(mu) pairs, each sent through
    the pump and analysis interferometers via the analytic outcome table,
    thinned by the detection efficiencies, time-stamped with Gaussian
    jitter; dark counts superimposed as homogeneous Poisson processes.
    """
    return _collect(iter_simulate(config))


def simulate_no_pump_interferometer(config: ExperimentConfig) -> np.ndarray:
    """Single-bin run: pairs occupy one slot, no analysis interferometers.

    This is the configuration used for Klyshko/CAR/brightness
    characterization; the coincidence histogram has a single peak per
    pulse.
    """
    return _collect(iter_simulate_single_bin(config))
