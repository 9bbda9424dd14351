"""Link-state and SINR model for a single base station and a mobile user.

Two channel sources share one sampling interface:

* ``GeometricChannel``: line-of-sight decided by segment/box intersection
  against a fixed obstacle map, distance path loss per state, per-state
  log-normal shadowing drawn once per run, and sum-of-sinusoids Doppler
  fading (Rician in LOS, Rayleigh in NLOS).
* ``TraceChannel``: replay of an externally produced CSV trace with linear
  SINR interpolation and stepwise state transitions.

Sampling is pure: asking for the same instant twice returns the same value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .engine import NS_PER_SEC, RandomStreams

SPEED_OF_LIGHT = 299_792_458.0

# Distance path loss PL = alpha + 10*beta*log10(d), 28 GHz urban constants.
PL_LOS = (61.4, 2.0)
PL_NLOS = (72.0, 2.92)

# Sinusoids per cluster in the fading model.
N_SINUSOIDS = 20
CLUSTER_SPREAD_RAD = math.pi / 3.0

# SINR reported while a forced outage blanks the link.
FORCED_OUTAGE_SINR_DB = -40.0


class LinkState(Enum):
    LOS = "LOS"
    NLOS = "NLOS"
    OUTAGE = "OUT"


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned box given by center and edge lengths, in meters."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise ValueError(f"obstacle size must be positive, got {self.size}")

    @property
    def lo(self) -> tuple[float, float, float]:
        return tuple(c - s / 2.0 for c, s in zip(self.center, self.size))

    @property
    def hi(self) -> tuple[float, float, float]:
        return tuple(c + s / 2.0 for c, s in zip(self.center, self.size))


@dataclass(frozen=True)
class RouteSpec:
    """Piecewise-linear user route walked at constant speed."""

    waypoints: tuple[tuple[float, float, float], ...]
    speed_mps: float

    def __post_init__(self):
        if self.speed_mps <= 0:
            raise ValueError("route speed must be > 0")
        if len(self.waypoints) < 2:
            raise ValueError("route needs at least 2 waypoints")

    def leg_lengths(self) -> list[float]:
        out = []
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            out.append(math.dist(a, b))
        return out


@dataclass(frozen=True)
class ChannelSample:
    t_ns: int
    position: tuple[float, float, float]
    state: LinkState
    sinr_db: float


def segment_intersects_box(p0, p1, box: Obstacle) -> bool:
    """Slab test: does the open segment p0->p1 cross the box interior?

    Touching a face without entering does not count, so grazing rays stay
    line-of-sight.
    """
    tmin, tmax = 0.0, 1.0
    lo, hi = box.lo, box.hi
    for axis in range(3):
        o = p0[axis]
        d = p1[axis] - p0[axis]
        if d == 0.0:
            if o <= lo[axis] or o >= hi[axis]:
                return False
            continue
        t0 = (lo[axis] - o) / d
        t1 = (hi[axis] - o) / d
        if t0 > t1:
            t0, t1 = t1, t0
        tmin = max(tmin, t0)
        tmax = min(tmax, t1)
        if tmin >= tmax:
            return False
    return tmin < 1.0 and tmax > 0.0


def los_state(tx, rx, obstacles) -> LinkState:
    """LOS unless the direct path crosses at least one obstacle interior."""
    if tuple(tx) == tuple(rx):
        raise ValueError("tx and rx coincide")
    for box in obstacles:
        if segment_intersects_box(tx, rx, box):
            return LinkState.NLOS
    return LinkState.LOS


def path_loss_db(d_m: float, state: LinkState) -> float:
    """Distance path loss in dB; distances under 1 m clamp to 1 m."""
    if state is LinkState.OUTAGE:
        raise ValueError("path loss undefined in outage state")
    alpha, beta = PL_LOS if state is LinkState.LOS else PL_NLOS
    d = max(d_m, 1.0)
    return alpha + 10.0 * beta * math.log10(d)


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    return -174.0 + noise_figure_db + 10.0 * math.log10(bandwidth_hz)


def advance_route(route: RouteSpec, t_ns: int) -> tuple[float, float, float]:
    """Position at time t; the user stops at the final waypoint."""
    if t_ns < 0:
        raise ValueError("negative time")
    remaining = route.speed_mps * (t_ns / NS_PER_SEC)
    pts = route.waypoints
    for a, b in zip(pts, pts[1:]):
        leg = math.dist(a, b)
        if remaining <= leg:
            if leg == 0.0:
                return a
            f = remaining / leg
            return tuple(a[i] + f * (b[i] - a[i]) for i in range(3))
        remaining -= leg
    return pts[-1]


@dataclass
class LargeScaleRealization:
    """Parameters drawn once per run and held constant along the route."""

    shadow_db: dict[LinkState, float]
    cluster_count: int
    cluster_powers: np.ndarray            # fractions, sum to 1
    cluster_angles: np.ndarray            # radians

    @classmethod
    def draw(cls, rng: np.random.Generator, sigma_los_db: float, sigma_nlos_db: float,
             cluster_count: int = 3) -> "LargeScaleRealization":
        shadow = {
            LinkState.LOS: float(rng.normal(0.0, sigma_los_db)),
            LinkState.NLOS: float(rng.normal(0.0, sigma_nlos_db)),
        }
        raw = rng.exponential(1.0, cluster_count)
        powers = raw / raw.sum()
        angles = rng.uniform(0.0, 2.0 * math.pi, cluster_count)
        return cls(shadow, cluster_count, powers, angles)


class FadingProcess:
    """Sum-of-sinusoids small-scale fading with unit mean linear power.

    Each cluster contributes ``N_SINUSOIDS`` rays at Doppler frequencies
    bounded by f_d = speed * f_c / c.  The LOS branch adds a fixed dominant
    component with the configured Rician K factor; the NLOS branch is pure
    scatter (Rayleigh power).
    """

    def __init__(self, realization: LargeScaleRealization, speed_mps: float,
                 carrier_hz: float, rician_k_db: float, rng: np.random.Generator):
        f_d = speed_mps * carrier_hz / SPEED_OF_LIGHT
        freqs = []
        amps = []
        phases = []
        for k in range(realization.cluster_count):
            aoa = realization.cluster_angles[k] + rng.uniform(
                -CLUSTER_SPREAD_RAD, CLUSTER_SPREAD_RAD, N_SINUSOIDS
            )
            freqs.append(f_d * np.cos(aoa))
            amps.append(np.full(N_SINUSOIDS,
                                math.sqrt(realization.cluster_powers[k] / N_SINUSOIDS)))
            phases.append(rng.uniform(0.0, 2.0 * math.pi, N_SINUSOIDS))
        self._freqs = np.concatenate(freqs)
        self._amps = np.concatenate(amps)
        self._phases = np.concatenate(phases)

        k_lin = 10.0 ** (rician_k_db / 10.0)
        self._los_dominant = math.sqrt(k_lin / (k_lin + 1.0))
        self._los_scatter = math.sqrt(1.0 / (k_lin + 1.0))
        self._los_freq = f_d * math.cos(rng.uniform(0.0, 2.0 * math.pi))
        self._los_phase = rng.uniform(0.0, 2.0 * math.pi)

    def _scatter(self, t_s: np.ndarray) -> np.ndarray:
        acc = np.zeros(t_s.shape, dtype=np.complex128)
        two_pi = 2.0 * math.pi
        for a, f, p in zip(self._amps, self._freqs, self._phases):
            acc += a * np.exp(1j * (two_pi * f * t_s + p))
        return acc

    def gain_db(self, t_s: np.ndarray | float, state: LinkState) -> np.ndarray | float:
        """Small-scale power gain in dB relative to 0 dB mean."""
        scalar = np.isscalar(t_s)
        t = np.atleast_1d(np.asarray(t_s, dtype=np.float64))
        h = self._scatter(t)
        if state is LinkState.LOS:
            dom = self._los_dominant * np.exp(
                1j * (2.0 * math.pi * self._los_freq * t + self._los_phase)
            )
            h = dom + self._los_scatter * h
        power = np.abs(h) ** 2
        out = 10.0 * np.log10(np.maximum(power, 1e-12))
        return float(out[0]) if scalar else out


@dataclass
class ChannelParams:
    carrier_hz: float = 28e9
    bandwidth_hz: float = 1e9
    tx_power_dbm: float = 30.0
    beamforming_gain_db: float = 10.0 * math.log10(64) + 10.0 * math.log10(16)
    noise_figure_db: float = 5.0
    outage_threshold_db: float = -5.0
    shadow_sigma_los_db: float = 4.0
    shadow_sigma_nlos_db: float = 7.0
    rician_k_db: float = 10.0
    forced_outages_s: tuple[tuple[float, float], ...] = ()

    @property
    def noise_dbm(self) -> float:
        return noise_power_dbm(self.bandwidth_hz, self.noise_figure_db)


def _in_forced_outage(t_s: float, intervals) -> bool:
    for a, b in intervals:
        if a <= t_s < b:
            return True
    return False


class GeometricChannel:
    """Semi-statistical channel: geometry decides the state, statistics the rest."""

    def __init__(self, bs_position, route: RouteSpec, obstacles,
                 params: ChannelParams, rng: RandomStreams):
        self.bs = tuple(bs_position)
        self.route = route
        self.obstacles = list(obstacles)
        self.params = params
        shadow_rng = rng.register("shadowing")
        fading_rng = rng.register("fading")
        self.realization = LargeScaleRealization.draw(
            shadow_rng, params.shadow_sigma_los_db, params.shadow_sigma_nlos_db
        )
        self.fading = FadingProcess(
            self.realization, route.speed_mps, params.carrier_hz,
            params.rician_k_db, fading_rng,
        )

    def geometry_state(self, t_ns: int) -> tuple[tuple[float, float, float], LinkState]:
        pos = advance_route(self.route, t_ns)
        return pos, los_state(self.bs, pos, self.obstacles)

    def mean_sinr_db(self, t_ns: int) -> tuple[tuple[float, float, float], LinkState, float]:
        """SINR without small-scale fading (large-scale terms only)."""
        pos, geo = self.geometry_state(t_ns)
        p = self.params
        d = math.dist(self.bs, pos)
        sinr = (p.tx_power_dbm + p.beamforming_gain_db - path_loss_db(d, geo)
                - self.realization.shadow_db[geo] - p.noise_dbm)
        return pos, geo, sinr

    def sample(self, t_ns: int) -> ChannelSample:
        p = self.params
        t_s = t_ns / NS_PER_SEC
        pos, geo, sinr = self.mean_sinr_db(t_ns)
        sinr += self.fading.gain_db(t_s, geo)
        if _in_forced_outage(t_s, p.forced_outages_s):
            return ChannelSample(t_ns, pos, LinkState.OUTAGE, FORCED_OUTAGE_SINR_DB)
        if sinr < p.outage_threshold_db:
            return ChannelSample(t_ns, pos, LinkState.OUTAGE, sinr)
        return ChannelSample(t_ns, pos, geo, sinr)

    def slot_grid(self, n_slots: int, slot_ns: int) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized per-slot (state, sinr) arrays for the event loop.

        States are LinkState values in an object-free int8 array using the
        encoding 0=LOS, 1=NLOS, 2=OUTAGE.
        """
        p = self.params
        times_ns = np.arange(n_slots, dtype=np.int64) * slot_ns
        t_s = times_ns / NS_PER_SEC

        positions = np.empty((n_slots, 3))
        geo = np.empty(n_slots, dtype=np.int8)
        sinr = np.empty(n_slots)
        for i, tn in enumerate(times_ns):
            pos, g, s = self.mean_sinr_db(int(tn))
            positions[i] = pos
            geo[i] = 0 if g is LinkState.LOS else 1
            sinr[i] = s

        los_gain = np.asarray(self.fading.gain_db(t_s, LinkState.LOS))
        nlos_gain = np.asarray(self.fading.gain_db(t_s, LinkState.NLOS))
        sinr = sinr + np.where(geo == 0, los_gain, nlos_gain)

        state = geo.copy()
        state[sinr < p.outage_threshold_db] = 2
        forced = np.zeros(n_slots, dtype=bool)
        for a, b in p.forced_outages_s:
            forced |= (t_s >= a) & (t_s < b)
        state[forced] = 2
        sinr[forced] = FORCED_OUTAGE_SINR_DB
        return state, sinr


TRACE_HEADER = "t_s,pos_m,state,sinr_db"
_STATE_TOKENS = {"LOS": LinkState.LOS, "NLOS": LinkState.NLOS, "OUT": LinkState.OUTAGE}


class TraceError(ValueError):
    pass


@dataclass
class TraceRow:
    t_s: float
    pos_m: float
    state: LinkState
    sinr_db: float


def load_trace(path) -> list[TraceRow]:
    """Parse a channel trace CSV, rejecting malformed rows by number."""
    rows: list[TraceRow] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise TraceError(f"{path}: expected header {TRACE_HEADER!r}, got {header!r}")
        prev_t = None
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise TraceError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                t = float(parts[0])
                pos = float(parts[1])
                sinr = float(parts[3])
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from None
            if parts[2] not in _STATE_TOKENS:
                raise TraceError(f"{path}:{lineno}: unknown state token {parts[2]!r}")
            if prev_t is not None and t <= prev_t:
                raise TraceError(f"{path}:{lineno}: time not strictly increasing")
            prev_t = t
            rows.append(TraceRow(t, pos, _STATE_TOKENS[parts[2]], sinr))
    if len(rows) < 2:
        raise TraceError(f"{path}: trace needs at least 2 rows")
    return rows


def write_trace(path, rows: list[TraceRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.t_s:.6f},{r.pos_m:.3f},{r.state.value},{r.sinr_db:.3f}\n")


class TraceChannel:
    """Replays a trace: SINR linearly interpolated, state held stepwise.

    ``time_scale`` < 1 compresses the trace in time, modeling the same
    spatial route walked faster (e.g. native 3 m/s replayed at 25 m/s uses
    scale 3/25).
    """

    def __init__(self, rows: list[TraceRow], params: ChannelParams,
                 time_scale: float = 1.0):
        if time_scale <= 0:
            raise ValueError("time_scale must be > 0")
        self.params = params
        self.rows = rows
        self._t = np.array([r.t_s * time_scale for r in rows])
        self._sinr = np.array([r.sinr_db for r in rows])
        self._pos = np.array([r.pos_m for r in rows])
        self._state = np.array([
            0 if r.state is LinkState.LOS else 1 if r.state is LinkState.NLOS else 2
            for r in rows
        ], dtype=np.int8)

    @property
    def duration_s(self) -> float:
        return float(self._t[-1])

    def _eval(self, t_s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        t = np.clip(t_s, self._t[0], self._t[-1])
        sinr = np.interp(t, self._t, self._sinr)
        idx = np.searchsorted(self._t, t, side="right") - 1
        idx = np.clip(idx, 0, len(self._t) - 1)
        state = self._state[idx].copy()
        state[sinr < self.params.outage_threshold_db] = 2
        forced = np.zeros(t.shape, dtype=bool)
        for a, b in self.params.forced_outages_s:
            forced |= (t >= a) & (t < b)
        state[forced] = 2
        sinr[forced] = FORCED_OUTAGE_SINR_DB
        return state, sinr

    def sample(self, t_ns: int) -> ChannelSample:
        t_s = np.array([t_ns / NS_PER_SEC])
        state, sinr = self._eval(t_s)
        pos = float(np.interp(t_s[0], self._t, self._pos))
        link = (LinkState.LOS, LinkState.NLOS, LinkState.OUTAGE)[int(state[0])]
        return ChannelSample(t_ns, (pos, 0.0, 0.0), link, float(sinr[0]))

    def slot_grid(self, n_slots: int, slot_ns: int) -> tuple[np.ndarray, np.ndarray]:
        t_s = np.arange(n_slots, dtype=np.float64) * (slot_ns / NS_PER_SEC)
        return self._eval(t_s)
