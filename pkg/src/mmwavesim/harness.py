"""Scenario configuration, end-to-end wiring, metrics, and report export.

A run is fully determined by a ``ScenarioConfig`` (serializable as a flat
``key = value`` text file) and produces a ``RunResult`` with windowed
throughput, per-packet latency, per-slot SINR, the TCP event log, a byte
ledger, and a summary derived from exactly the series that get exported.
"""

from __future__ import annotations

import math
from array import array
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import channel as ch
from . import corenet, mac, rlc, transport
from .engine import NS_PER_SEC, RandomStreams, Scheduler
from .packets import ACK, DATA, Packet

STATE_NAMES = ("LOS", "NLOS", "OUT")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str = "custom"
    seed: int = 1
    duration_s: float = 10.0

    # channel source
    channel: str = "geometric"             # geometric | trace
    bs_position: tuple[float, float, float] = (0.0, 0.0, 10.0)
    route: tuple[tuple[float, float, float], ...] = ((10.0, 1.0, 1.5), (100.0, 1.0, 1.5))
    speed_mps: float = 1.5
    obstacles: tuple[tuple[float, float, float, float, float, float], ...] = ()
    forced_outages_s: tuple[tuple[float, float], ...] = ()
    trace_file: str = ""
    trace_native_speed_mps: float = 0.0    # 0 = infer from pos/time slope

    # traffic
    transport: str = "newreno"             # newreno | cubic | udp
    rate_bps: float = 1e9

    # RAN
    rlc_mode: str = "auto"                 # auto | am | um
    rlc_buffer_bytes: int = 10_000_000
    tti_mode: str = "flexible"             # flexible | fixed
    max_pdu_bytes: int = 3000
    status_period_s: float = 0.005
    discard_horizon_s: float = 0.7
    um_reorder_s: float = 0.002

    # core network
    core_delay_s: float = 0.020
    core_capacity_bps: float = 10e9

    # PHY
    carrier_hz: float = 28e9
    bandwidth_hz: float = 1e9
    tx_power_dbm: float = 30.0
    beamforming_gain_db: float = 30.103
    noise_figure_db: float = 5.0
    outage_threshold_db: float = -5.0
    shadow_sigma_los_db: float = 4.0
    shadow_sigma_nlos_db: float = 7.0
    rician_k_db: float = 10.0

    # MAC
    slot_us: float = 125.0
    frame_slots: int = 8
    fixed_dl_slots: int = 6
    eff_cap: float = 4.375
    overhead: float = 0.8
    amc_backoff_db: float = 1.0
    cqi_period_s: float = 0.002
    cqi_delay_s: float = 0.002
    harq_processes: int = 8
    harq_max_tx: int = 3
    harq_feedback_slots: int = 4
    harq_combining_db: float = 3.0

    # TCP
    mss_bytes: int = 1400
    initial_cwnd_segments: int = 10
    initial_ssthresh_bytes: int = 5_500_000
    rwnd_bytes: int = 50_000_000
    ack_bytes: int = 40
    app_buffer_bytes: int = 1_000_000
    min_rto_s: float = 1.0
    max_rto_s: float = 60.0

    # metrics
    throughput_window_s: float = 0.1
    tcp_log_interval_s: float = 0.005
    event_cap: int = 1_000_000_000

    def validate(self) -> None:
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.duration_s < 0:
            raise ConfigError("duration must be >= 0")
        if self.channel not in ("geometric", "trace"):
            raise ConfigError(f"unknown channel source {self.channel!r}")
        if self.transport not in ("newreno", "cubic", "udp"):
            raise ConfigError(f"unknown transport {self.transport!r}")
        if self.tti_mode not in ("flexible", "fixed"):
            raise ConfigError(f"unknown tti mode {self.tti_mode!r}")
        if self.rlc_mode not in ("auto", "am", "um"):
            raise ConfigError(f"unknown rlc mode {self.rlc_mode!r}")
        if self.rate_bps < 0:
            raise ConfigError("rate must be >= 0")
        if self.rlc_buffer_bytes <= 0:
            raise ConfigError("rlc buffer must be > 0")
        if self.core_capacity_bps <= 0:
            raise ConfigError("core capacity must be > 0")
        if self.channel == "geometric":
            if self.speed_mps <= 0:
                raise ConfigError("speed must be > 0")
            if len(self.route) < 2:
                raise ConfigError("route needs at least 2 waypoints")
        if self.channel == "trace" and not self.trace_file:
            raise ConfigError("trace channel needs trace_file")
        for a, b in self.forced_outages_s:
            if b <= a:
                raise ConfigError(f"bad outage interval ({a}, {b})")
        if not 0 < self.overhead <= 1:
            raise ConfigError("overhead must be in (0, 1]")
        if self.mss_bytes <= 0 or self.ack_bytes <= 0:
            raise ConfigError("packet sizes must be > 0")

    @property
    def effective_rlc_mode(self) -> str:
        if self.rlc_mode != "auto":
            return self.rlc_mode
        return "um" if self.transport == "udp" else "am"

    # -- flat text serialization -----------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_encode(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, val = [s.strip() for s in line.split("=", 1)]
            values[key] = val
        return cls().with_overrides(values)

    def with_overrides(self, values: dict) -> "ScenarioConfig":
        known = {f.name: f for f in fields(self)}
        parsed = {}
        for key, val in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[key] = _decode(known[key].name, val, getattr(self, key))
        return replace(self, **parsed)


def _encode(value) -> str:
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return " ; ".join(",".join(repr(x) for x in item) for item in value)
        return ",".join(repr(x) for x in value)
    return repr(value) if isinstance(value, float) else str(value)


def _decode(name: str, val, default):
    if isinstance(val, (int, float, tuple)):
        return val
    val = val.strip()
    if isinstance(default, bool):
        return val.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(float(val))
    if isinstance(default, float):
        return float(val)
    if isinstance(default, tuple):
        if not val:
            return ()
        items = [s.strip() for s in val.split(";") if s.strip()]
        out = []
        for item in items:
            nums = tuple(float(x) for x in item.split(","))
            out.append(nums)
        if name == "route" or name == "bs_position" or name == "obstacles" \
                or name == "forced_outages_s":
            if name == "bs_position":
                if len(out) != 1 or len(out[0]) != 3:
                    raise ConfigError("bs_position needs 3 coordinates")
                return out[0]
            return tuple(out)
        return tuple(out)
    return val


def scenario_dir() -> Path:
    return Path(str(resources.files("mmwavesim").joinpath("scenarios")))


def build_scenario(name: str, overrides: dict | None = None) -> ScenarioConfig:
    """Load a named scenario file and apply overrides on top."""
    path = scenario_dir() / f"{name}.cfg"
    if not path.exists():
        raise ConfigError(f"unknown scenario {name!r} (no file {path})")
    cfg = ScenarioConfig.from_text(path.read_text(encoding="utf-8"))
    if overrides:
        cfg = cfg.with_overrides(dict(overrides))
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


class Metrics:
    def __init__(self, cfg: ScenarioConfig, slot_ns: int):
        self.cfg = cfg
        self.slot_ns = slot_ns
        self.window_ns = int(cfg.throughput_window_s * NS_PER_SEC)
        self.n_windows = int(cfg.duration_s * NS_PER_SEC) // self.window_ns
        self.window_bytes = [0] * self.n_windows
        self.lat_t = array("d")
        self.lat_owd = array("d")
        self.lat_ran = array("d")
        self.lat_state = array("b")
        self.app_delivered_bytes = 0
        self.app_delivered_packets = 0
        self.sent_packets = {"dl": 0, "ul": 0}
        self.sent_bytes = {"dl": 0, "ul": 0}
        self.max_rlc_queue = 0
        self.queue_samples = 0
        self.queue_total = 0

    def record_sent(self, direction: str, packets) -> None:
        self.sent_packets[direction] += len(packets)
        self.sent_bytes[direction] += sum(p.length for p in packets)

    def record_delivery(self, pkt: Packet, app_now_ns: int, states) -> None:
        self.app_delivered_bytes += pkt.length
        self.app_delivered_packets += 1
        idx = app_now_ns // self.window_ns
        if 0 <= idx < self.n_windows:
            self.window_bytes[idx] += pkt.length
        self.lat_t.append(app_now_ns / NS_PER_SEC)
        self.lat_owd.append((app_now_ns - pkt.created_ns) / NS_PER_SEC)
        self.lat_ran.append((pkt.delivered_ns - pkt.rlc_in_ns) / NS_PER_SEC)
        slot = min(pkt.rlc_in_ns // self.slot_ns, len(states) - 1)
        self.lat_state.append(int(states[slot]))

    def sample_queue(self, queued_bytes: int) -> None:
        self.max_rlc_queue = max(self.max_rlc_queue, queued_bytes)
        self.queue_samples += 1
        self.queue_total += queued_bytes

    def goodput_bps(self) -> list[float]:
        w = self.window_ns / NS_PER_SEC
        return [b * 8 / w for b in self.window_bytes]


@dataclass
class RunResult:
    cfg: ScenarioConfig
    metrics: Metrics
    slot_states: np.ndarray
    slot_sinr: np.ndarray
    n_slots: int
    tcp_rows: list
    summary: dict


# ---------------------------------------------------------------------------
# simulation wiring
# ---------------------------------------------------------------------------


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.scheduler = Scheduler(event_cap=cfg.event_cap)
        self.rng = RandomStreams(cfg.seed)
        self.slot_ns = int(round(cfg.slot_us * 1000))
        self.duration_ns = int(round(cfg.duration_s * NS_PER_SEC))
        frame_ns = self.slot_ns * cfg.frame_slots
        self.n_slots = (self.duration_ns // self.slot_ns) + 2 * cfg.frame_slots

        params = ch.ChannelParams(
            carrier_hz=cfg.carrier_hz,
            bandwidth_hz=cfg.bandwidth_hz,
            tx_power_dbm=cfg.tx_power_dbm,
            beamforming_gain_db=cfg.beamforming_gain_db,
            noise_figure_db=cfg.noise_figure_db,
            outage_threshold_db=cfg.outage_threshold_db,
            shadow_sigma_los_db=cfg.shadow_sigma_los_db,
            shadow_sigma_nlos_db=cfg.shadow_sigma_nlos_db,
            rician_k_db=cfg.rician_k_db,
            forced_outages_s=tuple(tuple(o) for o in cfg.forced_outages_s),
        )
        if cfg.channel == "geometric":
            route = ch.RouteSpec(tuple(tuple(w) for w in cfg.route), cfg.speed_mps)
            obstacles = [ch.Obstacle(tuple(o[:3]), tuple(o[3:])) for o in cfg.obstacles]
            self.channel = ch.GeometricChannel(cfg.bs_position, route, obstacles,
                                               params, self.rng)
        else:
            rows = ch.load_trace(cfg.trace_file)
            native = cfg.trace_native_speed_mps
            if native <= 0:
                span_t = rows[-1].t_s - rows[0].t_s
                span_p = rows[-1].pos_m - rows[0].pos_m
                native = span_p / span_t if span_t > 0 and span_p > 0 else cfg.speed_mps
            scale = native / cfg.speed_mps
            self.channel = ch.TraceChannel(rows, params, time_scale=scale)
        self.slot_states, self.slot_sinr = self.channel.slot_grid(self.n_slots, self.slot_ns)

        self.metrics = Metrics(cfg, self.slot_ns)
        self.core = corenet.CoreLink(self.scheduler, cfg.core_delay_s, cfg.core_capacity_bps)

        am = cfg.effective_rlc_mode == "am"
        self.counters_dl = rlc.RlcCounters()
        self.counters_ul = rlc.RlcCounters()
        self.rlc_dl_tx = rlc.RlcSender(cfg.rlc_buffer_bytes, am, self.counters_dl,
                                       cfg.max_pdu_bytes, cfg.discard_horizon_s)
        self.rlc_dl_rx = rlc.RlcReceiver(am, self.counters_dl, self._on_dl_delivery,
                                         cfg.um_reorder_s)
        self.rlc_ul_tx = rlc.RlcSender(cfg.rlc_buffer_bytes, am, self.counters_ul,
                                       cfg.max_pdu_bytes, cfg.discard_horizon_s)
        self.rlc_ul_rx = rlc.RlcReceiver(am, self.counters_ul, self._on_ul_delivery,
                                         cfg.um_reorder_s)

        mac_cfg = mac.MacConfig(
            slot_ns=self.slot_ns,
            frame_slots=cfg.frame_slots,
            fixed_dl_slots=cfg.fixed_dl_slots,
            bandwidth_hz=cfg.bandwidth_hz,
            eff_cap=cfg.eff_cap,
            overhead=cfg.overhead,
            amc_backoff_db=cfg.amc_backoff_db,
            outage_threshold_db=cfg.outage_threshold_db,
            cqi_period_slots=max(1, int(round(cfg.cqi_period_s * NS_PER_SEC / self.slot_ns))),
            cqi_delay_slots=max(0, int(round(cfg.cqi_delay_s * NS_PER_SEC / self.slot_ns))),
            harq_processes=cfg.harq_processes,
            harq_max_tx=cfg.harq_max_tx,
            harq_feedback_slots=cfg.harq_feedback_slots,
            harq_combining_db=cfg.harq_combining_db,
        )
        self.mac_cfg = mac_cfg
        cqi = mac.CqiFeed(self.slot_states, self.slot_sinr, mac_cfg)
        self.mac_dl = mac.MacLink("dl", self.scheduler, mac_cfg, self.slot_states,
                                  self.slot_sinr, cqi, self.rlc_dl_tx, self.rlc_dl_rx)
        self.mac_ul = mac.MacLink("ul", self.scheduler, mac_cfg, self.slot_states,
                                  self.slot_sinr, cqi, self.rlc_ul_tx, self.rlc_ul_rx)
        self.mac_dl.control_sink = self._on_control_at_ue
        self.mac_ul.control_sink = self._on_control_at_bs
        self.planner = mac.FramePlanner(self.scheduler, mac_cfg, cfg.tti_mode,
                                        self.mac_dl, self.mac_ul, on_frame=self._on_frame)

        # endpoints
        self.tcp_sender: transport.TcpSender | None = None
        self.tcp_receiver: transport.TcpReceiver | None = None
        self.udp_source: transport.UdpSource | None = None
        self._ul_batch: list[Packet] = []
        self._ul_flush_scheduled = False

        if cfg.transport == "udp":
            self.udp_source = transport.UdpSource(
                self.scheduler, cfg.rate_bps, cfg.mss_bytes, "udp",
                self._server_send, batch_ns=self.slot_ns)
        else:
            tcp_cfg = transport.TcpConfig(
                variant=cfg.transport,
                mss=cfg.mss_bytes,
                initial_cwnd_segments=cfg.initial_cwnd_segments,
                initial_ssthresh=cfg.initial_ssthresh_bytes,
                rwnd=cfg.rwnd_bytes,
                ack_bytes=cfg.ack_bytes,
                app_buffer_bytes=cfg.app_buffer_bytes,
                min_rto_s=cfg.min_rto_s,
                max_rto_s=cfg.max_rto_s,
                rate_bps=None if cfg.rate_bps <= 0 else cfg.rate_bps,
                log_interval_s=cfg.tcp_log_interval_s,
            )
            self.tcp_sender = transport.TcpSender(
                self.scheduler, tcp_cfg, cfg.transport, self._server_send)
            self.tcp_receiver = transport.TcpReceiver(
                tcp_cfg, cfg.transport, self._ue_send_ack, self._on_app_delivery)

    # -- packet paths -----------------------------------------------------

    def _server_send(self, packets: list[Packet]) -> None:
        self.metrics.record_sent("dl", packets)
        self.core.send(corenet.DOWNLINK, packets, self._on_core_dl_arrival)

    def _on_core_dl_arrival(self, packets: list[Packet]) -> None:
        for pkt in packets:
            self.rlc_dl_tx.enqueue(pkt, pkt.gw_in_ns)

    def _on_dl_delivery(self, pkt: Packet) -> None:
        now = self.scheduler.now
        if self.tcp_receiver is not None:
            self.tcp_receiver.on_data(pkt, now)
        else:
            self._on_app_delivery(pkt, now)

    def _on_app_delivery(self, pkt: Packet, now_ns: int) -> None:
        self.metrics.record_delivery(pkt, now_ns, self.slot_states)
        if self.tcp_sender is not None:
            log = self.tcp_sender.log
            s = self.tcp_sender
            log.log(now_ns, transport.EV_DELIVER, s.cwnd, s.ssthresh,
                    s.estimator.rto, s.inflight)

    def _ue_send_ack(self, ack: Packet) -> None:
        self.metrics.record_sent("ul", [ack])
        self.rlc_ul_tx.enqueue(ack, self.scheduler.now)

    def _on_ul_delivery(self, pkt: Packet) -> None:
        self._ul_batch.append(pkt)
        if not self._ul_flush_scheduled:
            self._ul_flush_scheduled = True
            self.scheduler.schedule(0, self._flush_ul)

    def _flush_ul(self) -> None:
        self._ul_flush_scheduled = False
        batch, self._ul_batch = self._ul_batch, []
        if batch:
            self.core.send(corenet.UPLINK, batch, self._on_core_ul_arrival)

    def _on_core_ul_arrival(self, packets: list[Packet]) -> None:
        if self.tcp_sender is not None:
            self.tcp_sender.on_ack_batch(packets)

    # -- control plane ------------------------------------------------------

    def _status_tick(self) -> None:
        now = self.scheduler.now
        if self.cfg.effective_rlc_mode == "am":
            ack, nacks = self.rlc_dl_rx.make_status()
            self.mac_ul.queue_control(("status_dl", ack, tuple(nacks)), key="status_dl")
            ack, nacks = self.rlc_ul_rx.make_status()
            self.mac_dl.queue_control(("status_ul", ack, tuple(nacks)), key="status_ul")
            self.rlc_dl_tx.sweep_stalled(now)
            self.rlc_ul_tx.sweep_stalled(now)
        self.scheduler.schedule(int(self.cfg.status_period_s * NS_PER_SEC),
                                self._status_tick)

    def _on_control_at_bs(self, messages) -> None:
        now = self.scheduler.now
        for msg in messages:
            if msg[0] == "status_dl":
                self.rlc_dl_tx.on_status(msg[1], msg[2], now)

    def _on_control_at_ue(self, messages) -> None:
        now = self.scheduler.now
        for msg in messages:
            if msg[0] == "status_ul":
                self.rlc_ul_tx.on_status(msg[1], msg[2], now)

    def _on_frame(self) -> None:
        self.metrics.sample_queue(self.rlc_dl_tx.queued_bytes)
        if self.cfg.effective_rlc_mode == "um":
            now = self.scheduler.now
            self.rlc_dl_rx.flush_expired(now)
            self.rlc_ul_rx.flush_expired(now)

    def _tcp_tick(self) -> None:
        self.tcp_sender.try_send(self.scheduler.now)
        self.scheduler.schedule(1_000_000, self._tcp_tick)

    # -- run ------------------------------------------------------------------

    def run(self) -> RunResult:
        if self.duration_ns > 0:
            self.planner.start()
            self._status_tick()
            if self.udp_source is not None:
                self.udp_source.start()
            if self.tcp_sender is not None:
                self.scheduler.schedule(0, self._tcp_tick)
            self.scheduler.run_until(self.duration_ns)
        return self._finalize()

    # -- accounting -------------------------------------------------------------

    def _walk_inflight(self) -> dict[str, int]:
        seen: set[int] = set()
        counts = {"dl": 0, "ul": 0}
        sizes = {"dl": 0, "ul": 0}

        def visit(pkt: Packet, direction: str) -> None:
            if pkt.fate == rlc.FATE_PENDING and id(pkt) not in seen:
                seen.add(id(pkt))
                counts[direction] += 1
                sizes[direction] += pkt.length

        for direction, batches in self.core.outstanding.items():
            for batch in batches:
                for pkt in batch:
                    visit(pkt, "dl" if direction == corenet.DOWNLINK else "ul")
        for direction, sender, link, receiver in (
            ("dl", self.rlc_dl_tx, self.mac_dl, self.rlc_dl_rx),
            ("ul", self.rlc_ul_tx, self.mac_ul, self.rlc_ul_rx),
        ):
            for pkt, _off in sender.queue:
                visit(pkt, direction)
            for pdu in sender.pending.values():
                for chunk in pdu.chunks:
                    visit(chunk.packet, direction)
            for tb in link.inflight_tbs():
                for pdu in tb.pdus:
                    for chunk in pdu.chunks:
                        visit(chunk.packet, direction)
            for pdu in receiver.buffer.values():
                for chunk in pdu.chunks:
                    visit(chunk.packet, direction)
            if receiver._partial is not None:
                visit(receiver._partial[0], direction)
        if self.tcp_sender is not None:
            # segments sent but evaporated nowhere count above; TCP receiver
            # holds packets that RLC already counted delivered
            pass
        return {"dl_packets": counts["dl"], "dl_bytes": sizes["dl"],
                "ul_packets": counts["ul"], "ul_bytes": sizes["ul"]}

    def _finalize(self) -> RunResult:
        cfg = self.cfg
        m = self.metrics
        duration = cfg.duration_s
        goodput = m.goodput_bps()
        inflight = self._walk_inflight()

        lat_owd = np.asarray(m.lat_owd)
        lat_ran = np.asarray(m.lat_ran)

        def pct(arr, q):
            return float(np.percentile(arr, q)) if len(arr) else 0.0

        time_to_rate = -1.0
        target = 0.95 * cfg.rate_bps
        for i, g in enumerate(goodput):
            if g >= target:
                time_to_rate = (i + 1) * cfg.throughput_window_s
                break

        cdl, cul = self.counters_dl, self.counters_ul
        summary = {
            "scenario": cfg.name,
            "transport": cfg.transport,
            "seed": cfg.seed,
            "duration_s": duration,
            "rate_bps": cfg.rate_bps,
            "mean_goodput_bps": (sum(goodput) / len(goodput)) if goodput else 0.0,
            "peak_goodput_bps": max(goodput) if goodput else 0.0,
            "time_to_rate_s": time_to_rate,
            "p50_owd_s": pct(lat_owd, 50),
            "p95_owd_s": pct(lat_owd, 95),
            "p99_owd_s": pct(lat_owd, 99),
            "p50_ran_s": pct(lat_ran, 50),
            "p95_ran_s": pct(lat_ran, 95),
            "p99_ran_s": pct(lat_ran, 99),
            "app_delivered_packets": m.app_delivered_packets,
            "app_delivered_bytes": m.app_delivered_bytes,
            "dl_sent_packets": m.sent_packets["dl"],
            "dl_sent_bytes": m.sent_bytes["dl"],
            "dl_delivered_packets": cdl.delivered_packets,
            "dl_delivered_bytes": cdl.delivered_bytes,
            "dl_dropped_packets": cdl.dropped_packets,
            "dl_dropped_bytes": cdl.dropped_bytes,
            "dl_discarded_packets": cdl.discarded_packets,
            "dl_discarded_bytes": cdl.discarded_bytes,
            "dl_inflight_packets": inflight["dl_packets"],
            "dl_inflight_bytes": inflight["dl_bytes"],
            "dl_duplicate_pdus": cdl.duplicate_pdus,
            "ul_sent_packets": m.sent_packets["ul"],
            "ul_delivered_packets": cul.delivered_packets,
            "ul_dropped_packets": cul.dropped_packets,
            "ul_discarded_packets": cul.discarded_packets,
            "ul_inflight_packets": inflight["ul_packets"],
            "max_rlc_queue_bytes": m.max_rlc_queue,
            "mean_rlc_queue_bytes": (m.queue_total // m.queue_samples) if m.queue_samples else 0,
            "dl_slots_granted": self.planner.dl_slots_granted,
            "ul_slots_granted": self.planner.ul_slots_granted,
            "dl_tb_sent": self.mac_dl.tb_sent,
            "dl_tb_failed": self.mac_dl.tb_failed,
            "dl_tb_lost": self.mac_dl.tb_lost,
            "events_executed": self.scheduler.executed,
        }
        if self.tcp_sender is not None:
            s = self.tcp_sender
            summary.update({
                "tcp_segments_sent": s.segments_sent,
                "tcp_retransmissions": s.retransmissions,
                "tcp_fast_retransmits": s.fast_retransmits,
                "tcp_rto_count": s.rto_count,
                "tcp_rto_in_recovery": s.rto_in_recovery,
                "tcp_final_cwnd_bytes": int(s.cwnd),
                "tcp_final_ssthresh_bytes": int(s.ssthresh),
            })
        tcp_rows = self.tcp_sender.log.rows if self.tcp_sender is not None else []
        n_slots_out = min(self.duration_ns // self.slot_ns, len(self.slot_states))
        return RunResult(cfg, m, self.slot_states, self.slot_sinr,
                         int(n_slots_out), tcp_rows, summary)


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    return Simulation(cfg).run()


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def export_report(result: RunResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.cfg
    m = result.metrics
    paths = {}

    p = out / "throughput.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("t_s,goodput_bps\n")
        for i, g in enumerate(m.goodput_bps()):
            fh.write(f"{i * cfg.throughput_window_s:.3f},{g:.1f}\n")
    paths["throughput"] = p

    p = out / "latency.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("t_s,owd_s,ran_s,ingress_state\n")
        rows = zip(m.lat_t, m.lat_owd, m.lat_ran, m.lat_state)
        fh.writelines(
            f"{t:.6f},{owd:.6f},{ran:.6f},{STATE_NAMES[st]}\n"
            for t, owd, ran, st in rows
        )
    paths["latency"] = p

    p = out / "sinr.csv"
    slot_s = 0.0
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("t_s,state,sinr_db\n")
        slot = cfg.slot_us / 1e6
        states = result.slot_states
        sinr = result.slot_sinr
        fh.writelines(
            f"{i * slot:.6f},{STATE_NAMES[states[i]]},{sinr[i]:.3f}\n"
            for i in range(result.n_slots)
        )
    paths["sinr"] = p

    p = out / "tcp.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("t_s,event,cwnd_bytes,ssthresh_bytes,rto_s,inflight_bytes\n")
        fh.writelines(
            f"{t / NS_PER_SEC:.6f},{ev},{cwnd},{ssthresh},{rto:.3f},{inflight}\n"
            for t, ev, cwnd, ssthresh, rto, inflight in result.tcp_rows
        )
    paths["tcp"] = p

    p = out / "summary.txt"
    with open(p, "w", encoding="utf-8") as fh:
        for key, val in result.summary.items():
            if isinstance(val, float):
                fh.write(f"{key} = {val:.6f}\n")
            else:
                fh.write(f"{key} = {val}\n")
    paths["summary"] = p
    return paths


def read_summary(path) -> dict[str, float | str]:
    out: dict[str, float | str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, val = [s.strip() for s in line.split("=", 1)]
        try:
            out[key] = float(val)
        except ValueError:
            out[key] = val
    return out
