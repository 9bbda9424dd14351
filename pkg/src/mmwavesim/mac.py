"""MAC layer: link adaptation from delayed CQI, slot scheduling, and HARQ.

The frame is 8 slots of 125 us (1 ms).  A fixed TTI pattern always grants
6 DL + 2 UL slots; the flexible pattern splits each frame in proportion to
the queued bytes per direction.  Transport blocks fail when the true SINR
at transmission time (plus 3 dB of combining gain per earlier attempt)
cannot support the spectral efficiency the stale CQI promised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import Scheduler

DL = "DL"
UL = "UL"

STATE_LOS = 0
STATE_NLOS = 1
STATE_OUTAGE = 2


@dataclass
class MacConfig:
    slot_ns: int = 125_000
    frame_slots: int = 8
    fixed_dl_slots: int = 6
    bandwidth_hz: float = 1e9
    eff_cap: float = 4.375
    overhead: float = 0.8
    amc_backoff_db: float = 1.0
    outage_threshold_db: float = -5.0
    cqi_period_slots: int = 16
    cqi_delay_slots: int = 16
    harq_processes: int = 8
    harq_max_tx: int = 3
    harq_feedback_slots: int = 4
    harq_combining_db: float = 3.0


def spectral_efficiency(sinr_db: float, backoff_db: float = 0.0,
                        cap: float = math.inf) -> float:
    """Capped-Shannon mapping from SINR to b/s/Hz."""
    eff = math.log2(1.0 + 10.0 ** ((sinr_db - backoff_db) / 10.0))
    return min(eff, cap)


def slot_capacity_bytes(eff: float, cfg: MacConfig) -> int:
    slot_s = cfg.slot_ns / 1e9
    return int(eff * cfg.bandwidth_hz * slot_s * cfg.overhead / 8.0)


def amc_select(sinr_db: float, state: int, cfg: MacConfig) -> tuple[float, int]:
    """Returns (spectral efficiency, grant bytes); outage grants nothing."""
    if state == STATE_OUTAGE or sinr_db < cfg.outage_threshold_db:
        return 0.0, 0
    eff = spectral_efficiency(sinr_db, cfg.amc_backoff_db, cfg.eff_cap)
    return eff, slot_capacity_bytes(eff, cfg)


def schedule_frame(mode: str, dl_demand: int, ul_demand: int,
                   frame_slots: int = 8, fixed_dl_slots: int = 6,
                   slot_capacity: int | None = None) -> list[str]:
    """Slot directions for one frame.

    Fixed mode ignores demand.  Flexible mode shares slots in proportion to
    queued bytes, guaranteeing one slot to any direction with demand; with
    nothing queued anywhere the frame defaults to downlink.  When the
    per-slot capacity is known, no direction is granted more slots than its
    demand fills while the other still has unmet demand.
    """
    if mode == "fixed":
        return [DL] * fixed_dl_slots + [UL] * (frame_slots - fixed_dl_slots)
    if dl_demand < 0 or ul_demand < 0:
        raise ValueError("demands must be >= 0")
    if ul_demand == 0:
        return [DL] * frame_slots
    if dl_demand == 0:
        return [UL] * frame_slots
    share = frame_slots * dl_demand / (dl_demand + ul_demand)
    dl_slots = int(round(share))
    dl_slots = max(1, min(frame_slots - 1, dl_slots))
    if slot_capacity is not None and slot_capacity > 0:
        need_dl = max(1, math.ceil(dl_demand / slot_capacity))
        need_ul = max(1, math.ceil(ul_demand / slot_capacity))
        dl_slots = min(dl_slots, need_dl)
        ul_slots = min(frame_slots - dl_slots, need_ul)
        spare = frame_slots - dl_slots - ul_slots
        if spare > 0:
            grow_dl = min(spare, need_dl - dl_slots)
            dl_slots += grow_dl
            spare -= grow_dl
            ul_slots += min(spare, need_ul - ul_slots)
        dl_slots = frame_slots - ul_slots
    return [DL] * dl_slots + [UL] * (frame_slots - dl_slots)


class TransportBlock:
    __slots__ = ("pdus", "eff", "tb_bytes", "tx_count", "process_id", "base_sn")

    def __init__(self, pdus, eff: float, tb_bytes: int, process_id: int, base_sn: int):
        self.pdus = pdus
        self.eff = eff
        self.tb_bytes = tb_bytes
        self.tx_count = 0
        self.process_id = process_id
        self.base_sn = base_sn


class CqiFeed:
    """Wideband CQI measured periodically and applied after a fixed delay."""

    def __init__(self, states, sinrs, cfg: MacConfig):
        self._states = states
        self._sinrs = sinrs
        self.cfg = cfg

    def applied(self, slot_idx: int) -> tuple[int, float] | None:
        k = slot_idx - self.cfg.cqi_delay_slots
        if k < 0:
            return None
        m = (k // self.cfg.cqi_period_slots) * self.cfg.cqi_period_slots
        return int(self._states[m]), float(self._sinrs[m])


class MacLink:
    """One direction of the radio link, driven slot by slot."""

    def __init__(self, name: str, scheduler: Scheduler, cfg: MacConfig,
                 states, sinrs, cqi: CqiFeed, rlc_tx, rlc_rx, metrics=None):
        self.name = name
        self.scheduler = scheduler
        self.cfg = cfg
        self._states = states
        self._sinrs = sinrs
        self.cqi = cqi
        self.rlc_tx = rlc_tx
        self.rlc_rx = rlc_rx
        self.metrics = metrics
        self._free = list(range(cfg.harq_processes))
        self._retx: list[TransportBlock] = []
        self._live: dict[int, TransportBlock] = {}
        self._control_out: dict = {}
        self.control_sink = None       # callable(messages)
        self.served_bytes = 0
        self.tb_sent = 0
        self.tb_failed = 0
        self.tb_lost = 0

    # -- control plane (status reports etc.), zero air-time cost ---------

    def queue_control(self, message, key=None) -> None:
        if key is None:
            key = object()
        self._control_out[key] = message

    def inflight_tbs(self):
        return self._live.values()

    def control_pending(self) -> bool:
        return bool(self._control_out)

    def demand_bytes(self) -> int:
        d = self.rlc_tx.demand_bytes() + sum(tb.tb_bytes for tb in self._retx)
        if self._control_out:
            d = max(d, 1)
        return d

    # -- slot service -----------------------------------------------------

    def _true_link(self, slot_idx: int) -> tuple[int, float]:
        return int(self._states[slot_idx]), float(self._sinrs[slot_idx])

    def serve_slot(self, slot_idx: int) -> None:
        cfg = self.cfg
        report = self.cqi.applied(slot_idx)
        if report is None:
            return
        cqi_state, cqi_sinr = report
        if cqi_state == STATE_OUTAGE or cqi_sinr < cfg.outage_threshold_db:
            return
        now = self.scheduler.now
        slot_end = now + cfg.slot_ns

        if self._control_out:
            msgs = list(self._control_out.values())
            self._control_out = {}
            sink = self.control_sink
            self.scheduler.schedule_at(slot_end, lambda m=msgs: sink(m))

        if self._retx:
            tb = self._retx.pop(0)
        else:
            eff, grant = amc_select(cqi_sinr, cqi_state, cfg)
            if grant <= 0 or not self._free:
                return
            pdus = self.rlc_tx.pull(grant, now)
            if not pdus:
                return
            tb = TransportBlock(pdus, eff, grant, self._free.pop(),
                                self.rlc_tx.base_sn)
            self._live[id(tb)] = tb

        tb.tx_count += 1
        self.tb_sent += 1
        true_state, true_sinr = self._true_link(slot_idx)
        boosted = true_sinr + cfg.harq_combining_db * (tb.tx_count - 1)
        ok = (true_state != STATE_OUTAGE
              and spectral_efficiency(boosted) >= tb.eff)

        if ok:
            self.served_bytes += sum(p.length for p in tb.pdus)
            base = self.rlc_tx.base_sn

            def _deliver(pdus=tb.pdus, b=base, t=slot_end):
                for pdu in pdus:
                    self.rlc_rx.on_pdu(pdu, b, t)

            self.scheduler.schedule_at(slot_end, _deliver)

        feedback_at = now + cfg.harq_feedback_slots * cfg.slot_ns
        self.scheduler.schedule_at(feedback_at, lambda tb=tb, ok=ok: self._on_feedback(tb, ok))

    def _on_feedback(self, tb: TransportBlock, ok: bool) -> None:
        if ok:
            self._free.append(tb.process_id)
            self._live.pop(id(tb), None)
            return
        self.tb_failed += 1
        if tb.tx_count >= self.cfg.harq_max_tx:
            self.tb_lost += 1
            self._free.append(tb.process_id)
            self._live.pop(id(tb), None)
            self.rlc_tx.on_harq_loss(tb.pdus)
        else:
            self._retx.append(tb)


class FramePlanner:
    """Plans one frame of slot directions and drives both MAC links."""

    def __init__(self, scheduler: Scheduler, cfg: MacConfig, mode: str,
                 dl: MacLink, ul: MacLink, on_frame=None):
        if mode not in ("flexible", "fixed"):
            raise ValueError(f"unknown tti mode {mode!r}")
        self.scheduler = scheduler
        self.cfg = cfg
        self.mode = mode
        self.dl = dl
        self.ul = ul
        self.on_frame = on_frame
        self.slot_index = 0
        self.dl_slots_granted = 0
        self.ul_slots_granted = 0

    def start(self) -> None:
        self.scheduler.schedule(0, self._frame)

    def _frame(self) -> None:
        cfg = self.cfg
        capacity = None
        report = self.dl.cqi.applied(self.slot_index)
        if report is not None:
            _, grant = amc_select(report[1], report[0], cfg)
            capacity = grant if grant > 0 else None
        plan = schedule_frame(self.mode, self.dl.demand_bytes(),
                              self.ul.demand_bytes(),
                              cfg.frame_slots, cfg.fixed_dl_slots, capacity)
        base = self.slot_index
        for i, direction in enumerate(plan):
            link = self.dl if direction == DL else self.ul
            if direction == DL:
                self.dl_slots_granted += 1
            else:
                self.ul_slots_granted += 1
            self.scheduler.schedule(
                i * cfg.slot_ns,
                lambda link=link, idx=base + i: link.serve_slot(idx),
            )
        self.slot_index += cfg.frame_slots
        if self.on_frame is not None:
            self.on_frame()
        self.scheduler.schedule(cfg.frame_slots * cfg.slot_ns, self._frame)
