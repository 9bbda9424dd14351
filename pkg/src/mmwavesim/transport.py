"""End-host protocol machines: TCP NewReno and Cubic senders, plus UDP.

The NewReno sender is the Slow-but-Steady flavor: every partial
acknowledgement during fast recovery retransmits exactly one hole and
restarts the retransmission timer, so a long recovery never times out.
Window growth only happens while the window is actually the limit; the
first time the sender finds itself application-limited, slow start ends
where it stands.  Cubic shares slow start and recovery mechanics and
follows the cubic growth curve in congestion avoidance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import NS_PER_SEC, Scheduler
from .packets import ACK, DATA, Packet

NEWRENO = "newreno"
CUBIC = "cubic"

CUBIC_C = 0.4       # MSS per second cubed
CUBIC_BETA = 0.7


def cubic_window(w_max_mss: float, t_s: float, w_epoch_mss: float | None = None,
                 c: float = CUBIC_C, beta: float = CUBIC_BETA) -> float:
    """Cubic window W(t) in MSS units.

    K is the time the curve needs to climb back from the epoch window to
    the pre-loss maximum; with the default epoch window beta*w_max this is
    the textbook K = cbrt(w_max*(1-beta)/c).
    """
    if w_epoch_mss is None:
        w_epoch_mss = beta * w_max_mss
    k = ((w_max_mss - w_epoch_mss) / c) ** (1.0 / 3.0)
    return c * (t_s - k) ** 3 + w_max_mss


class RttEstimator:
    """Smoothed RTT / variance with a hard minimum RTO of one second."""

    def __init__(self, min_rto_s: float = 1.0, max_rto_s: float = 60.0):
        self.srtt: float | None = None
        self.rttvar: float | None = None
        self.min_rto = min_rto_s
        self.max_rto = max_rto_s
        self.rto = min_rto_s

    def sample(self, r_s: float) -> float:
        if self.srtt is None:
            self.srtt = r_s
            self.rttvar = r_s / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r_s)
            self.srtt = 0.875 * self.srtt + 0.125 * r_s
        self.rto = min(self.max_rto, max(self.min_rto, self.srtt + 4.0 * self.rttvar))
        return self.rto

    def backoff(self) -> float:
        self.rto = min(self.max_rto, self.rto * 2.0)
        return self.rto


@dataclass
class TcpConfig:
    variant: str = NEWRENO
    mss: int = 1400
    initial_cwnd_segments: int = 10
    initial_ssthresh: int = 6_000_000
    rwnd: int = 50_000_000
    ack_bytes: int = 40
    min_rto_s: float = 1.0
    max_rto_s: float = 60.0
    rate_bps: float | None = 1e9     # None = unlimited backlog
    app_buffer_bytes: int = 1_000_000
    log_interval_s: float = 0.005


EV_ACK = "ACK"
EV_DUPACK = "DUPACK"
EV_FASTRTX = "FASTRTX"
EV_PARTIAL = "PARTIAL"
EV_RTO = "RTO"
EV_DELIVER = "DELIVER"


class TcpEventLog:
    """Chronological per-connection log; dense ACK/DELIVER rows are decimated."""

    def __init__(self, interval_s: float):
        self.rows: list[tuple[int, str, int, int, float, int]] = []
        self._interval_ns = int(interval_s * NS_PER_SEC)
        self._last: dict[str, int] = {}

    def log(self, now_ns: int, event: str, cwnd: float, ssthresh: float,
            rto_s: float, inflight: int, always: bool = False) -> None:
        if not always:
            last = self._last.get(event, -(1 << 62))
            if now_ns - last < self._interval_ns:
                return
        self._last[event] = now_ns
        self.rows.append((now_ns, event, int(cwnd), int(ssthresh), rto_s, inflight))


class TcpSender:
    def __init__(self, scheduler: Scheduler, cfg: TcpConfig, flow: str,
                 transmit, log: TcpEventLog | None = None):
        self.scheduler = scheduler
        self.cfg = cfg
        self.flow = flow
        self.transmit = transmit          # callable(list[Packet])
        self.log = log or TcpEventLog(cfg.log_interval_s)

        mss = cfg.mss
        self.mss = mss
        self.cwnd: float = cfg.initial_cwnd_segments * mss
        self.ssthresh: float = cfg.initial_ssthresh
        self.snd_una = 0
        self.snd_nxt = 0
        self.dupacks = 0
        self.in_recovery = False
        self.recover = -1
        self.estimator = RttEstimator(cfg.min_rto_s, cfg.max_rto_s)
        self._timed: tuple[int, int, int] | None = None   # (seq, seq_end, sent_ns)
        self._rto_handle = None
        self._app_consumed = 0
        self._produced = 0
        self._produced_at = 0
        self._pipe_filled = False

        # cubic bookkeeping, MSS units
        self._w_max: float | None = None
        self._epoch_ns: int | None = None
        self._w_epoch: float = 0.0
        self._last_ca_ns = 0

        self.segments_sent = 0
        self.retransmissions = 0
        self.rto_count = 0
        self.rto_in_recovery = 0
        self.fast_retransmits = 0

    # -- application source ------------------------------------------------

    def _app_available(self, now_ns: int) -> int:
        """Bytes the writer can hand over right now.

        The writer produces at the configured rate but blocks while the send
        buffer is full; blocked production is skipped, not deferred, so a
        slow connection never faces an unbounded sender-side backlog.
        """
        if self.cfg.rate_bps is None:
            return 1 << 60
        step = int(self.cfg.rate_bps * (now_ns - self._produced_at) / (8 * NS_PER_SEC))
        self._produced = min(self._produced + step,
                             self._app_consumed + self.cfg.app_buffer_bytes)
        self._produced_at = now_ns
        return self._produced - self._app_consumed

    # -- transmission ------------------------------------------------------

    @property
    def inflight(self) -> int:
        return self.snd_nxt - self.snd_una

    def _emit(self, seq: int, now_ns: int, rtx: bool) -> Packet:
        pkt = Packet(DATA, self.flow, seq, self.mss, now_ns, rtx=rtx)
        if rtx:
            self.retransmissions += 1
            # Karn: a retransmission overlapping the timed segment voids it
            if self._timed is not None and seq < self._timed[1] and seq + self.mss > self._timed[0]:
                self._timed = None
        elif self._timed is None:
            self._timed = (seq, seq + self.mss, now_ns)
        self.segments_sent += 1
        return pkt

    def try_send(self, now_ns: int) -> None:
        mss = self.mss
        window = min(self.cwnd, self.cfg.rwnd)
        out = []
        while self.inflight + mss <= window:
            if self.snd_nxt >= self._app_consumed:
                if self._app_available(now_ns) < mss:
                    break
                self._app_consumed = self.snd_nxt + mss
                rtx = False
            else:
                rtx = True      # resending a range retracted by a timeout
            out.append(self._emit(self.snd_nxt, now_ns, rtx))
            self.snd_nxt += mss
        if out:
            self.transmit(out)
            self._arm_rto()

    def _retransmit_one(self, seq: int, now_ns: int) -> None:
        self.transmit([self._emit(seq, now_ns, True)])

    # -- RTO timer -----------------------------------------------------------

    def _arm_rto(self) -> None:
        if self._rto_handle is None and self.snd_una < self.snd_nxt:
            self._rto_handle = self.scheduler.schedule(
                int(self.estimator.rto * NS_PER_SEC), self._on_rto)

    def _restart_rto(self) -> None:
        if self._rto_handle is not None:
            self._rto_handle.cancel()
            self._rto_handle = None
        self._arm_rto()

    def _on_rto(self) -> None:
        self._rto_handle = None
        now = self.scheduler.now
        if self.snd_una >= self.snd_nxt:
            return
        self.rto_count += 1
        if self.in_recovery:
            self.rto_in_recovery += 1
        mss = self.mss
        if self.cfg.variant == CUBIC:
            self.ssthresh = max(CUBIC_BETA * self.cwnd, 2 * mss)
            self._w_max = None          # forget the old maximum after a timeout
            self._epoch_ns = None
        else:
            self.ssthresh = max(self.cwnd / 2.0, 2 * mss)
        self.cwnd = mss
        self.in_recovery = False
        self.dupacks = 0
        self.recover = self.snd_nxt
        self._timed = None              # Karn: no samples across a timeout
        self.snd_nxt = self.snd_una     # resend the whole outstanding range
        self.estimator.backoff()
        self._retransmit_one(self.snd_una, now)
        self.snd_nxt = self.snd_una + mss
        self._restart_rto()
        self.log.log(now, EV_RTO, self.cwnd, self.ssthresh,
                     self.estimator.rto, self.inflight, always=True)

    # -- ACK clock -----------------------------------------------------------

    def on_ack_batch(self, packets: list[Packet]) -> None:
        now = self.scheduler.now
        for pkt in packets:
            if pkt.kind == ACK:
                self._on_ack(pkt.ack_seq, now)
                self.try_send(now)

    def _take_rtt_sample(self, ack: int, now_ns: int) -> None:
        if self._timed is not None and ack >= self._timed[1]:
            self.estimator.sample((now_ns - self._timed[2]) / NS_PER_SEC)
            self._timed = None

    def _on_ack(self, ack: int, now_ns: int) -> None:
        if ack > self.snd_nxt:
            # data sent before a timeout retracted snd_nxt; the receiver
            # really has it, so restore the high-water mark
            self.snd_nxt = ack
        if ack > self.snd_una:
            self._ack_advance(ack, now_ns)
        elif ack == self.snd_una and self.snd_nxt > self.snd_una:
            self._dupack(now_ns)

    def _ack_advance(self, ack: int, now_ns: int) -> None:
        mss = self.mss
        acked = ack - self.snd_una
        inflight_before = self.inflight
        self._take_rtt_sample(ack, now_ns)
        self.snd_una = ack

        if self.in_recovery:
            if ack >= self.recover:
                self.cwnd = self.ssthresh
                self.in_recovery = False
                self.dupacks = 0
                self.log.log(now_ns, EV_ACK, self.cwnd, self.ssthresh,
                             self.estimator.rto, self.inflight, always=True)
            else:
                # partial ACK: repair exactly one hole, keep the timer fresh
                self._retransmit_one(ack, now_ns)
                self.cwnd = max(self.cwnd - acked + mss, float(mss))
                self.log.log(now_ns, EV_PARTIAL, self.cwnd, self.ssthresh,
                             self.estimator.rto, self.inflight)
            self._restart_rto()
            return

        self.dupacks = 0
        limited = inflight_before + mss >= min(self.cwnd, self.cfg.rwnd)
        if self.cwnd < self.ssthresh:
            if limited:
                self.cwnd += mss
            elif not self._pipe_filled:
                # first app-limited moment: the pipe is full, stop slow start
                self._pipe_filled = True
                self.ssthresh = max(self.cwnd, 2.0 * mss)
        else:
            if self.cfg.variant == CUBIC:
                self._cubic_ack(now_ns, limited)
            elif limited:
                self.cwnd += mss * mss / self.cwnd
        self.log.log(now_ns, EV_ACK, self.cwnd, self.ssthresh,
                     self.estimator.rto, self.inflight)
        self._restart_rto()

    def _cubic_ack(self, now_ns: int, limited: bool) -> None:
        mss = self.mss
        if self._epoch_ns is None:
            if self._w_max is None:
                self._w_max = self.cwnd / mss
            self._epoch_ns = now_ns
            self._w_epoch = min(self.cwnd / mss, self._w_max)
            self._last_ca_ns = now_ns
        if not limited:
            # freeze the cubic clock while the application is the bottleneck
            self._epoch_ns += now_ns - self._last_ca_ns
        else:
            t = (now_ns - self._epoch_ns) / NS_PER_SEC
            w = cubic_window(self._w_max, t, self._w_epoch)
            self.cwnd = max(self.cwnd, max(w, 2.0) * mss)
        self._last_ca_ns = now_ns

    def _dupack(self, now_ns: int) -> None:
        mss = self.mss
        self.dupacks += 1
        if self.in_recovery:
            self.cwnd += mss
            self.log.log(now_ns, EV_DUPACK, self.cwnd, self.ssthresh,
                         self.estimator.rto, self.inflight)
            return
        if self.dupacks < 3:
            return
        if self.snd_una < self.recover:
            return      # no re-entry for losses already covered by a loss event
        # fast retransmit / enter recovery
        self.fast_retransmits += 1
        if self.cfg.variant == CUBIC:
            self._w_max = self.cwnd / mss
            self.ssthresh = max(CUBIC_BETA * self.cwnd, 2.0 * mss)
            self._epoch_ns = now_ns
            self._w_epoch = self.ssthresh / mss
            self._last_ca_ns = now_ns
        else:
            self.ssthresh = max(self.inflight / 2.0, 2.0 * mss)
        self.recover = self.snd_nxt
        self.in_recovery = True
        self._retransmit_one(self.snd_una, now_ns)
        self.cwnd = self.ssthresh + 3 * mss
        self._restart_rto()
        self.log.log(now_ns, EV_FASTRTX, self.cwnd, self.ssthresh,
                     self.estimator.rto, self.inflight, always=True)


class TcpReceiver:
    """In-order reassembly with one immediate cumulative ACK per data packet."""

    def __init__(self, cfg: TcpConfig, flow: str, send_ack, on_deliver):
        self.cfg = cfg
        self.flow = flow
        self.send_ack = send_ack          # callable(Packet)
        self.on_deliver = on_deliver      # callable(Packet, now_ns)
        self.rcv_nxt = 0
        self._ooo: dict[int, Packet] = {}
        self.duplicate_segments = 0

    def on_data(self, pkt: Packet, now_ns: int) -> None:
        if pkt.seq == self.rcv_nxt:
            self.rcv_nxt += pkt.length
            self.on_deliver(pkt, now_ns)
            while self.rcv_nxt in self._ooo:
                nxt = self._ooo.pop(self.rcv_nxt)
                self.rcv_nxt += nxt.length
                self.on_deliver(nxt, now_ns)
        elif pkt.seq > self.rcv_nxt:
            if pkt.seq in self._ooo:
                self.duplicate_segments += 1
            else:
                self._ooo[pkt.seq] = pkt
        else:
            self.duplicate_segments += 1
        ack = Packet(ACK, self.flow, self.rcv_nxt, self.cfg.ack_bytes,
                     now_ns, ack_seq=self.rcv_nxt)
        self.send_ack(ack)


class UdpSource:
    """Constant-rate source; packets are stamped on an exact jitter-free grid."""

    def __init__(self, scheduler: Scheduler, rate_bps: float, packet_bytes: int,
                 flow: str, transmit, batch_ns: int = 125_000):
        if rate_bps < 0:
            raise ValueError("rate must be >= 0")
        self.scheduler = scheduler
        self.rate_bps = rate_bps
        self.packet_bytes = packet_bytes
        self.flow = flow
        self.transmit = transmit
        self.batch_ns = batch_ns
        self.sent = 0

    def emission_time_ns(self, index: int) -> int:
        return int(index * self.packet_bytes * 8 * NS_PER_SEC // int(self.rate_bps))

    def start(self) -> None:
        if self.rate_bps <= 0:
            return
        self.scheduler.schedule(0, self._tick)

    def _tick(self) -> None:
        now = self.scheduler.now
        out = []
        while self.emission_time_ns(self.sent) <= now:
            out.append(Packet(DATA, self.flow, self.sent, self.packet_bytes,
                              self.emission_time_ns(self.sent)))
            self.sent += 1
        if out:
            self.transmit(out)
        self.scheduler.schedule(self.batch_ns, self._tick)
