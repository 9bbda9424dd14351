"""Radio link control: bounded buffering, segmentation, and AM ARQ.

Sender side keeps a drop-tail SDU queue plus, in acknowledged mode, a store
of transmitted-but-unacknowledged PDUs fed by periodic status reports.
PDUs stuck past the configurable stall horizon are abandoned and the window
base advances (carried on every transport block) so the receiver does not
wait forever on data that will never come.  Unacknowledged mode is the same
machinery with ARQ disabled and a short reordering timeout.
"""

from __future__ import annotations

from collections import deque

from .engine import NS_PER_SEC

# Packet fates for the byte-conservation ledger.
FATE_PENDING = 0
FATE_DELIVERED = 1
FATE_DROPPED = 2       # drop-tail at RLC ingress
FATE_DISCARDED = 3     # abandoned inside the RAN (ARQ stall / UM loss)


class Chunk:
    __slots__ = ("packet", "offset", "length")

    def __init__(self, packet, offset: int, length: int):
        self.packet = packet
        self.offset = offset
        self.length = length


class RlcPdu:
    __slots__ = ("sn", "chunks", "length", "first_tx_ns", "in_retx", "retx_count")

    def __init__(self, sn: int, chunks: list[Chunk], length: int, first_tx_ns: int):
        self.sn = sn
        self.chunks = chunks
        self.length = length
        self.first_tx_ns = first_tx_ns
        self.in_retx = False
        self.retx_count = 0


class RlcCounters:
    """Shared between sender and receiver of one bearer direction."""

    def __init__(self):
        self.enqueued_packets = 0
        self.enqueued_bytes = 0
        self.dropped_packets = 0
        self.dropped_bytes = 0
        self.delivered_packets = 0
        self.delivered_bytes = 0
        self.discarded_packets = 0
        self.discarded_bytes = 0
        self.duplicate_pdus = 0

    def set_fate(self, packet, fate: int) -> bool:
        """Record a packet outcome once; later transitions are ignored."""
        if packet.fate != FATE_PENDING:
            return False
        packet.fate = fate
        if fate == FATE_DELIVERED:
            self.delivered_packets += 1
            self.delivered_bytes += packet.length
        elif fate == FATE_DROPPED:
            self.dropped_packets += 1
            self.dropped_bytes += packet.length
        elif fate == FATE_DISCARDED:
            self.discarded_packets += 1
            self.discarded_bytes += packet.length
        return True


class RlcSender:
    def __init__(self, capacity_bytes: int, am: bool, counters: RlcCounters,
                 max_pdu_bytes: int = 3000,
                 discard_horizon_s: float = 0.7):
        if capacity_bytes <= 0:
            raise ValueError("rlc buffer capacity must be > 0")
        self.capacity = capacity_bytes
        self.am = am
        self.counters = counters
        self.max_pdu = max_pdu_bytes
        self.horizon_ns = int(discard_horizon_s * NS_PER_SEC)
        self.queue: deque = deque()          # [packet, offset] pairs
        self.queued_bytes = 0
        self.tx_next = 0
        self.pending: dict[int, RlcPdu] = {}
        self.retx: deque[int] = deque()
        self.retx_bytes = 0
        self.base_sn = 0

    # -- ingress -------------------------------------------------------

    def enqueue(self, packet, now_ns: int) -> bool:
        """Drop-tail admission; losses surface only through missing data."""
        if self.queued_bytes + packet.length > self.capacity:
            self.counters.set_fate(packet, FATE_DROPPED)
            return False
        packet.rlc_in_ns = now_ns
        self.queue.append([packet, 0])
        self.queued_bytes += packet.length
        self.counters.enqueued_packets += 1
        self.counters.enqueued_bytes += packet.length
        return True

    # -- egress to MAC ---------------------------------------------------

    def demand_bytes(self) -> int:
        return self.queued_bytes + self.retx_bytes

    def _carve(self, n: int, now_ns: int) -> RlcPdu:
        chunks = []
        left = n
        while left > 0:
            head = self.queue[0]
            pkt, off = head
            take = min(left, pkt.length - off)
            chunks.append(Chunk(pkt, off, take))
            off += take
            left -= take
            self.queued_bytes -= take
            if off == pkt.length:
                self.queue.popleft()
            else:
                head[1] = off
        pdu = RlcPdu(self.tx_next, chunks, n, now_ns)
        self.tx_next += 1
        return pdu

    def pull(self, grant_bytes: int, now_ns: int) -> list[RlcPdu]:
        """Fill up to grant_bytes: retransmissions first, then new data."""
        out: list[RlcPdu] = []
        remaining = grant_bytes
        while self.retx and remaining > 0:
            sn = self.retx[0]
            pdu = self.pending.get(sn)
            if pdu is None or not pdu.in_retx:
                self.retx.popleft()
                continue
            if pdu.length > remaining:
                return out      # strict ARQ priority: hold new data too
            self.retx.popleft()
            pdu.in_retx = False
            self.retx_bytes -= pdu.length
            pdu.retx_count += 1
            out.append(pdu)
            remaining -= pdu.length
        while remaining > 0 and self.queued_bytes > 0:
            n = min(self.max_pdu, remaining, self.queued_bytes)
            pdu = self._carve(n, now_ns)
            if self.am:
                self.pending[pdu.sn] = pdu
            out.append(pdu)
            remaining -= n
        return out

    # -- ARQ feedback ----------------------------------------------------

    def on_status(self, ack_sn: int, nacks, now_ns: int) -> None:
        if not self.am:
            return
        nackset = set(nacks)
        for sn in [s for s in self.pending if s < ack_sn and s not in nackset]:
            pdu = self.pending.pop(sn)
            if pdu.in_retx:
                pdu.in_retx = False
                self.retx_bytes -= pdu.length
        for sn in nacks:
            pdu = self.pending.get(sn)
            if pdu is not None and not pdu.in_retx:
                pdu.in_retx = True
                self.retx_bytes += pdu.length
                self.retx.append(sn)
        self._advance_base()

    def on_harq_loss(self, pdus: list[RlcPdu]) -> None:
        """MAC gave up on a transport block after its last HARQ attempt."""
        if self.am:
            return      # the status/NACK path recovers these
        for pdu in pdus:
            for chunk in pdu.chunks:
                self.counters.set_fate(chunk.packet, FATE_DISCARDED)

    def sweep_stalled(self, now_ns: int) -> None:
        """Abandon PDUs that have waited past the stall horizon."""
        if not self.am or not self.pending:
            return
        expired = [sn for sn, pdu in self.pending.items()
                   if now_ns - pdu.first_tx_ns > self.horizon_ns]
        for sn in expired:
            pdu = self.pending.pop(sn)
            if pdu.in_retx:
                pdu.in_retx = False
                self.retx_bytes -= pdu.length
            for chunk in pdu.chunks:
                self.counters.set_fate(chunk.packet, FATE_DISCARDED)
        if expired:
            self._advance_base()

    def _advance_base(self) -> None:
        self.base_sn = min(self.pending) if self.pending else self.tx_next


class RlcReceiver:
    """Reassembles SDUs and releases them strictly in sequence."""

    def __init__(self, am: bool, counters: RlcCounters, deliver,
                 um_reorder_s: float = 0.002):
        self.am = am
        self.counters = counters
        self.deliver = deliver
        self.rx_next = 0
        self.highest_seen = -1
        self.buffer: dict[int, RlcPdu] = {}
        self._partial = None          # [packet, bytes_so_far]
        self._gap_since_ns = -1
        self.reorder_ns = int(um_reorder_s * NS_PER_SEC)

    # -- delivery path ---------------------------------------------------

    def _abandon_partial(self) -> None:
        if self._partial is not None:
            self.counters.set_fate(self._partial[0], FATE_DISCARDED)
            self._partial = None

    def _feed(self, chunk: Chunk, now_ns: int) -> None:
        if self._partial is not None and self._partial[0] is not chunk.packet:
            self._abandon_partial()
        if self._partial is None:
            if chunk.offset != 0:
                # tail of a packet whose head was lost with a skipped PDU
                self.counters.set_fate(chunk.packet, FATE_DISCARDED)
                return
            self._partial = [chunk.packet, 0]
        if chunk.offset != self._partial[1]:
            self._abandon_partial()
            return
        self._partial[1] += chunk.length
        if self._partial[1] == chunk.packet.length:
            pkt = self._partial[0]
            self._partial = None
            if self.counters.set_fate(pkt, FATE_DELIVERED):
                pkt.delivered_ns = now_ns
                self.deliver(pkt)

    def _drain(self, now_ns: int) -> None:
        while self.rx_next in self.buffer:
            pdu = self.buffer.pop(self.rx_next)
            for chunk in pdu.chunks:
                self._feed(chunk, now_ns)
            self.rx_next += 1
        self._gap_since_ns = now_ns if self.buffer else -1

    def fast_forward(self, base_sn: int, now_ns: int) -> None:
        """Sender gave up on everything below base_sn; skip the holes."""
        if base_sn <= self.rx_next:
            return
        while self.rx_next < base_sn:
            pdu = self.buffer.pop(self.rx_next, None)
            if pdu is None:
                self._abandon_partial()
            else:
                for chunk in pdu.chunks:
                    self._feed(chunk, now_ns)
            self.rx_next += 1
        self._drain(now_ns)

    def on_pdu(self, pdu: RlcPdu, base_sn: int, now_ns: int) -> None:
        if self.am:
            self.fast_forward(base_sn, now_ns)
        if pdu.sn < self.rx_next or pdu.sn in self.buffer:
            self.counters.duplicate_pdus += 1
            return
        self.buffer[pdu.sn] = pdu
        if pdu.sn > self.highest_seen:
            self.highest_seen = pdu.sn
        had_gap = self._gap_since_ns
        self._drain(now_ns)
        if self.buffer and had_gap >= 0:
            self._gap_since_ns = had_gap   # keep the age of the oldest gap

    # -- UM reordering ----------------------------------------------------

    def flush_expired(self, now_ns: int) -> None:
        """UM only: jump gaps older than the reordering timeout."""
        if self.am or not self.buffer or self._gap_since_ns < 0:
            return
        if now_ns - self._gap_since_ns <= self.reorder_ns:
            return
        self.fast_forward(min(self.buffer), now_ns)

    # -- status reports ----------------------------------------------------

    def make_status(self, max_nacks: int = 512):
        """Cumulative ACK plus the missing sequence numbers below it."""
        ack_sn = self.highest_seen + 1
        nacks = []
        for sn in range(self.rx_next, self.highest_seen + 1):
            if sn not in self.buffer:
                nacks.append(sn)
                if len(nacks) >= max_nacks:
                    ack_sn = sn + 1
                    break
        return ack_sn, nacks
