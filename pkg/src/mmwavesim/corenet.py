"""Wired core between the remote host and the base station.

One fixed-latency, high-capacity FIFO pipe per direction stands in for the
gateway chain.  The core never drops or reorders; its job in the system is
the latency it adds.
"""

from __future__ import annotations

from .engine import NS_PER_SEC, Scheduler

DOWNLINK = "dl"
UPLINK = "ul"


class CoreLink:
    def __init__(self, scheduler: Scheduler, one_way_delay_s: float = 0.020,
                 capacity_bps: float = 10e9):
        if capacity_bps <= 0:
            raise ValueError("core capacity must be > 0")
        if one_way_delay_s < 0:
            raise ValueError("core delay must be >= 0")
        self.scheduler = scheduler
        self.delay_ns = int(round(one_way_delay_s * NS_PER_SEC))
        self.capacity_bps = capacity_bps
        self._last_departure = {DOWNLINK: 0, UPLINK: 0}
        self.in_transit = {DOWNLINK: 0, UPLINK: 0}   # packets currently inside
        self.outstanding = {DOWNLINK: [], UPLINK: []}

    def _serialization_ns(self, length_bytes: int) -> int:
        return int(round(length_bytes * 8 * NS_PER_SEC / self.capacity_bps))

    def send(self, direction: str, packets: list, deliver) -> None:
        """Queue a burst; ``deliver(packets)`` fires once all have arrived.

        Each packet is stamped with its exact arrival instant in
        ``gw_in_ns`` (FIFO order preserved; serialization happens back to
        back behind any packet still departing).
        """
        if not packets:
            return
        now = self.scheduler.now
        dep = self._last_departure[direction]
        arrival = now
        for pkt in packets:
            dep = max(now, dep) + self._serialization_ns(pkt.length)
            arrival = dep + self.delay_ns
            pkt.gw_in_ns = arrival
        self._last_departure[direction] = dep
        self.in_transit[direction] += len(packets)
        self.outstanding[direction].append(packets)

        def _arrive(pkts=packets, d=direction):
            self.in_transit[d] -= len(pkts)
            self.outstanding[d].remove(pkts)
            deliver(pkts)

        self.scheduler.schedule(arrival - now, _arrive)
