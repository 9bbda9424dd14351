"""IP-layer datagram carried end to end, with a timestamp trail for latency accounting."""

from __future__ import annotations

DATA = 0
ACK = 1


class Packet:
    __slots__ = (
        "kind", "flow", "seq", "length", "ack_seq", "rtx", "fate",
        "created_ns", "gw_in_ns", "rlc_in_ns", "delivered_ns",
    )

    def __init__(self, kind: int, flow: str, seq: int, length: int,
                 created_ns: int, ack_seq: int = -1, rtx: bool = False):
        if length <= 0:
            raise ValueError("packet length must be positive")
        self.kind = kind
        self.flow = flow
        self.seq = seq
        self.length = length
        self.ack_seq = ack_seq
        self.rtx = rtx
        self.fate = 0
        self.created_ns = created_ns
        self.gw_in_ns = -1
        self.rlc_in_ns = -1
        self.delivered_ns = -1

    def __repr__(self):
        k = "DATA" if self.kind == DATA else "ACK"
        return f"Packet({k} flow={self.flow} seq={self.seq} len={self.length})"
