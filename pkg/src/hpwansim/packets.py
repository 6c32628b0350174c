"""Packet representation and wire-format constants.

Jumbo framing: MTU 9000 minus 40 bytes of TCP/IP headers gives the default
MSS of 8960 payload bytes. On the wire each segment additionally carries the
40 header bytes plus Ethernet framing and preamble/IFG overhead, 78 bytes in
total, i.e. 9038 wire bytes per full segment.
"""

DEFAULT_MSS = 8960
FRAMING_OVERHEAD = 78  # headers + Ethernet + preamble/IFG
DEFAULT_WIRE = DEFAULT_MSS + FRAMING_OVERHEAD

# ECN codepoints
NOT_ECT = 0
ECT0 = 1
CE = 2

DIR_DATA = 0
DIR_ACK = 1


class Packet:
    """One simulated frame. Mutable because queues may set the CE mark."""

    __slots__ = ("id", "flow_id", "vc_id", "seq_start", "seq_end",
                 "payload_bytes", "wire_bytes", "ecn", "is_retx",
                 "sent_at", "direction")

    def __init__(self, pkt_id, flow_id, vc_id, seq_start, seq_end,
                 payload_bytes, wire_bytes, ecn=NOT_ECT, is_retx=False,
                 sent_at=0, direction=DIR_DATA):
        self.id = pkt_id
        self.flow_id = flow_id
        self.vc_id = vc_id
        self.seq_start = seq_start
        self.seq_end = seq_end
        self.payload_bytes = payload_bytes
        self.wire_bytes = wire_bytes
        self.ecn = ecn
        self.is_retx = is_retx
        self.sent_at = sent_at
        self.direction = direction

    def __repr__(self):
        return (f"Packet(id={self.id}, flow={self.flow_id}, vc={self.vc_id}, "
                f"[{self.seq_start},{self.seq_end}), wire={self.wire_bytes}, "
                f"ecn={self.ecn}, retx={self.is_retx})")
