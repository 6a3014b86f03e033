"""Synchronous all-to-all transports.

Both transports implement the same collective contract: every rank calls
``all_to_all`` with one byte payload per peer, no rank returns before all
have contributed, and rank i receives exactly what rank j addressed to i.

* :class:`InprocTransport`: P workers inside one process exchanging buffers
  through a barrier-guarded slot matrix.  Used by tests and the in-process
  benchmark driver.
* :class:`TcpTransport`: a full P x P socket mesh with length-prefixed
  frames, one process per rank.  Rank i accepts connections from higher
  ranks and dials lower ranks.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor

from .errors import TransportError

WIRE_MAGIC = b"FSAA"
FRAME_HEADER = struct.Struct("<4sIIQ")  # magic, sequence, round tag, payload length


class InprocRendezvous:
    """Shared state for one in-process worker group."""

    def __init__(self, world_size: int, timeout: float = 60.0):
        if world_size < 1:
            raise TransportError("world size must be >= 1")
        self.world_size = world_size
        self.timeout = timeout
        self.slots = [[b""] * world_size for _ in range(world_size)]
        self.barrier = threading.Barrier(world_size)

    def endpoints(self) -> list["InprocTransport"]:
        return [InprocTransport(r, self) for r in range(self.world_size)]

    def abort(self):
        """Break the barrier so stuck peers fail fast instead of timing out."""
        self.barrier.abort()


class InprocTransport:
    frame_overhead = 0

    def __init__(self, rank: int, rendezvous: InprocRendezvous):
        self.rank = rank
        self.world_size = rendezvous.world_size
        self._rv = rendezvous

    def all_to_all(self, payloads: list[bytes], round_tag: int = 0) -> list[bytes]:
        if len(payloads) != self.world_size:
            raise TransportError("need exactly one payload per peer")
        rv = self._rv
        rv.slots[self.rank] = list(payloads)
        try:
            rv.barrier.wait(rv.timeout)
            out = [rv.slots[j][self.rank] for j in range(self.world_size)]
            rv.barrier.wait(rv.timeout)
        except threading.BrokenBarrierError as exc:
            raise TransportError("collective aborted or timed out", rank=-1) from exc
        return out

    def close(self):
        pass


def _recv_exact(sock: socket.socket, n: int, peer: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            raise TransportError(f"peer {peer} closed the connection", rank=peer)
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class TcpTransport:
    """One rank of a fully-connected TCP mesh.

    ``peers`` lists every rank's (host, port); entry ``rank`` is this
    process's own listen address.  Frames carry a per-peer sequence number
    and the collective round tag, both verified on receipt.
    """

    frame_overhead = FRAME_HEADER.size

    def __init__(self, rank: int, peers: list[tuple[str, int]], connect_timeout: float = 30.0):
        self.rank = rank
        self.world_size = len(peers)
        self._socks: dict[int, socket.socket] = {}
        self._send_seq = [0] * self.world_size
        self._recv_seq = [0] * self.world_size
        self._pool = ThreadPoolExecutor(max_workers=max(1, self.world_size - 1))
        self._connect_mesh(peers, connect_timeout)

    def _connect_mesh(self, peers, timeout: float):
        host, port = peers[self.rank]
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        expected = self.world_size - 1 - self.rank
        if expected > 0:
            listener.listen(expected)
        listener.settimeout(timeout)
        try:
            # Dial every lower rank (with retry while it boots its listener).
            for peer in range(self.rank):
                deadline = time.monotonic() + timeout
                while True:
                    try:
                        s = socket.create_connection(peers[peer], timeout=timeout)
                        break
                    except OSError as exc:
                        if time.monotonic() > deadline:
                            raise TransportError(f"cannot reach rank {peer}", rank=peer) from exc
                        time.sleep(0.05)
                s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                s.sendall(struct.pack("<I", self.rank))
                self._socks[peer] = s
            # Accept every higher rank; a hello word identifies the dialer.
            for _ in range(expected):
                try:
                    s, _addr = listener.accept()
                except socket.timeout as exc:
                    raise TransportError("timed out waiting for higher ranks", rank=-1) from exc
                s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                (peer,) = struct.unpack("<I", _recv_exact(s, 4, -1))
                if not self.rank < peer < self.world_size or peer in self._socks:
                    raise TransportError(f"unexpected hello from rank {peer}", rank=peer)
                self._socks[peer] = s
        finally:
            listener.close()

    def _send_frame(self, peer: int, payload: bytes, round_tag: int):
        self._send_seq[peer] += 1
        header = FRAME_HEADER.pack(WIRE_MAGIC, self._send_seq[peer], round_tag, len(payload))
        try:
            self._socks[peer].sendall(header + payload)
        except OSError as exc:
            raise TransportError(f"send to rank {peer} failed", rank=peer) from exc

    def _recv_frame(self, peer: int, round_tag: int) -> bytes:
        sock = self._socks[peer]
        try:
            header = _recv_exact(sock, FRAME_HEADER.size, peer)
        except OSError as exc:
            raise TransportError(f"receive from rank {peer} failed", rank=peer) from exc
        magic, seq, tag, length = FRAME_HEADER.unpack(header)
        if magic != WIRE_MAGIC:
            raise TransportError(f"bad frame magic from rank {peer}", rank=peer)
        self._recv_seq[peer] += 1
        if seq != self._recv_seq[peer]:
            raise TransportError(f"out-of-order frame from rank {peer}", rank=peer)
        if tag != round_tag:
            raise TransportError(f"rank {peer} is in a different collective round", rank=peer)
        return _recv_exact(sock, length, peer)

    def all_to_all(self, payloads: list[bytes], round_tag: int = 0) -> list[bytes]:
        if len(payloads) != self.world_size:
            raise TransportError("need exactly one payload per peer")
        out: list[bytes] = [b""] * self.world_size
        out[self.rank] = payloads[self.rank]
        sends = [
            self._pool.submit(self._send_frame, peer, payloads[peer], round_tag)
            for peer in range(self.world_size)
            if peer != self.rank
        ]
        # Receive in ring order while the pool drains the sends.
        for offset in range(1, self.world_size):
            peer = (self.rank - offset) % self.world_size
            out[peer] = self._recv_frame(peer, round_tag)
        for fut in sends:
            fut.result()
        return out

    def close(self):
        self._pool.shutdown(wait=False)
        for s in self._socks.values():
            try:
                s.close()
            except OSError:
                pass


def free_tcp_ports(count: int, host: str = "127.0.0.1") -> list[int]:
    """Reserve ephemeral ports by momentary binds (test/bootstrap helper)."""
    ports = []
    socks = []
    for _ in range(count):
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        s.bind((host, 0))
        ports.append(s.getsockname()[1])
        socks.append(s)
    for s in socks:
        s.close()
    return ports
