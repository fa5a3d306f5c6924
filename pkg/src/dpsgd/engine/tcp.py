"""TCP transport: a socket front end over the shared master loop.

One persistent connection per worker. The worker drives the dialogue:
it sends PULL_REQ and gets back MODEL (or SHUTDOWN once the run is
over), computes a local pass, then sends PUSH. The master side answers
pulls from whatever model is currently published, so a slow worker
never blocks an apply.

A malformed frame is fatal for its connection only: the master counts
it, closes that socket, and keeps serving the rest. Traces do not cross
the wire; use the threaded runtime to record overwrite traces.
"""
from __future__ import annotations

import queue
import socket
import threading
import time

import numpy as np

from ..core import ParamVector, SharedSlab, UpdateVector, make_update_vector
from ..errors import TransportError, WireProtocolError
from .config import RunConfig
from .result import MetricsSeries, RunCounters, RunResult
from .threaded import _transit_sample, master_collect_loop, run_local_pass
from . import wire

_POLL_S = 0.05
_QUEUE_TIMEOUT_S = 60.0


def _recv_exact(sock: socket.socket, n: int, allow_eof: bool = False):
    """Read exactly n bytes; None on a clean EOF before the first byte."""
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except OSError as exc:
            raise TransportError(f"socket read failed: {exc}")
        if not chunk:
            if allow_eof and not buf:
                return None
            raise TransportError(
                f"connection closed mid-frame ({len(buf)}/{n} bytes)"
            )
        buf.extend(chunk)
    return bytes(buf)


def read_frame(sock: socket.socket, allow_eof: bool = False):
    """One (msg_type, decoded payload) off the socket; None on clean EOF."""
    header = _recv_exact(sock, wire.HEADER_SIZE, allow_eof=allow_eof)
    if header is None:
        return None
    msg_type, length = wire.split_header(header)
    payload = _recv_exact(sock, length) if length else b""
    return msg_type, wire.decode_payload(msg_type, payload)


def send_frame(sock: socket.socket, frame: bytes) -> None:
    try:
        sock.sendall(frame)
    except OSError as exc:
        raise TransportError(f"socket write failed: {exc}")


class TcpMasterServer:
    """Accepts worker connections and funnels their pushes to the master.

    start() binds and spawns the accept thread; the owner then runs the
    collect loop against next_delivery/publish and finally calls
    broadcast_stop() and close().
    """

    def __init__(self, cfg: RunConfig, initial: np.ndarray,
                 host: str = "127.0.0.1", port: int = 0):
        self._cfg = cfg
        self._dim = int(initial.shape[0])
        self._deliveries: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._version = 0
        self._values = initial.copy()
        self._stopping = False
        self._closing = False
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._handlers: list[threading.Thread] = []
        self._conns: list[socket.socket] = []
        self._host = host
        self._port = port
        self.pulls_served = 0
        self.malformed_frames = 0

    @property
    def address(self) -> tuple[str, int]:
        if self._listener is None:
            raise TransportError("server not started")
        return self._listener.getsockname()[:2]

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self._host, self._port))
        listener.listen()
        # closing the listener does not interrupt a blocked accept() on
        # Linux, so the accept loop polls a flag instead
        listener.settimeout(_POLL_S)
        self._listener = listener
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while True:
            try:
                conn, _ = self._listener.accept()
            except TimeoutError:
                if self._closing:
                    return
                continue
            except OSError:
                return  # listener closed
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                self._conns.append(conn)
            th = threading.Thread(target=self._serve_conn, args=(conn,),
                                  daemon=True)
            self._handlers.append(th)
            th.start()

    def _serve_conn(self, conn: socket.socket) -> None:
        try:
            while True:
                try:
                    got = read_frame(conn, allow_eof=True)
                except WireProtocolError:
                    with self._lock:
                        self.malformed_frames += 1
                    return
                except TransportError:
                    return
                if got is None:
                    return  # worker hung up cleanly
                msg_type, body = got
                if msg_type == wire.PULL_REQ:
                    with self._lock:
                        stopping = self._stopping
                        frame = (
                            wire.encode_shutdown()
                            if stopping
                            else wire.encode_model(self._version, self._values)
                        )
                        self.pulls_served += 1
                    send_frame(conn, frame)
                    if stopping:
                        return
                elif msg_type == wire.PUSH:
                    if body.delta.shape[0] != self._dim:
                        with self._lock:
                            self.malformed_frames += 1
                        return
                    self._deliveries.put(
                        UpdateVector(
                            delta=body.delta,
                            base_version=body.base_version,
                            worker_id=body.worker_id,
                        )
                    )
                elif msg_type == wire.SHUTDOWN:
                    return
                else:  # MODEL from a worker makes no sense
                    with self._lock:
                        self.malformed_frames += 1
                    return
        finally:
            conn.close()

    def publish(self, version: int, values: np.ndarray) -> None:
        with self._lock:
            self._version = version
            self._values = values

    def next_delivery(self, timeout: float = _QUEUE_TIMEOUT_S,
                      abort_check=None) -> UpdateVector:
        deadline = time.monotonic() + timeout
        while True:
            if abort_check is not None:
                abort_check()
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TransportError("master starved: no push arrived in time")
            try:
                return self._deliveries.get(timeout=min(_POLL_S, remaining))
            except queue.Empty:
                continue

    def broadcast_stop(self) -> None:
        with self._lock:
            self._stopping = True

    def close(self) -> None:
        self._closing = True
        if self._listener is not None:
            self._listener.close()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5.0)
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            conn.close()
        for th in self._handlers:
            th.join(timeout=5.0)


def connect_with_retries(address: tuple[str, int], attempts: int = 40,
                         wait_s: float = 0.25) -> socket.socket:
    last: Exception | None = None
    for _ in range(attempts):
        try:
            sock = socket.create_connection(address, timeout=30.0)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            return sock
        except OSError as exc:
            last = exc
            time.sleep(wait_s)
    raise TransportError(f"could not reach master at {address}: {last}")


def run_tcp_worker(cfg: RunConfig, oracle, address: tuple[str, int],
                   worker_id: int, attempts: int = 40) -> int:
    """Pull/compute/push against a remote master until SHUTDOWN.

    Returns the number of completed passes.
    """
    sock = connect_with_retries(address, attempts=attempts)
    slab = SharedSlab(np.zeros(oracle.dim))
    passes = 0
    try:
        while True:
            send_frame(sock, wire.encode_pull_req())
            got = read_frame(sock)
            msg_type, body = got
            if msg_type == wire.SHUTDOWN:
                return passes
            if msg_type != wire.MODEL:
                raise WireProtocolError(
                    f"expected MODEL or SHUTDOWN, got type {msg_type}"
                )
            if body.values.shape[0] != oracle.dim:
                raise WireProtocolError(
                    f"model dim {body.values.shape[0]} != oracle dim {oracle.dim}"
                )
            slab.load(body.values)
            run_local_pass(cfg, oracle, slab, worker_id, passes)
            update = make_update_vector(slab, body.values, body.version,
                                        worker_id)
            transit = _transit_sample(cfg, worker_id, passes)
            if transit > 0:
                time.sleep(transit)
            send_frame(sock, wire.encode_push(worker_id, update.base_version,
                                              update.delta))
            passes += 1
    finally:
        sock.close()


def run_tcp_master(cfg: RunConfig, oracle, init,
                   host: str = "127.0.0.1", port: int = 0,
                   server: TcpMasterServer | None = None,
                   abort_check=None) -> RunResult:
    """Serve a full run over TCP; workers connect from elsewhere."""
    init = np.asarray(init, dtype=float)
    own_server = server is None
    if server is None:
        server = TcpMasterServer(cfg, init, host=host, port=port)
        server.start()
    counters = RunCounters()
    metrics = MetricsSeries()
    applied_hist: dict[int, int] = {}
    received_hist: dict[int, int] = {}
    theory_warnings = cfg.theory_warnings()
    start = time.monotonic()
    try:
        final = master_collect_loop(
            cfg,
            oracle,
            init,
            lambda: server.next_delivery(abort_check=abort_check),
            server.publish,
            counters,
            metrics,
            applied_hist,
            received_hist,
            abort_check,
        )
    finally:
        server.broadcast_stop()
        if own_server:
            # give blocked workers one pull round-trip to see the stop flag
            time.sleep(2 * _POLL_S)
            server.close()
    counters.pulls_served = server.pulls_served
    counters.malformed_frames = server.malformed_frames
    counters.gradient_evals_computed = counters.pushes_received * cfg.p * cfg.B
    return RunResult(
        final=ParamVector(final),
        version=cfg.T,
        counters=counters,
        metrics=metrics,
        mode="tcp",
        applied_staleness_hist=applied_hist,
        received_staleness_hist=received_hist,
        traces=[],
        theory_warnings=theory_warnings,
        config_echo=cfg.to_dict(),
        wall_clock_s=time.monotonic() - start,
    )


def run_tcp(cfg: RunConfig, oracle, init=None,
            host: str = "127.0.0.1", port: int = 0) -> RunResult:
    """All-in-one localhost run: master here, nW worker threads over TCP."""
    init = np.zeros(oracle.dim) if init is None else np.asarray(init, float)
    server = TcpMasterServer(cfg, init, host=host, port=port)
    server.start()
    errors: list[BaseException] = []

    def worker_body(w: int) -> None:
        try:
            run_tcp_worker(cfg, oracle, server.address, w)
        except BaseException as exc:
            errors.append(exc)

    def abort_check():
        if errors:
            raise TransportError(f"worker failed: {errors[0]!r}") from errors[0]

    workers = [
        threading.Thread(target=worker_body, args=(w,)) for w in range(cfg.nW)
    ]
    for th in workers:
        th.start()
    try:
        result = run_tcp_master(cfg, oracle, init, server=server,
                                abort_check=abort_check)
    finally:
        server.broadcast_stop()
        for th in workers:
            th.join(timeout=30.0)
        server.close()
    # worker errors mid-run abort the master via abort_check; errors raised
    # by stragglers after the run completed are not failures
    result.counters.pulls_served = server.pulls_served
    result.counters.malformed_frames = server.malformed_frames
    return result
