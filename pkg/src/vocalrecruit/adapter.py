"""Line protocol client and reference server for external synthesizers.

A request is a header ``SYNTH v1 T=<int>`` followed by T lines of seven
comma-separated articulator positions. The synthesizer answers with T lines
``F1,F2,F3`` in Hz. The transport is either the standard streams of a child
process (endpoint is a shell-style command) or a TCP socket (endpoint
``tcp://host:port``).

Run ``python -m vocalrecruit.adapter --serve`` to expose the surrogate tube
model over this protocol, either on stdio or with ``--port`` on a socket.
"""

from __future__ import annotations

import argparse
import os
import selectors
import shlex
import socket
import socketserver
import subprocess
import sys
import time

import numpy as np

from .errors import AdapterProtocolError, InvalidInputError
from .trajectory import N_ARTICULATORS
from .vocaltract import FormantTrajectory

HEADER = "SYNTH v1 T={}\n"
DEFAULT_TIMEOUT = 10.0


def format_request(configs) -> bytes:
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    if configs.ndim != 2 or configs.shape[1] != N_ARTICULATORS:
        raise InvalidInputError(f"expected (T, {N_ARTICULATORS}) positions, got {configs.shape}")
    if not np.all(np.isfinite(configs)):
        raise InvalidInputError("positions must be finite")
    lines = [HEADER.format(len(configs))]
    lines += [",".join(repr(float(v)) for v in row) + "\n" for row in configs]
    return "".join(lines).encode("ascii")


def parse_formant_line(text: str, line: int) -> np.ndarray:
    """Parse and validate one response line; ``line`` is 1-based."""
    parts = text.strip().split(",")
    if len(parts) != 3:
        raise AdapterProtocolError(f"expected 3 values, got {len(parts)}: {text.strip()!r}", line)
    try:
        f = np.array([float(p) for p in parts])
    except ValueError:
        raise AdapterProtocolError(f"non-numeric value in {text.strip()!r}", line) from None
    if not np.all(np.isfinite(f)) or f[0] <= 0:
        raise AdapterProtocolError(f"formants must be finite and positive: {text.strip()!r}", line)
    if not (f[0] < f[1] < f[2]):
        raise AdapterProtocolError(
            f"formants not increasing (F1 < F2 < F3 violated): {text.strip()!r}", line)
    return f


class _Channel:
    """Buffered line reader over a raw file descriptor with a deadline."""

    def __init__(self, read_fd, write, close):
        self._fd = read_fd
        self._write = write
        self._close = close
        self._buf = b""
        self._sel = selectors.DefaultSelector()
        self._sel.register(read_fd, selectors.EVENT_READ)

    def send(self, data: bytes) -> None:
        self._write(data)

    def readline(self, deadline: float) -> bytes | None:
        """Return one line, or None on EOF; raises TimeoutError past deadline."""
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0 or not self._sel.select(remaining):
                raise TimeoutError
            chunk = os.read(self._fd, 65536)
            if not chunk:
                if self._buf:
                    out, self._buf = self._buf, b""
                    return out
                return None
            self._buf += chunk
        out, _, self._buf = self._buf.partition(b"\n")
        return out

    def close(self) -> None:
        self._sel.close()
        self._close()


def _open_process(command: str) -> _Channel:
    proc = subprocess.Popen(shlex.split(command), stdin=subprocess.PIPE,
                            stdout=subprocess.PIPE, bufsize=0)

    def write(data):
        proc.stdin.write(data)
        proc.stdin.flush()

    def close():
        for stream in (proc.stdin, proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    return _Channel(proc.stdout.fileno(), write, close)


def _open_socket(endpoint: str, timeout: float) -> _Channel:
    host, _, port = endpoint[len("tcp://"):].rpartition(":")
    try:
        sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
    except (OSError, ValueError) as exc:
        raise AdapterProtocolError(f"cannot connect to {endpoint}: {exc}") from None
    sock.settimeout(timeout)
    return _Channel(sock.fileno(), sock.sendall, sock.close)


class ExternalSynthesizer:
    """Client for an external synthesizer speaking the SYNTH v1 protocol.

    One instance owns one connection; do not share it between concurrent
    callers. ``formants_for`` batches the K rollout endpoints into a single
    request and turns per-line validation failures into NaN rows so the
    optimizer can charge them the failure cost.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        if timeout <= 0:
            raise InvalidInputError("timeout must be positive")
        self.endpoint = endpoint
        self.timeout = timeout
        if endpoint.startswith("tcp://"):
            self._chan = _open_socket(endpoint, timeout)
        else:
            try:
                self._chan = _open_process(endpoint)
            except OSError as exc:
                raise AdapterProtocolError(f"cannot start {endpoint!r}: {exc}") from None

    def _exchange(self, configs, strict: bool) -> np.ndarray:
        request = format_request(configs)
        n = len(np.atleast_2d(configs))
        try:
            self._chan.send(request)
        except OSError as exc:
            raise AdapterProtocolError(f"write failed: {exc}") from None
        deadline = time.monotonic() + self.timeout
        out = np.full((n, 3), np.nan)
        for i in range(n):
            try:
                raw = self._chan.readline(deadline)
            except TimeoutError:
                raise AdapterProtocolError(
                    f"timed out after {self.timeout:g} s: expected {n} lines, got {i}", i + 1) from None
            if raw is None:
                raise AdapterProtocolError(f"connection closed: expected {n} lines, got {i}", i + 1)
            try:
                text = raw.decode("ascii")
            except UnicodeDecodeError:
                raise AdapterProtocolError("response is not ASCII", i + 1) from None
            try:
                out[i] = parse_formant_line(text, i + 1)
            except AdapterProtocolError:
                if strict:
                    raise
        return out

    def synthesize(self, traj) -> FormantTrajectory:
        """Send every sample of ``traj`` and return the validated formants."""
        positions = np.asarray(traj.positions, dtype=float)
        return FormantTrajectory(np.asarray(traj.times), self._exchange(positions.T, strict=True))

    def formants_for(self, positions) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        return self._exchange(positions[..., -1], strict=False)

    def close(self) -> None:
        self._chan.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_synthesize(traj, endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> FormantTrajectory:
    with ExternalSynthesizer(endpoint, timeout) as synth:
        return synth.synthesize(traj)


def serve_stream(reader, writer, calibration=None) -> None:
    """Answer SYNTH v1 requests from ``reader`` until EOF using the surrogate."""
    from .vocaltract import default_calibration, synthesize_configs

    cal = calibration or default_calibration()
    while True:
        header = reader.readline()
        if not header:
            return
        header = header.strip()
        if not header:
            continue
        if not header.startswith("SYNTH v1 T="):
            raise AdapterProtocolError(f"bad header {header!r}")
        n = int(header.split("=", 1)[1])
        rows = []
        for _ in range(n):
            rows.append([float(v) for v in reader.readline().split(",")])
        f = synthesize_configs(np.array(rows).reshape(n, N_ARTICULATORS), cal)
        # a failed configuration is reported as a non-increasing triple
        lines = ["0,0,0\n" if np.isnan(r).any() else ",".join(repr(float(v)) for v in r) + "\n" for r in f]
        writer.write("".join(lines))
        writer.flush()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        import io
        serve_stream(io.TextIOWrapper(self.rfile, encoding="ascii"),
                     io.TextIOWrapper(self.wfile, encoding="ascii", write_through=True))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m vocalrecruit.adapter")
    parser.add_argument("--serve", action="store_true", required=True,
                        help="serve the surrogate synthesizer")
    parser.add_argument("--port", type=int, help="listen on 127.0.0.1:PORT instead of stdio")
    args = parser.parse_args(argv)
    if args.port is None:
        serve_stream(sys.stdin, sys.stdout)
        return 0
    with socketserver.ThreadingTCPServer(("127.0.0.1", args.port), _Handler) as server:
        server.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
