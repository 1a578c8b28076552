"""Line-protocol bridge so external predictors can join the harness.

Protocol (version ``sbr-bridge/1``), one line per message over the child's
standard streams:

    -> FIT <dataset-path>
    <- READY
    -> PRED <K> <id,id,...>
    <- OK <id:score id:score ...>      (scores non-increasing)
    -> BYE                              (child exits)

Prefixes travel as original item identifiers, so the child keeps its own
vocabulary.  Every read is bounded by a timeout; a silent child is an
error, never a hang.
"""

from __future__ import annotations

import selectors
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from .ranking import Ranking

PROTOCOL_VERSION = "sbr-bridge/1"


class BridgeError(Exception):
    pass


class BridgeTimeout(BridgeError):
    pass


@dataclass
class BridgeConfig:
    command: str
    handshake_timeout: float = 10.0
    request_timeout: float = 10.0
    protocol: str = PROTOCOL_VERSION

    def __post_init__(self):
        if self.handshake_timeout <= 0 or self.request_timeout <= 0:
            raise ValueError("timeouts must be positive")


class BridgePredictor:
    """Drives one external predictor process; single request at a time.

    Mirrors the native predictor surface (``name``/``predict``) so the
    evaluation loop cannot tell the difference.
    """

    def __init__(self, config, item_ids, train_freq=None, name="bridge"):
        self.config = config
        self.item_ids = tuple(item_ids)
        self.item_index = {item: i for i, item in enumerate(self.item_ids)}
        self.train_freq_ = train_freq
        self.name = name
        self._proc = None

    # -- lifecycle ---------------------------------------------------------

    def fit(self, dataset_path):
        """Launch the child and complete the FIT/READY handshake."""
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.config.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BridgeError(f"launch failed: {exc}") from exc
        self._send(f"FIT {dataset_path}")
        reply = self._recv(self.config.handshake_timeout)
        if reply.startswith("VERSION "):
            version = reply.split(None, 1)[1]
            raise BridgeError(
                f"protocol version mismatch: child speaks {version!r}, "
                f"harness speaks {self.config.protocol!r}"
            )
        if reply != "READY":
            raise BridgeError(f"bad handshake reply {reply!r}")
        return self

    def close(self):
        if self._proc is None:
            return
        try:
            if self._proc.poll() is None:
                self._send("BYE")
                self._proc.wait(timeout=self.config.request_timeout)
        except (BridgeError, subprocess.TimeoutExpired):
            self._proc.kill()
        finally:
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- prediction --------------------------------------------------------

    def predict(self, prefix, k, exclude=()):
        if self._proc is None:
            raise BridgeError("bridge not fitted")
        ids = ",".join(self.item_ids[i] for i in prefix)
        self._send(f"PRED {k} {ids}")
        reply = self._recv(self.config.request_timeout)
        return self._parse_ranking(reply, k, exclude)

    def _parse_ranking(self, reply, k, exclude):
        parts = reply.split()
        if not parts or parts[0] != "OK":
            raise BridgeError(f"malformed response {reply!r}")
        items = []
        scores = []
        for token in parts[1:]:
            item, sep, score = token.rpartition(":")
            if not sep:
                raise BridgeError(f"malformed pair {token!r}")
            idx = self.item_index.get(item)
            if idx is None:
                raise BridgeError(f"unknown item {item!r} in response")
            if idx in exclude:
                continue
            items.append(idx)
            try:
                scores.append(float(score))
            except ValueError:
                raise BridgeError(f"malformed score in {token!r}")
        try:
            return Ranking(
                items=np.asarray(items[:k], dtype=np.int64),
                scores=np.asarray(scores[:k], dtype=np.float64),
            )
        except ValueError as exc:
            raise BridgeError(f"invalid ranking from child: {exc}") from exc

    # -- plumbing ----------------------------------------------------------

    def _send(self, line):
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeError(f"child went away: {exc}") from exc

    def _recv(self, timeout):
        sel = selectors.DefaultSelector()
        sel.register(self._proc.stdout, selectors.EVENT_READ)
        try:
            if not sel.select(timeout):
                raise BridgeTimeout(f"no reply within {timeout}s")
        finally:
            sel.close()
        line = self._proc.stdout.readline()
        if not line:
            code = self._proc.poll()
            raise BridgeError(f"child closed its output (exit code {code})")
        return line.rstrip("\n")


def bridge_fit(config, dataset_path, item_ids, train_freq=None, name="bridge"):
    """Launch an external predictor and hand back a ready handle."""
    return BridgePredictor(config, item_ids, train_freq, name=name).fit(dataset_path)
