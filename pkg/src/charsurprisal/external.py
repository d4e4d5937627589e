"""Client for a token LM served over a socket.

Wire protocol: newline-delimited JSON. The client sends
``{"id": str, "context": [int, ...]}`` and the server answers
``{"id": str, "logprobs": [float] * V, "eos_logprob": float}``. Answers may
come back in any order; they are matched by id.
"""

from __future__ import annotations

import itertools
import json
import os
import socket
import threading
import time
from typing import Sequence

import numpy as np

from .lm import NextTokenDistribution, NormalizationError, TokenLM

__all__ = [
    "ENDPOINT_ENV",
    "ExternalLMClient",
    "ExternalLMError",
    "ExternalTokenLM",
    "LMTimeoutError",
    "MalformedResponseError",
    "NormalizationError",
    "VocabularyMismatchError",
    "parse_endpoint",
]

ENDPOINT_ENV = "CHARSURPRISAL_LM_ENDPOINT"


class ExternalLMError(RuntimeError):
    pass


class LMTimeoutError(ExternalLMError, TimeoutError):
    pass


class MalformedResponseError(ExternalLMError):
    pass


class VocabularyMismatchError(ExternalLMError):
    pass


def parse_endpoint(text: str):
    host, sep, port = text.strip().rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


class ExternalLMClient:
    """One connection to an LM server.

    Requests on a connection are serialized; open several clients for
    concurrency. ``request_many`` pipelines a batch and collects the answers
    in whatever order they arrive.
    """

    def __init__(self, endpoint, vocab_size, timeout=30.0, retries=2, atol=1e-6):
        self.address = parse_endpoint(endpoint) if isinstance(endpoint, str) else tuple(endpoint)
        self.vocab_size = int(vocab_size)
        self.timeout = float(timeout)
        self.retries = int(retries)
        self.atol = atol
        self._ids = itertools.count()
        self._lock = threading.Lock()
        self._sock = None
        self._buffer = b""
        self._pending = {}

    @classmethod
    def from_env(cls, vocab_size, **kwargs):
        endpoint = os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ExternalLMError(f"{ENDPOINT_ENV} is not set")
        return cls(endpoint, vocab_size, **kwargs)

    def close(self):
        with self._lock:
            self._disconnect()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, context: Sequence[int]) -> NextTokenDistribution:
        return self.request_many([context])[0]

    def request_many(self, contexts):
        contexts = [[int(t) for t in c] for c in contexts]
        with self._lock:
            attempt = 0
            while True:
                try:
                    return self._exchange(contexts)
                except (ConnectionError, OSError) as exc:
                    if isinstance(exc, socket.timeout):
                        self._disconnect()
                        raise LMTimeoutError(
                            f"no answer from {self.address[0]}:{self.address[1]} within {self.timeout}s"
                        ) from exc
                    self._disconnect()
                    attempt += 1
                    if attempt > self.retries:
                        raise ExternalLMError(f"connection to {self.address} failed: {exc}") from exc

    def _connect(self):
        if self._sock is None:
            self._sock = socket.create_connection(self.address, timeout=self.timeout)
            self._sock.settimeout(self.timeout)
            self._buffer = b""
            self._pending = {}

    def _disconnect(self):
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def _exchange(self, contexts):
        self._connect()
        ids = [f"r{next(self._ids)}" for _ in contexts]
        payload = b"".join(
            json.dumps({"id": i, "context": c}).encode() + b"\n" for i, c in zip(ids, contexts)
        )
        self._sock.sendall(payload)
        deadline = time.monotonic() + self.timeout
        wanted = set(ids)
        while not wanted <= self._pending.keys():
            if time.monotonic() > deadline:
                raise socket.timeout("deadline exceeded")
            line = self._readline()
            msg = self._parse(line)
            self._pending[msg["id"]] = msg
        return [self._validate(self._pending.pop(i)) for i in ids]

    def _readline(self):
        while b"\n" not in self._buffer:
            chunk = self._sock.recv(1 << 16)
            if not chunk:
                raise ConnectionError("server closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    @staticmethod
    def _parse(line):
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(f"response is not JSON: {line[:80]!r}") from exc
        if not isinstance(msg, dict) or not isinstance(msg.get("id"), str):
            raise MalformedResponseError(f"response without a string id: {line[:80]!r}")
        return msg

    def _validate(self, msg):
        if "logprobs" not in msg or "eos_logprob" not in msg:
            missing = [k for k in ("logprobs", "eos_logprob") if k not in msg]
            raise MalformedResponseError(f"response {msg['id']} lacks {', '.join(missing)}")
        logprobs, eos = msg["logprobs"], msg["eos_logprob"]
        if not isinstance(logprobs, list) or isinstance(eos, (bool, str)) or eos is None:
            raise MalformedResponseError(f"response {msg['id']} has wrongly typed fields")
        if len(logprobs) != self.vocab_size:
            raise VocabularyMismatchError(
                f"server sent {len(logprobs)} log-probabilities, vocabulary has {self.vocab_size}"
            )
        try:
            values = np.array([float(x) if x is not None else np.nan for x in logprobs + [eos]])
        except (TypeError, ValueError) as exc:
            raise MalformedResponseError(f"response {msg['id']} has non-numeric entries") from exc
        if np.isnan(values).any():
            raise MalformedResponseError(f"response {msg['id']} has non-numeric entries")
        return NextTokenDistribution.from_table(values, atol=self.atol)


class ExternalTokenLM(TokenLM):
    """:class:`TokenLM` backed by an :class:`ExternalLMClient`."""

    def __init__(self, client: ExternalLMClient):
        super().__init__(client.vocab_size)
        self.client = client

    def _compute(self, context):
        return self.client.request(context)
