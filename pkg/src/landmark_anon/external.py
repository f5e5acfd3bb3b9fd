"""Out-of-process model adapters speaking JSON lines over stdin/stdout.

Each request is one line::

    {"protocol_version": 1, "role": "landmarker", "image": "/tmp/.../000000.png"}

and each response one line carrying the same ``protocol_version`` plus the
role's payload:

=========== ==================================================
role        payload
=========== ==================================================
detector    ``"detections": [{"bbox": [...], ...}, ...]``
segmenter   ``"mask": "<path to 8-bit PNG, nonzero = face>"``
landmarker  ``"landmarks": [[x, y, z] * 478]`` or ``null``
embedder    ``"embedding": [float, ...]`` or ``null``
classifier  ``"probabilities": {"label": p, ...}``
=========== ==================================================

A response may instead carry ``"error": "<message>"``. Anything else is a
protocol violation.
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adapters import FaceDetection, SegmentationMask
from .errors import AdapterProtocolError, InvalidArgumentError
from .imageops import FaceImage
from .io import load_gray_u8, save_image
from .raster import LandmarkSet

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
ROLES = ("detector", "segmenter", "landmarker", "embedder", "classifier")
_PAYLOAD = {
    "detector": "detections",
    "segmenter": "mask",
    "landmarker": "landmarks",
    "embedder": "embedding",
    "classifier": "probabilities",
}


@dataclass(frozen=True)
class ExternalAdapterSpec:
    command: tuple[str, ...]
    protocol_version: int = PROTOCOL_VERSION
    timeout: float = 60.0

    def __post_init__(self):
        if not self.command:
            raise InvalidArgumentError("external adapter command is empty")
        if self.timeout <= 0:
            raise InvalidArgumentError("timeout must be positive")
        if self.protocol_version != PROTOCOL_VERSION:
            raise InvalidArgumentError(f"unsupported protocol version {self.protocol_version}")

    @classmethod
    def parse(cls, text: str, timeout: float = 60.0) -> "ExternalAdapterSpec":
        return cls(tuple(shlex.split(text)), PROTOCOL_VERSION, timeout)


class ExternalAdapter:
    """One long-lived child process serving every adapter role.

    Calls are serialized; use one instance per worker for parallel runs.
    """

    def __init__(self, spec: ExternalAdapterSpec):
        self.spec = spec
        self.identifier = "external:" + " ".join(spec.command)
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._tmp = tempfile.TemporaryDirectory(prefix="lmanon-ext-")
        self._counter = 0

    def _start(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    list(self.spec.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise AdapterProtocolError(f"cannot start {self.spec.command[0]}: {exc}") from exc
            self._lines = queue.Queue()
            threading.Thread(target=self._pump, args=(self._proc.stdout, self._lines), daemon=True).start()
        return self._proc

    @staticmethod
    def _pump(stream, sink: queue.Queue) -> None:
        for line in stream:
            sink.put(line)
        sink.put(None)

    def request(self, role: str, image: FaceImage) -> object:
        """Send one image and return the role's payload (may be None)."""
        if role not in ROLES:
            raise InvalidArgumentError(f"unknown adapter role {role!r}")
        with self._lock:
            proc = self._start()
            path = Path(self._tmp.name) / f"{self._counter:06d}.png"
            self._counter += 1
            save_image(image, path)
            req = {"protocol_version": self.spec.protocol_version, "role": role, "image": str(path)}
            try:
                proc.stdin.write(json.dumps(req) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise AdapterProtocolError(f"adapter process closed its input: {exc}") from exc
            try:
                line = self._lines.get(timeout=self.spec.timeout)
            except queue.Empty:
                self.close(kill=True)
                raise AdapterProtocolError(f"no response within {self.spec.timeout}s") from None
            path.unlink(missing_ok=True)
        if line is None:
            raise AdapterProtocolError("adapter process exited without responding")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AdapterProtocolError(f"malformed response: {line[:200]!r}") from exc
        if not isinstance(resp, dict):
            raise AdapterProtocolError("response is not a JSON object")
        if resp.get("protocol_version") != self.spec.protocol_version:
            raise AdapterProtocolError(
                f"protocol_version {resp.get('protocol_version')!r}, expected {self.spec.protocol_version}"
            )
        if "error" in resp:
            raise AdapterProtocolError(f"adapter reported: {resp['error']}")
        key = _PAYLOAD[role]
        if key not in resp:
            raise AdapterProtocolError(f"{role} response lacks {key!r}")
        return resp[key]

    def detect(self, image: FaceImage) -> list[FaceDetection]:
        payload = self.request("detector", image)
        try:
            return [FaceDetection.from_json(d) for d in payload]
        except (TypeError, KeyError, ValueError) as exc:
            raise AdapterProtocolError(f"bad detections: {exc}") from exc

    def segment(self, face: FaceImage) -> SegmentationMask:
        payload = self.request("segmenter", face)
        try:
            m = load_gray_u8(payload)
        except (TypeError, OSError) as exc:
            raise AdapterProtocolError(f"bad mask path {payload!r}: {exc}") from exc
        return SegmentationMask((m > 0).astype(np.uint8))

    def landmarks(self, face: FaceImage) -> LandmarkSet | None:
        payload = self.request("landmarker", face)
        if payload is None:
            return None
        try:
            return LandmarkSet.from_triples(payload)
        except (TypeError, ValueError) as exc:
            raise AdapterProtocolError(f"bad landmarks: {exc}") from exc

    def embed(self, image: FaceImage) -> np.ndarray | None:
        payload = self.request("embedder", image)
        if payload is None:
            return None
        try:
            return np.asarray(payload, dtype=np.float64).ravel()
        except (TypeError, ValueError) as exc:
            raise AdapterProtocolError(f"bad embedding: {exc}") from exc

    def predict(self, image: FaceImage) -> dict[str, float]:
        payload = self.request("classifier", image)
        if not isinstance(payload, dict):
            raise AdapterProtocolError("probabilities must be a JSON object")
        try:
            return {str(k): float(v) for k, v in payload.items()}
        except (TypeError, ValueError) as exc:
            raise AdapterProtocolError(f"bad probabilities: {exc}") from exc

    def close(self, kill: bool = False) -> None:
        if self._proc is not None:
            if kill:
                self._proc.kill()
            if self._proc.poll() is None:
                try:
                    self._proc.stdin.close()
                    self._proc.wait(timeout=5)
                except (OSError, subprocess.TimeoutExpired):
                    self._proc.kill()
                    self._proc.wait()
            else:
                self._proc.stdin.close()
            self._proc.stdout.close()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        self._tmp.cleanup()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass
