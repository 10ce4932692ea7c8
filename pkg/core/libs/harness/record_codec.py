"""Record framing and output sinks.

Framed records use a 10-byte left-justified ASCII length header followed by
the UTF-8 JSON body and go to outputs named *.frames; line records are JSON
with sorted keys, one per line.
"""
import csv
import json
import math
import threading

import numpy as np

from core.libs.errors import InvalidArgumentError

HEADER_LENGTH = 10
FRAMED_SUFFIX = ".frames"


def _plain(value):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps(record):
    return json.dumps(_plain(record), sort_keys=True, allow_nan=False)


def encode_frame(record):
    data = dumps(record).encode('utf-8')
    header = f"{len(data):<{HEADER_LENGTH}}".encode('utf-8')
    return header + data


def decode_frames(buffer):
    """All complete records in `buffer` and the unconsumed tail."""
    records = []
    offset = 0
    while len(buffer) - offset >= HEADER_LENGTH:
        header = buffer[offset:offset + HEADER_LENGTH]
        try:
            msg_len = int(header.decode('utf-8').strip())
        except ValueError:
            raise InvalidArgumentError(f"malformed frame header {header!r}")
        start = offset + HEADER_LENGTH
        if len(buffer) - start < msg_len:
            break
        records.append(json.loads(buffer[start:start + msg_len].decode('utf-8')))
        offset = start + msg_len
    return records, buffer[offset:]


class RecordWriter:
    """Append-only JSON Lines sink; writes are serialized behind an RLock."""

    def __init__(self, stream):
        self.stream = stream
        self.lock = threading.RLock()
        self.count = 0

    def write(self, record):
        line = dumps(record)
        with self.lock:
            self.stream.write(line + "\n")
            self.count += 1

    def flush(self):
        with self.lock:
            self.stream.flush()


class FrameWriter(RecordWriter):
    """Binary sink of length-framed records, for consumers that read a byte stream."""

    def write(self, record):
        frame = encode_frame(record)
        with self.lock:
            self.stream.write(frame)
            self.count += 1


def read_frames(path):
    """Every record of a framed output file; a truncated last frame is an error."""
    with open(path, "rb") as handle:
        records, tail = decode_frames(handle.read())
    if tail:
        raise InvalidArgumentError(f"{path} ends with a truncated frame of {len(tail)} bytes")
    return records


def open_sink(path):
    """(stream, writer) for `path`: framed when it ends with FRAMED_SUFFIX, JSON Lines otherwise."""
    if path.endswith(FRAMED_SUFFIX):
        stream = open(path, "wb")
        return stream, FrameWriter(stream)
    stream = open(path, "w", encoding="utf-8")
    return stream, RecordWriter(stream)


def write_summary_csv(path, rows):
    """Flat rows as CSV with a header row (union of keys, sorted)."""
    rows = [_plain(r) for r in rows]
    fields = sorted({k for r in rows for k in r})
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    return fields
