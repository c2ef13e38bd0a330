# Copyright (C) 2021, edgecloud contributors
#
# This file is part of edgecloud
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

import json
import struct
from collections import deque
from dataclasses import dataclass
import numpy as np
from edgecloud.harness.exceptions import PipelineException

LENGTH = struct.Struct("<I")
PAYLOAD_DTYPE = np.dtype("<f8")


@dataclass(frozen=True)
class UploadMessage:
    t: int
    edge_ids: tuple
    payload: np.ndarray
    s_total: int
    emitted_at: int

    def header(self):
        return {"t": self.t, "edge_ids": list(self.edge_ids), "s_total": self.s_total,
                "emitted_at": self.emitted_at, "shape": list(self.payload.shape)}


class UploadChannel(object):
    """In-process FIFO between the edge vote and the cloud analyzer."""

    def __init__(self, n_sensors, window_length):
        self.shape = (n_sensors, window_length)
        self.queue = deque()
        self.sent = 0

    def send(self, message):
        if message.payload.shape != self.shape:
            raise PipelineException(f"upload payload {message.payload.shape} does not match network {self.shape}")
        self.queue.append(message)
        self.sent += 1

    def drain(self):
        while self.queue:
            yield self.queue.popleft()


def write_uploads(messages, path):
    with open(path, "wb") as f:
        for message in messages:
            header = json.dumps(message.header(), sort_keys=True).encode("UTF-8")
            payload = np.ascontiguousarray(message.payload, dtype=PAYLOAD_DTYPE).tobytes()
            f.write(LENGTH.pack(len(header)))
            f.write(header)
            f.write(LENGTH.pack(len(payload)))
            f.write(payload)


def read_uploads(path):
    messages = []
    with open(path, "rb") as f:
        data = f.read()

    pos = 0
    while pos < len(data):
        header, pos = _read_record(data, pos, path)
        payload, pos = _read_record(data, pos, path)
        h = json.loads(header.decode("UTF-8"))
        values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).astype(np.float64).reshape(h["shape"])
        messages.append(UploadMessage(h["t"], tuple(h["edge_ids"]), values, h["s_total"], h["emitted_at"]))
    return messages


def _read_record(data, pos, path):
    if pos + LENGTH.size > len(data):
        raise PipelineException(f"{path}: truncated length prefix at byte {pos}")
    (length,) = LENGTH.unpack_from(data, pos)
    pos += LENGTH.size
    if pos + length > len(data):
        raise PipelineException(f"{path}: truncated record at byte {pos}")
    return data[pos:pos + length], pos + length
