# Copyright 2026 The NatLan Harness Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Reader and writer for ACTV1 activation dumps.

    ACTV1 d=<dim> n=<count>
    <question_id>\t<method_id>\t<base64 of dim little-endian float32>
"""

import base64
import math
import re
import struct

_HEADER = re.compile(r"^ACTV1 d=([1-9][0-9]*) n=([0-9]+)$")


class Actv1Error(ValueError):
    def __init__(self, line, message):
        super().__init__(f"{message} (line {line})")
        self.line = line


def _check_id(value, what):
    if not value or any(c in value for c in "\t\r\n"):
        raise ValueError(f"bad {what}: {value!r}")


def dumps(records):
    """records: iterable of (question_id, method_id, sequence of floats)."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    dim = len(records[0][2])
    lines = [f"ACTV1 d={dim} n={len(records)}"]
    seen = set()
    for qid, mid, vec in records:
        _check_id(qid, "question id")
        _check_id(mid, "method id")
        if len(vec) != dim:
            raise ValueError(f"vector of {len(vec)} values, expected {dim}")
        if (qid, mid) in seen:
            raise ValueError(f"duplicate record {qid}/{mid}")
        seen.add((qid, mid))
        packed = struct.pack(f"<{dim}f", *vec)
        if not all(math.isfinite(x) for x in struct.unpack(f"<{dim}f", packed)):
            raise ValueError("non-finite value")
        lines.append(f"{qid}\t{mid}\t{base64.b64encode(packed).decode('ascii')}")
    return "\n".join(lines) + "\n"


def loads(text):
    """Returns (dim, [(question_id, method_id, tuple of floats)])."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise Actv1Error(1, "empty dump")
    m = _HEADER.match(lines[0])
    if not m:
        raise Actv1Error(1, "bad header")
    dim, count = int(m.group(1)), int(m.group(2))
    out, seen = [], set()
    for no, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise Actv1Error(no, "expected 3 tab-separated fields")
        qid, mid, payload = parts
        try:
            raw = base64.b64decode(payload, validate=True)
        except ValueError:
            raise Actv1Error(no, "bad base64") from None
        if len(raw) != 4 * dim:
            raise Actv1Error(no, f"{len(raw)} bytes, expected {4 * dim}")
        vec = struct.unpack(f"<{dim}f", raw)
        if not all(math.isfinite(x) for x in vec):
            raise Actv1Error(no, "non-finite value")
        if (qid, mid) in seen:
            raise Actv1Error(no, f"duplicate record {qid}/{mid}")
        seen.add((qid, mid))
        out.append((qid, mid, vec))
    if len(out) != count:
        raise Actv1Error(1, f"header says {count} records, found {len(out)}")
    return dim, out


def load(path):
    with open(path, encoding="utf-8") as f:
        return loads(f.read())


def dump(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(records))
