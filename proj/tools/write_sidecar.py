#!/usr/bin/env python3
"""Pack recording-level embeddings from a CSV into an .otse sidecar file.

Input rows are ``id,v0,v1,...,v{d-1}`` with no header. Every row must have the
same number of values.

    write_sidecar.py vectors.csv out.otse --embedder-id external:vggish;outputs=embedding
"""

import argparse
import csv
import struct
import sys

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("out")
    ap.add_argument("--embedder-id", required=True)
    args = ap.parse_args()

    vectors = {}
    dim = None
    with open(args.csv, newline="", encoding="utf-8") as f:
        for lineno, row in enumerate(csv.reader(f), 1):
            if not row:
                continue
            rid, values = row[0], [float(v) for v in row[1:]]
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                sys.exit(f"line {lineno}: expected {dim} values, got {len(values)}")
            if rid in vectors:
                sys.exit(f"line {lineno}: duplicate id '{rid}'")
            vectors[rid] = values
    if dim is None:
        sys.exit("no vectors in input")

    body = bytearray(b"OTSE")
    body += struct.pack("<I", 1)
    body += pack_str(args.embedder_id)
    body += struct.pack("<IQ", dim, len(vectors))
    for rid in sorted(vectors):
        body += pack_str(rid)
        body += struct.pack("<I", dim)
        body += struct.pack(f"<{dim}d", *vectors[rid])
    body += struct.pack("<Q", fnv1a64(bytes(body)))
    with open(args.out, "wb") as f:
        f.write(body)
    print(f"wrote {len(vectors)} vectors of dimension {dim} to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
