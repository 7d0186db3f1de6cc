#!/usr/bin/env python3
"""Writes the golden ZVC files under tests/data with a standalone encoder."""
import struct
import sys
from pathlib import Path

CASES = {
    "zvc_small.zvc": (bytes([0, 5, 0, 3]), 0),
    "zvc_zeros16.zvc": (bytes(16), 1),
    "zvc_empty.zvc": (b"", 2),
    "zvc_tail.zvc": (bytes((i * 37 + 11) % 256 if i % 3 else 0 for i in range(41)), 0x01020304),
}


def encode(data: bytes, context: int) -> bytes:
    bitmap = bytearray((len(data) + 7) // 8)
    payload = bytearray()
    for i, b in enumerate(data):
        if b:
            bitmap[i // 8] |= 1 << (i % 8)
            payload.append(b)
    return b"ZVC1" + struct.pack("<QI", len(data), context) + bytes(bitmap) + bytes(payload)


def main() -> None:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent.parent / "tests" / "data")
    out.mkdir(parents=True, exist_ok=True)
    for name, (data, ctx) in CASES.items():
        (out / name).write_bytes(encode(data, ctx))
        (out / (name[:-4] + ".bin")).write_bytes(data)


if __name__ == "__main__":
    main()
