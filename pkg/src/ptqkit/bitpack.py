"""Fixed-width bit field packing.

Fields are laid out back to back with no alignment, least significant bit
first, and the bit stream is flushed into bytes LSB-first (the first bit of
the stream is bit 0 of byte 0).  The final byte is zero padded.  Streams
with mixed field widths are supported by packing groups: each group is a
run of fields that share one width.
"""

from __future__ import annotations

import numpy as np


def pack_groups(groups: list[tuple[np.ndarray, int]]) -> tuple[bytes, int]:
    """Pack runs of equal-width unsigned fields into one byte stream.

    Each group is (values, width).  Returns (data, nbits) where nbits is
    the exact payload length before padding.
    """
    chunks = []
    nbits = 0
    for values, width in groups:
        if width < 1 or width > 32:
            raise ValueError(f"field width {width} out of range 1..32")
        vals = np.ascontiguousarray(values, dtype=np.uint64)
        if vals.size and int(vals.max()) >> width:
            raise ValueError(f"value does not fit in {width} bits")
        # (n, width) matrix of bits, LSB first along axis 1
        bits = (vals[:, None] >> np.arange(width, dtype=np.uint64)) & 1
        chunks.append(bits.astype(np.uint8).ravel())
        nbits += vals.size * width
    if not chunks:
        return b"", 0
    stream = np.concatenate(chunks)
    return np.packbits(stream, bitorder="little").tobytes(), nbits


def unpack_groups(data: bytes, groups: list[tuple[int, int]]) -> list[np.ndarray]:
    """Inverse of pack_groups.

    Each group is (count, width).  Returns one uint64 array per group.
    Raises ValueError if the byte buffer cannot hold the declared bits.
    """
    nbits = sum(count * width for count, width in groups)
    if len(data) * 8 < nbits:
        raise ValueError(
            f"buffer holds {len(data) * 8} bits, {nbits} declared"
        )
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    out = []
    pos = 0
    for count, width in groups:
        take = bits[pos : pos + count * width].reshape(count, width)
        weights = np.uint64(1) << np.arange(width, dtype=np.uint64)
        out.append(take.astype(np.uint64) @ weights)
        pos += count * width
    return out


def pack_flags(flags: np.ndarray) -> tuple[bytes, int]:
    """Pack a boolean array at one bit per element, LSB-first."""
    arr = np.ascontiguousarray(flags, dtype=np.uint8)
    return np.packbits(arr, bitorder="little").tobytes(), arr.size


def unpack_flags(data: bytes, count: int) -> np.ndarray:
    """Unpack `count` boolean flags packed by pack_flags."""
    if len(data) * 8 < count:
        raise ValueError(f"buffer holds {len(data) * 8} bits, {count} declared")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    return bits[:count].astype(bool)


def padded_len(nbits: int) -> int:
    """Byte length of a packed stream of nbits bits."""
    return (nbits + 7) // 8
