"""Bit-exact binary checkpoints for simulation state.

Layout (little endian):

    magic   6 bytes  "CHVI1\\0"
    u32     dim
    u32     n                  interior modes per axis
    u64     step index
    f64     time
    f64     eps
    f64[m]  u coefficients     m = n^dim, C order
    f64[m]  v coefficients
    f64     running dissipation integral

Readers reject wrong magic and any payload whose length is not exactly the
size implied by the header.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"CHVI1\x00"
_HEADER = struct.Struct("<IIQdd")


class CheckpointError(ValueError):
    """Raised for malformed, truncated or mismatched checkpoint files."""


@dataclass
class CheckpointData:
    dim: int
    n: int
    step: int
    t: float
    eps: float
    u_coeffs: np.ndarray
    v_coeffs: np.ndarray
    dissipation_integral: float


def encode(data: CheckpointData) -> bytes:
    shape = (data.n,) * data.dim
    u = np.ascontiguousarray(data.u_coeffs, dtype="<f8")
    v = np.ascontiguousarray(data.v_coeffs, dtype="<f8")
    if u.shape != shape or v.shape != shape:
        raise CheckpointError(
            f"coefficient shape {u.shape}/{v.shape} does not match dim={data.dim} n={data.n}"
        )
    return b"".join(
        [
            MAGIC,
            _HEADER.pack(data.dim, data.n, data.step, data.t, data.eps),
            u.tobytes(),
            v.tobytes(),
            struct.pack("<d", data.dissipation_integral),
        ]
    )


def decode(blob: bytes) -> CheckpointData:
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic: not a CHVI1 checkpoint")
    off = len(MAGIC)
    if len(blob) < off + _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    dim, n, step, t, eps = _HEADER.unpack_from(blob, off)
    off += _HEADER.size
    if dim not in (1, 2) or n < 1:
        raise CheckpointError(f"implausible header: dim={dim} n={n}")
    m = n**dim
    expect = off + 2 * 8 * m + 8
    if len(blob) != expect:
        raise CheckpointError(
            f"payload length {len(blob)} does not match header (expected {expect})"
        )
    shape = (n,) * dim
    u = np.frombuffer(blob, dtype="<f8", count=m, offset=off).reshape(shape).copy()
    off += 8 * m
    v = np.frombuffer(blob, dtype="<f8", count=m, offset=off).reshape(shape).copy()
    off += 8 * m
    (diss,) = struct.unpack_from("<d", blob, off)
    return CheckpointData(dim, n, step, t, eps, u, v, diss)


def write_checkpoint(path, data: CheckpointData):
    with open(path, "wb") as f:
        f.write(encode(data))


def read_checkpoint(path) -> CheckpointData:
    with open(path, "rb") as f:
        return decode(f.read())
