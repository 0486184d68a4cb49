"""Flat binary dump of agent weights.

Layout (all little-endian)::

    8 bytes   magic  b"HNETRLW1"
    uint32    format version (1)
    uint32    number of networks
    per network:
        uint32        name length, then the UTF-8 name
        uint32        number of layer sizes n
        uint32 * n    layer sizes (input first)
        per layer i:  float64 weight matrix (size[i] x size[i+1], row-major),
                      then float64 bias (size[i+1])
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mlp import MLP

MAGIC = b"HNETRLW1"
VERSION = 1


def dump_networks(nets: dict[str, MLP], path) -> None:
    out = bytearray(MAGIC)
    out += struct.pack("<II", VERSION, len(nets))
    for name, net in nets.items():
        raw = name.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw
        out += struct.pack(f"<I{len(net.sizes)}I", len(net.sizes), *net.sizes)
        for w, b in zip(net.weights, net.biases):
            out += w.astype("<f8").tobytes(order="C")
            out += b.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def load_networks(path) -> dict[str, MLP]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a weight dump (bad magic)")
    version, count = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    pos = 16
    nets = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + n].decode("utf-8")
        pos += n
        (ns,) = struct.unpack_from("<I", data, pos)
        pos += 4
        sizes = list(struct.unpack_from(f"<{ns}I", data, pos))
        pos += 4 * ns
        net = MLP(sizes, zero=True)
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            net.weights[i] = np.frombuffer(data, "<f8", a * b, pos).reshape(a, b).copy()
            pos += 8 * a * b
            net.biases[i] = np.frombuffer(data, "<f8", b, pos).copy()
            pos += 8 * b
        nets[name] = net
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return nets


def dump_agent(agent, path) -> None:
    dump_networks({"q": agent.q_net, "policy": agent.policy_net}, path)
