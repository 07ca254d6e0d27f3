"""Binary archive for weighted digraph sequences.

Layout (all little-endian):

    magic   4 bytes  b"FCGR"
    version u32      currently 1
    count   u64      number of records
    record, repeated `count` times:
        date        10 bytes ASCII  YYYY-MM-DD
        n_vertices  u32
        edge_count  u64
        edges       edge_count * (u32 src, u32 tgt, f64 weight)

A JSON sidecar at `<path>.json` carries the construction parameters
(window width, correlation kind, embedding settings, tickers).
"""

from __future__ import annotations

import json
import struct
from datetime import date
from pathlib import Path

from .errors import DataError
from .corrnet import WeightedDigraph

MAGIC = b"FCGR"
VERSION = 1
_HEAD = struct.Struct("<4sIQ")
_REC_HEAD = struct.Struct("<10sIQ")
_EDGE = struct.Struct("<IId")


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_graphs(path, graphs: list[WeightedDigraph], params: dict) -> None:
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_HEAD.pack(MAGIC, VERSION, len(graphs)))
        for g in graphs:
            if g.as_of_date is None:
                raise DataError("cannot archive a graph without a date")
            f.write(
                _REC_HEAD.pack(
                    g.as_of_date.isoformat().encode("ascii"),
                    g.n_vertices,
                    len(g.edges),
                )
            )
            for s, t, w in g.edges:
                f.write(_EDGE.pack(s, t, w))
    with open(sidecar_path(path), "w", encoding="utf-8") as f:
        json.dump(params, f, indent=2, sort_keys=True)
        f.write("\n")


def read_graphs(path) -> tuple[list[WeightedDigraph], dict]:
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(_HEAD.size)
        if len(head) < _HEAD.size:
            raise DataError(f"{path}: truncated graph archive header")
        magic, version, count = _HEAD.unpack(head)
        if magic != MAGIC:
            raise DataError(f"{path}: not a graph archive (bad magic {magic!r})")
        if version != VERSION:
            raise DataError(f"{path}: unsupported archive version {version}")
        graphs = []
        for _ in range(count):
            rec = f.read(_REC_HEAD.size)
            if len(rec) < _REC_HEAD.size:
                raise DataError(f"{path}: truncated record header")
            date_bytes, n, edge_count = _REC_HEAD.unpack(rec)
            as_of = date.fromisoformat(date_bytes.decode("ascii"))
            raw = f.read(_EDGE.size * edge_count)
            if len(raw) < _EDGE.size * edge_count:
                raise DataError(f"{path}: truncated edge block")
            edges = [
                _EDGE.unpack_from(raw, i * _EDGE.size) for i in range(edge_count)
            ]
            graphs.append(
                WeightedDigraph(
                    n_vertices=n,
                    edges=[(s, t, w) for s, t, w in edges],
                    as_of_date=as_of,
                )
            )
    side = sidecar_path(path)
    params = {}
    if side.exists():
        with open(side, "r", encoding="utf-8") as f:
            params = json.load(f)
    return graphs, params
