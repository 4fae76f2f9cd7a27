"""Address-event representation: word packing, routing and event files.

Address scheme v1 (32-bit words, fields packed from bit 0 upwards):

    input word    bits 0-3   branch mask
                  bits 4-9   synapse block (0-63)
                  bits 10-15 target neuron within the core (0-63)
                  bits 16-23 core id
                  bits 24-31 reserved, must be zero

    output word   bits 0-7   neuron id
                  bits 8-15  reserved, must be zero
                  bits 16-23 core id
                  bits 24-31 reserved, must be zero

The core field sits at the same position in both words so a router can
read it without knowing the word type.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import MalformedEvent

__all__ = [
    "ADDRESS_SCHEME_VERSION",
    "AerEvent",
    "RouterTable",
    "RouteStats",
    "encode_input",
    "decode_input",
    "encode_output",
    "decode_output",
    "route",
    "read_events",
    "write_events",
    "format_events",
]

ADDRESS_SCHEME_VERSION = 1

_MASK_BITS, _BLOCK_BITS, _NEURON_IN_BITS = 4, 6, 6
_CORE_SHIFT = 16
_INPUT_RESERVED = 0xFF000000
_OUTPUT_RESERVED = 0xFF00FF00


@dataclass(frozen=True, order=True)
class AerEvent:
    timestamp: float
    address: int

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise MalformedEvent(f"timestamp must be finite and >= 0, got {self.timestamp!r}")
        if not (isinstance(self.address, int) and 0 <= self.address < 2**32):
            raise MalformedEvent(f"address must be a 32-bit word, got {self.address!r}")


def _field(name, value, bits):
    if not (isinstance(value, int) and 0 <= value < 1 << bits):
        raise MalformedEvent(f"{name} out of range [0, {1 << bits}): {value!r}")
    return value


def encode_input(core: int, block: int, mask: int, neuron: int = 0) -> int:
    _field("core", core, 8)
    _field("block", block, _BLOCK_BITS)
    _field("mask", mask, _MASK_BITS)
    _field("neuron", neuron, _NEURON_IN_BITS)
    return core << _CORE_SHIFT | neuron << 10 | block << 4 | mask


def decode_input(word: int) -> tuple[int, int, int, int]:
    """Unpack an input word into ``(core, block, mask, neuron)``."""
    if not (isinstance(word, int) and 0 <= word < 2**32):
        raise MalformedEvent(f"not a 32-bit word: {word!r}")
    if word & _INPUT_RESERVED:
        raise MalformedEvent(f"reserved bits set in input word 0x{word:08x}")
    return word >> _CORE_SHIFT & 0xFF, word >> 4 & 0x3F, word & 0xF, word >> 10 & 0x3F


def encode_output(core: int, neuron: int) -> int:
    _field("core", core, 8)
    _field("neuron", neuron, 8)
    return core << _CORE_SHIFT | neuron


def decode_output(word: int) -> tuple[int, int]:
    if not (isinstance(word, int) and 0 <= word < 2**32):
        raise MalformedEvent(f"not a 32-bit word: {word!r}")
    if word & _OUTPUT_RESERVED:
        raise MalformedEvent(f"reserved bits set in output word 0x{word:08x}")
    return word >> _CORE_SHIFT & 0xFF, word & 0xFF


@dataclass(frozen=True)
class RouterTable:
    """Fan-out from a source neuron ``(core, neuron)`` to input words.

    ``cores`` optionally lists the valid destination core ids; when given,
    every destination must address one of them.
    """

    routes: Mapping[tuple, tuple] = field(default_factory=dict)
    cores: tuple = ()

    def __post_init__(self):
        clean = {}
        valid = set(self.cores)
        for src, dests in self.routes.items():
            core, neuron = src
            encode_output(core, neuron)
            words = tuple(int(w) for w in dests)
            for w in words:
                dcore = decode_input(w)[0]
                if valid and dcore not in valid:
                    raise MalformedEvent(f"route from {src} targets missing core {dcore}")
            clean[(core, neuron)] = words
        object.__setattr__(self, "routes", clean)

    def destinations(self, core: int, neuron: int) -> tuple:
        return self.routes.get((core, neuron), ())


@dataclass
class RouteStats:
    routed: int = 0
    delivered: int = 0
    dropped: int = 0


def route(event: AerEvent, table: RouterTable, hs_latency: float, stats: RouteStats = None) -> list[AerEvent]:
    """Input events produced by one output spike, in table order."""
    if not hs_latency >= 0:
        raise ValueError(f"hs_latency must be >= 0, got {hs_latency!r}")
    core, neuron = decode_output(event.address)
    dests = table.destinations(core, neuron)
    if stats is not None:
        stats.routed += 1
        if dests:
            stats.delivered += len(dests)
        else:
            stats.dropped += 1
    t = event.timestamp + hs_latency
    return [AerEvent(t, w) for w in dests]


# --- event-stream files ----------------------------------------------------


def _parse_int(text: str) -> int:
    return int(text.strip(), 0)


def _parse_rows(rows: Iterable[Sequence[str]], kind: str) -> Iterator[AerEvent]:
    for lineno, row in rows:
        cells = [c.strip() for c in row]
        if not cells or not cells[0] or cells[0].startswith("#"):
            continue
        if cells[0].lower() in ("timestamp", "time", "timestamp_seconds"):
            continue
        try:
            t = float(cells[0])
            if len(cells) == 2:
                word = _parse_int(cells[1])
                if kind == "input":
                    decode_input(word)
                else:
                    decode_output(word)
            elif kind == "input" and len(cells) in (4, 5):
                core, block, mask = (_parse_int(c) for c in cells[1:4])
                neuron = _parse_int(cells[4]) if len(cells) == 5 else 0
                word = encode_input(core, block, mask, neuron)
            elif kind == "output" and len(cells) == 3:
                word = encode_output(_parse_int(cells[1]), _parse_int(cells[2]))
            else:
                raise MalformedEvent(f"unexpected column count {len(cells)}")
            yield AerEvent(t, word)
        except (ValueError, MalformedEvent) as exc:
            raise MalformedEvent(f"line {lineno}: {exc}") from None


def read_events(source: Union[str, os.PathLike, io.TextIOBase], kind: str = "input") -> list[AerEvent]:
    """Read an event stream and return it sorted by timestamp.

    Accepts ``timestamp,address_hex`` rows or the expanded
    ``timestamp,core,block,mask[,neuron]`` form for input streams
    (``timestamp,core,neuron`` for output streams).  Blank lines, ``#``
    comments and a header row are skipped.
    """
    if kind not in ("input", "output"):
        raise ValueError(f"kind must be 'input' or 'output', got {kind!r}")
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_events(fh, kind)
    rows = ((i, row) for i, row in enumerate(csv.reader(source), start=1))
    events = list(_parse_rows(rows, kind))
    events.sort(key=lambda e: e.timestamp)
    return events


def format_events(events: Iterable[AerEvent], expanded: bool = False, kind: str = "input") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not expanded:
        w.writerow(["timestamp", "address"])
        for e in events:
            w.writerow([repr(e.timestamp), f"0x{e.address:08x}"])
    elif kind == "input":
        w.writerow(["timestamp", "core", "block", "mask", "neuron"])
        for e in events:
            core, block, mask, neuron = decode_input(e.address)
            w.writerow([repr(e.timestamp), core, block, mask, neuron])
    else:
        w.writerow(["timestamp", "core", "neuron"])
        for e in events:
            core, neuron = decode_output(e.address)
            w.writerow([repr(e.timestamp), core, neuron])
    return buf.getvalue()


def write_events(path, events: Iterable[AerEvent], expanded: bool = False, kind: str = "input") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_events(events, expanded, kind))
