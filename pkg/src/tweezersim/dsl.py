"""Line-based DSL for manipulation sequences.

One step per line, ``<step_name> key=value ...``; ``#`` starts a comment.
Lengths are micrometers, durations seconds.  Optional ``@name`` and
``@target_distance`` directive lines attach metadata.  Rendering a parsed
sequence back to text round-trips modulo whitespace and comments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields
from typing import Optional, Union


class SequenceError(Exception):
    """Base class for sequence parsing and execution errors."""


class SequenceSyntaxError(SequenceError):
    def __init__(self, message: str, line: int, column: int, token: str = ""):
        self.line, self.column, self.token = line, column, token
        tok = f" near {token!r}" if token else ""
        super().__init__(f"line {line}, column {column}: {message}{tok}")


class SequenceRangeError(SequenceError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class LoadAtoms:
    kind = "load_atoms"
    count: int
    spread: float


@dataclass(frozen=True)
class Image:
    kind = "image"
    exposure: float


@dataclass(frozen=True)
class TransportHDT:
    kind = "transport_hdt"
    atom: int
    target_y: float
    duration: float


@dataclass(frozen=True)
class ExtractVDT:
    kind = "extract_vdt"
    atom: int
    lift: float
    duration: float


@dataclass(frozen=True)
class TiltHDT:
    kind = "tilt_hdt"
    delta_x: float
    duration: float


@dataclass(frozen=True)
class TransportVDT:
    kind = "transport_vdt"
    target_z: float
    duration: float


@dataclass(frozen=True)
class MergeRadial:
    kind = "merge_radial"
    duration: float


@dataclass(frozen=True)
class RampVDT:
    kind = "ramp_vdt"
    final_scale: float
    duration: float


@dataclass(frozen=True)
class Molasses:
    kind = "molasses"
    duration: float


Step = Union[LoadAtoms, Image, TransportHDT, ExtractVDT, TiltHDT,
             TransportVDT, MergeRadial, RampVDT, Molasses]

# Steps that physically move atoms or traps; used to locate the end of the
# manipulation proper within a sequence.
MANIPULATION_KINDS = frozenset(
    ("transport_hdt", "extract_vdt", "tilt_hdt", "transport_vdt",
     "merge_radial", "ramp_vdt"))

TILT_MAX_UM = 40.0
VDT_TRANSPORT_MAX_UM = 60.0


def _positive(name, bound_text):
    def check(v):
        if not v > 0:
            raise SequenceRangeError(f"{name} violates bound: {bound_text}")
    return check


def _abs_bound(name, limit):
    def check(v):
        if abs(v) > limit:
            raise SequenceRangeError(
                f"{name} violates bound: |{name}| <= {limit:g} um")
    return check


def _unit_interval(name):
    def check(v):
        if not 0.0 <= v <= 1.0:
            raise SequenceRangeError(f"{name} violates bound: {name} in [0, 1]")
    return check


def _finite(name):
    def check(v):
        if not math.isfinite(v):
            raise SequenceRangeError(f"{name} must be finite")
    return check


# step name -> (class, [(dsl key, attr, type, validator), ...])
_GRAMMAR = {
    "load_atoms": (LoadAtoms, [
        ("count", "count", int, _positive("count", "count >= 1")),
        ("spread", "spread", float, _positive("spread", "spread > 0 um")),
    ]),
    "image": (Image, [
        ("exposure", "exposure", float, _positive("exposure", "exposure > 0 s")),
    ]),
    "transport_hdt": (TransportHDT, [
        ("atom", "atom", int, _positive("atom", "atom id >= 1")),
        ("y", "target_y", float, _finite("y")),
        ("dur", "duration", float, _positive("dur", "dur > 0 s")),
    ]),
    "extract_vdt": (ExtractVDT, [
        ("atom", "atom", int, _positive("atom", "atom id >= 1")),
        ("lift", "lift", float, _finite("lift")),
        ("dur", "duration", float, _positive("dur", "dur > 0 s")),
    ]),
    "tilt_hdt": (TiltHDT, [
        ("dx", "delta_x", float, _abs_bound("dx", TILT_MAX_UM)),
        ("dur", "duration", float, _positive("dur", "dur > 0 s")),
    ]),
    "transport_vdt": (TransportVDT, [
        ("z", "target_z", float, _abs_bound("z", VDT_TRANSPORT_MAX_UM)),
        ("dur", "duration", float, _positive("dur", "dur > 0 s")),
    ]),
    "merge_radial": (MergeRadial, [
        ("dur", "duration", float, _positive("dur", "dur > 0 s")),
    ]),
    "ramp_vdt": (RampVDT, [
        ("scale", "final_scale", float, _unit_interval("scale")),
        ("dur", "duration", float, _positive("dur", "dur > 0 s")),
    ]),
    "molasses": (Molasses, [
        ("dur", "duration", float, _positive("dur", "dur > 0 s")),
    ]),
}


@dataclass(frozen=True)
class Sequence:
    """A parsed manipulation sequence plus metadata."""

    steps: tuple
    name: Optional[str] = None
    target_distance: Optional[float] = None

    def last_manipulation_index(self) -> int:
        """Index of the final trap/atom manipulation step, -1 if none."""
        last = -1
        for i, step in enumerate(self.steps):
            if step.kind in MANIPULATION_KINDS:
                last = i
        return last


def _parse_value(raw: str, to_type, line_no: int, col: int):
    try:
        if to_type is int:
            return int(raw)
        value = float(raw)
    except ValueError:
        raise SequenceSyntaxError(
            f"expected {'an integer' if to_type is int else 'a number'}",
            line_no, col, raw) from None
    return value


def parse_sequence(text: str) -> Sequence:
    """Parse DSL text; raises SequenceSyntaxError / SequenceRangeError."""
    steps = []
    name = None
    target_distance = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0]
        if not line.strip():
            continue
        tokens = line.split()
        head = tokens[0]
        head_col = line.index(head) + 1

        if head.startswith("@"):
            if len(tokens) != 2:
                raise SequenceSyntaxError("directive takes one value",
                                          line_no, head_col, head)
            if head == "@name":
                name = tokens[1]
            elif head == "@target_distance":
                target_distance = _parse_value(tokens[1], float, line_no, head_col)
            else:
                raise SequenceSyntaxError("unknown directive", line_no,
                                          head_col, head)
            continue

        if head not in _GRAMMAR:
            raise SequenceSyntaxError("unknown step name", line_no,
                                      head_col, head)
        cls, spec = _GRAMMAR[head]
        expected = {key: (attr, typ, check) for key, attr, typ, check in spec}
        got = {}
        search_from = 0
        for tok in tokens[1:]:
            col = line.index(tok, search_from) + 1
            search_from = col - 1 + len(tok)
            if "=" not in tok:
                raise SequenceSyntaxError("expected key=value", line_no,
                                          col, tok)
            key, raw_val = tok.split("=", 1)
            if key not in expected:
                raise SequenceSyntaxError(f"unknown key for {head}", line_no,
                                          col, key)
            if key in got:
                raise SequenceSyntaxError("duplicate key", line_no, col, key)
            attr, typ, check = expected[key]
            value = _parse_value(raw_val, typ, line_no, col)
            try:
                check(value)
            except SequenceRangeError as err:
                raise SequenceRangeError(str(err), line_no, col) from None
            got[key] = (attr, value)
        missing = [k for k in expected if k not in got]
        if missing:
            raise SequenceSyntaxError(
                f"missing key(s) for {head}: {', '.join(missing)}",
                line_no, head_col, head)
        steps.append(cls(**{attr: value for attr, value in got.values()}))
    return Sequence(steps=tuple(steps), name=name,
                    target_distance=target_distance)


def _format_value(value) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def render_sequence(seq: Sequence) -> str:
    """Canonical text for a sequence; parse(render(s)) == s."""
    lines = []
    if seq.name is not None:
        lines.append(f"@name {seq.name}")
    if seq.target_distance is not None:
        lines.append(f"@target_distance {_format_value(seq.target_distance)}")
    for step in seq.steps:
        _, spec = _GRAMMAR[step.kind]
        parts = [step.kind]
        for key, attr, _typ, _check in spec:
            parts.append(f"{key}={_format_value(getattr(step, attr))}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")
