"""Wire catalog and codec for client-server frames.

Frames are single-line JSON text, version 1. Encoding is canonical: keys
sorted, no whitespace, and numbers printed exactly the way JavaScript
prints them (shortest round-trip digits, fixed notation between 1e-6 and
1e21, no trailing ".0" on integral values, negative zero as "0"). Two
independent codecs that follow these rules produce byte-identical frames,
which is what the golden fixtures pin down.

Decoding is strict: unknown type, missing or extra field, wrong arity,
non-finite number, or wrong version are all rejected, naming the field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .geom import Pose, UnitQuat, Vec3

VERSION = 1

MAX_FRAME_BYTES = 64 * 1024

# the wire's number domain is IEEE doubles; integers beyond this are not exact
MAX_EXACT_INT = 2**53


class ProtocolError(Exception):
    """Base for codec failures."""


class UnencodableMessage(ProtocolError):
    pass


class DecodeError(ProtocolError):
    pass


class MalformedFrame(DecodeError):
    """Not a JSON object frame at all."""


class UnknownType(DecodeError):
    pass


class VersionMismatch(DecodeError):
    pass


class SchemaViolation(DecodeError):
    """Payload does not fit the catalog schema; names the offending field."""

    def __init__(self, field_path: str, reason: str):
        super().__init__(f"{field_path}: {reason}")
        self.field = field_path


class ReliabilityClass(Enum):
    RELIABLE = "reliable"
    DROPPABLE = "droppable"


@dataclass(frozen=True)
class Message:
    type: str
    payload: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# JavaScript-compatible number formatting.


def format_number(x: float) -> str:
    """Print a float exactly as JavaScript's String(x) would.

    Shortest digits that round-trip, fixed notation while the decimal
    point lands in (-6, 21], exponent form outside, and both zeros as "0".
    """
    if math.isnan(x) or math.isinf(x):
        raise UnencodableMessage(f"non-finite number {x!r}")
    if x == 0.0:
        return "0"
    sign = "-" if x < 0.0 else ""
    digits, n = _digits_and_point(repr(abs(x)))
    k = len(digits)
    if k <= n <= 21:
        body = digits + "0" * (n - k)
    elif 0 < n <= 21:
        body = digits[:n] + "." + digits[n:]
    elif -6 < n <= 0:
        body = "0." + "0" * (-n) + digits
    else:
        e = n - 1
        mantissa = digits[0] + ("." + digits[1:] if k > 1 else "")
        body = f"{mantissa}e{'+' if e >= 0 else '-'}{abs(e)}"
    return sign + body


def _digits_and_point(r: str) -> tuple[str, int]:
    """Split repr output into significant digits and the decimal position n,
    so that the value equals 0.digits * 10**n."""
    if "e" in r:
        mantissa, _, exp_text = r.partition("e")
        exp = int(exp_text)
    else:
        mantissa, exp = r, 0
    int_part, _, frac = mantissa.partition(".")
    combined = int_part + frac
    digits = combined.lstrip("0")
    leading = len(combined) - len(digits)
    n = len(int_part) - leading + exp
    return digits.rstrip("0"), n


def dumps_canonical(value) -> str:
    """Canonical JSON text: sorted keys, no whitespace, JS number style."""
    out: list[str] = []
    _write_value(value, out)
    return "".join(out)


def _write_value(value, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, int):
        if not -MAX_EXACT_INT <= value <= MAX_EXACT_INT:
            raise UnencodableMessage(f"integer {value} exceeds exact double range")
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_number(value))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _write_value(item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise UnencodableMessage(f"object key {key!r} is not a string")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _write_value(value[key], out)
        out.append("}")
    else:
        raise UnencodableMessage(f"cannot serialize {type(value).__name__}")


# ---------------------------------------------------------------------------
# Schema validators. Each checks one field and raises SchemaViolation with
# the dotted path of whatever is wrong.


def _check_str(value, path):
    if not isinstance(value, str):
        raise SchemaViolation(path, "expected a string")


def _check_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaViolation(path, "expected an integer")


def _check_number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(path, "expected a number")
    if not math.isfinite(value):
        raise SchemaViolation(path, "non-finite number")


def _check_numbers(count):
    def check(value, path):
        if not isinstance(value, list) or len(value) != count:
            raise SchemaViolation(path, f"expected an array of {count} numbers")
        for i, item in enumerate(value):
            _check_number(item, f"{path}[{i}]")

    return check


_check_vec3 = _check_numbers(3)


def _check_quat(value, path):
    _check_numbers(4)(value, path)
    norm = math.sqrt(sum(c * c for c in value))
    if abs(norm - 1.0) > 1e-6:
        raise SchemaViolation(path, f"quaternion norm {norm} is not 1")


def _check_pose(value, path):
    _check_exact_keys(value, path, {"p", "q"})
    _check_vec3(value["p"], f"{path}.p")
    _check_quat(value["q"], f"{path}.q")


def _check_exact_keys(value, path, keys):
    if not isinstance(value, dict):
        raise SchemaViolation(path, "expected an object")
    missing = keys - value.keys()
    if missing:
        raise SchemaViolation(f"{path}.{sorted(missing)[0]}", "missing field")
    extra = value.keys() - keys
    if extra:
        raise SchemaViolation(f"{path}.{sorted(extra)[0]}", "unexpected field")


def _check_pairs(value, path):
    if not isinstance(value, list):
        raise SchemaViolation(path, "expected an array of point pairs")
    for i, pair in enumerate(value):
        p = f"{path}[{i}]"
        _check_exact_keys(pair, p, {"local", "shared"})
        _check_vec3(pair["local"], f"{p}.local")
        _check_vec3(pair["shared"], f"{p}.shared")


def _check_pin(value, path):
    _check_exact_keys(value, path, {"canonical_position", "color", "id", "owner_user"})
    _check_vec3(value["canonical_position"], f"{path}.canonical_position")
    _check_int(value["color"], f"{path}.color")
    _check_str(value["id"], f"{path}.id")
    _check_str(value["owner_user"], f"{path}.owner_user")


def _check_json_object(value, path):
    # free-form document (the session snapshot); structure is validated by
    # its consumer, but numbers must still be finite to round-trip
    if not isinstance(value, dict):
        raise SchemaViolation(path, "expected an object")
    _check_json_value(value, path)


def _check_json_value(value, path):
    if isinstance(value, dict):
        for key in value:
            if not isinstance(key, str):
                raise SchemaViolation(path, "object keys must be strings")
            _check_json_value(value[key], f"{path}.{key}")
    elif isinstance(value, list):
        for i, item in enumerate(value):
            _check_json_value(item, f"{path}[{i}]")
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        _check_number(value, path)
    elif value is None or isinstance(value, (bool, str)):
        pass
    else:
        raise SchemaViolation(path, f"cannot carry {type(value).__name__}")


_SCHEMAS: dict[str, dict] = {
    # client -> server
    "hello": {"name": _check_str},
    "calibrate_request": {"pairs": _check_pairs},
    "pose": {"head": _check_pose, "lh": _check_pose, "rh": _check_pose, "seq": _check_int},
    "align_request": {"ray_origin": _check_vec3, "ray_dir": _check_vec3},
    "pin_place": {"world": _check_vec3},
    "leave": {},
    # server -> client
    "welcome": {"user_id": _check_str, "color": _check_int, "snapshot": _check_json_object},
    "calibrate_result": {
        "yaw": _check_number,
        "translation": _check_vec3,
        "rms": _check_number,
    },
    "user_joined": {"id": _check_str, "name": _check_str, "color": _check_int},
    "user_left": {"id": _check_str},
    "pose_update": {
        "id": _check_str,
        "head": _check_pose,
        "lh": _check_pose,
        "rh": _check_pose,
        "rho": _check_number,
        "seq": _check_int,
    },
    "align_started": {
        "follower": _check_str,
        "leader": _check_str,
        "rho_start": _check_number,
        "delta": _check_number,
        "duration": _check_number,
        "t0": _check_number,
    },
    "align_completed": {"follower": _check_str, "rho": _check_number},
    "pin_added": {"pin": _check_pin},
    "error": {"code": _check_str, "detail": _check_str},
}

CLIENT_TO_SERVER = frozenset(
    ("hello", "calibrate_request", "pose", "align_request", "pin_place", "leave")
)
SERVER_TO_CLIENT = frozenset(_SCHEMAS) - CLIENT_TO_SERVER

_DROPPABLE = frozenset(("pose", "pose_update"))


def reliability_of(msg_type: str) -> ReliabilityClass:
    """Droppable frames may be shed under load; everything else is reliable."""
    if msg_type not in _SCHEMAS:
        raise UnknownType(f"unknown message type {msg_type!r}")
    if msg_type in _DROPPABLE:
        return ReliabilityClass.DROPPABLE
    return ReliabilityClass.RELIABLE


def _validate_payload(msg_type: str, payload: dict) -> None:
    schema = _SCHEMAS[msg_type]
    for name in schema:
        if name not in payload:
            raise SchemaViolation(name, "missing field")
    for name in payload:
        if name not in schema:
            raise SchemaViolation(name, "unexpected field")
        schema[name](payload[name], name)


# ---------------------------------------------------------------------------


def encode(msg: Message) -> str:
    """One canonical JSON frame per message; deterministic byte-for-byte."""
    if msg.type not in _SCHEMAS:
        raise UnencodableMessage(f"unknown message type {msg.type!r}")
    if "type" in msg.payload or "version" in msg.payload:
        raise UnencodableMessage("payload must not carry 'type' or 'version'")
    try:
        _validate_payload(msg.type, msg.payload)
    except SchemaViolation as err:
        raise UnencodableMessage(str(err)) from None
    doc = dict(msg.payload)
    doc["type"] = msg.type
    doc["version"] = VERSION
    return dumps_canonical(doc)


def decode(frame: str | bytes) -> Message:
    """Parse and validate one frame; raises a DecodeError subtype on anything
    that is not a catalog message."""
    if isinstance(frame, bytes):
        try:
            frame = frame.decode("utf-8")
        except UnicodeDecodeError as err:
            raise MalformedFrame(f"frame is not valid UTF-8: {err}") from None
    try:
        doc = json.loads(frame, parse_constant=_reject_constant, parse_int=_parse_wire_int)
    except RecursionError:
        raise MalformedFrame("frame nests too deeply") from None
    except ValueError as err:
        raise MalformedFrame(f"frame is not valid JSON: {err}") from None
    if not isinstance(doc, dict):
        raise MalformedFrame("frame is not a JSON object")
    msg_type = doc.pop("type", None)
    if msg_type is None:
        raise MalformedFrame("frame has no 'type'")
    if not isinstance(msg_type, str) or msg_type not in _SCHEMAS:
        raise UnknownType(f"unknown message type {msg_type!r}")
    version = doc.pop("version", None)
    if version != VERSION:
        raise VersionMismatch(f"version {version!r}, expected {VERSION}")
    try:
        _validate_payload(msg_type, doc)
    except RecursionError:
        raise MalformedFrame("frame nests too deeply") from None
    return Message(msg_type, doc)


def _reject_constant(name: str):
    raise ValueError(f"non-finite JSON literal {name}")


def _parse_wire_int(text: str):
    """Integer literals past 2**53 mean the double they round to, exactly as
    a JavaScript peer would read them; small ones stay exact integers."""
    value = int(text)
    if -MAX_EXACT_INT <= value <= MAX_EXACT_INT:
        return value
    return float(text)  # overflow lands on inf and trips the finite check


# ---------------------------------------------------------------------------
# Pose plumbing shared by the server and client-side replicas.


def pose_to_doc(pose: Pose) -> dict:
    return {"p": pose.position.as_list(), "q": pose.orientation.as_list()}


def doc_to_pose(doc: dict) -> Pose:
    return Pose(
        Vec3.from_seq(doc["p"]),
        UnitQuat.from_seq([float(c) for c in doc["q"]]),
    )
