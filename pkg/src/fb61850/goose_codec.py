"""Binary wire format for bus messages (versioned, big-endian).

Layout:

    magic     4 bytes  "GOO1"
    version   u8       = 1
    total_len u16      whole message, including magic
    app_id    u16
    st_num    u32
    sq_num    u32
    ttl_ms    u32
    t         u64      virtual nanoseconds of the last state change
    go_id     u8 length + UTF-8 bytes
    count     u16
    entries   count * TLV: tag u8, length u16, payload

Value tags: 1=bool(1B), 2=int32(4B), 3=float64(8B), 5=timestamp(8B);
4=enum carries two length-prefixed strings (type tag, value).
Decoding never reads past the buffer: malformed input raises a codec
error naming the defect, never an unhandled crash.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .values import DataValue, Nanos

MAGIC = b"GOO1"
VERSION = 1

_TAG_BOOL = 1
_TAG_INT32 = 2
_TAG_FLOAT64 = 3
_TAG_ENUM = 4
_TAG_TIMESTAMP = 5

_KIND_TO_TAG = {
    "bool": _TAG_BOOL,
    "int32": _TAG_INT32,
    "float64": _TAG_FLOAT64,
    "enum": _TAG_ENUM,
    "timestamp": _TAG_TIMESTAMP,
}


class CodecError(ValueError):
    pass


class BadMagicError(CodecError):
    pass


class TruncatedError(CodecError):
    pass


class UnknownTagError(CodecError):
    pass


class LengthMismatchError(CodecError):
    pass


class UnencodableValueError(CodecError):
    pass


@dataclass(frozen=True)
class GooseMessage:
    app_id: int
    go_id: str
    st_num: int
    sq_num: int
    time_allowed_to_live_ms: int
    t: Nanos
    all_data: tuple[DataValue, ...]


def _encode_entry(dv: DataValue) -> bytes:
    tag = _KIND_TO_TAG.get(dv.kind)
    if tag is None:
        raise UnencodableValueError(f"value kind {dv.kind!r} has no wire tag")
    if tag == _TAG_BOOL:
        payload = b"\x01" if dv.value else b"\x00"
    elif tag == _TAG_INT32:
        payload = struct.pack(">i", dv.value)
    elif tag == _TAG_FLOAT64:
        payload = struct.pack(">d", dv.value)
    elif tag == _TAG_TIMESTAMP:
        payload = struct.pack(">Q", dv.value)
    else:
        etag = dv.enum_type.encode()
        eval_ = str(dv.value).encode()
        if len(etag) > 255 or len(eval_) > 255:
            raise UnencodableValueError("enum tag/value longer than 255 bytes")
        payload = bytes([len(etag)]) + etag + bytes([len(eval_)]) + eval_
    return struct.pack(">BH", tag, len(payload)) + payload


def encode(msg: GooseMessage) -> bytes:
    """Serialize a message; rejects values outside the wire format's ranges."""
    for name, value, limit in (
        ("app_id", msg.app_id, 0xFFFF),
        ("st_num", msg.st_num, 0xFFFFFFFF),
        ("sq_num", msg.sq_num, 0xFFFFFFFF),
        ("time_allowed_to_live_ms", msg.time_allowed_to_live_ms, 0xFFFFFFFF),
        ("t", msg.t, 0xFFFFFFFFFFFFFFFF),
    ):
        if not 0 <= value <= limit:
            raise UnencodableValueError(f"{name} out of range: {value}")
    go_id = msg.go_id.encode()
    if len(go_id) > 255:
        raise UnencodableValueError("go_id longer than 255 bytes")
    if len(msg.all_data) > 0xFFFF:
        raise UnencodableValueError("too many dataset entries")
    body = struct.pack(">HIII Q", msg.app_id, msg.st_num, msg.sq_num,
                       msg.time_allowed_to_live_ms, msg.t)
    body += bytes([len(go_id)]) + go_id
    body += struct.pack(">H", len(msg.all_data))
    for dv in msg.all_data:
        body += _encode_entry(dv)
    total = len(MAGIC) + 1 + 2 + len(body)
    if total > 0xFFFF:
        raise UnencodableValueError(f"encoded message too large: {total} bytes")
    return MAGIC + bytes([VERSION]) + struct.pack(">H", total) + body


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedError(f"truncated while reading {what} "
                                 f"(need {n} bytes at offset {self.pos}, have {len(self.buf) - self.pos})")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack(">H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack(">I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack(">Q", self.take(8, what))[0]


def _decode_entry(r: _Reader, index: int) -> DataValue:
    what = f"entry[{index}]"
    tag = r.u8(f"{what} tag")
    length = r.u16(f"{what} length")
    payload = r.take(length, f"{what} payload")
    if tag == _TAG_BOOL:
        if length != 1:
            raise LengthMismatchError(f"{what}: bool payload must be 1 byte, got {length}")
        if payload[0] not in (0, 1):
            raise LengthMismatchError(f"{what}: bool payload byte must be 0 or 1")
        return DataValue("bool", payload[0] == 1)
    if tag == _TAG_INT32:
        if length != 4:
            raise LengthMismatchError(f"{what}: int32 payload must be 4 bytes, got {length}")
        return DataValue("int32", struct.unpack(">i", payload)[0])
    if tag == _TAG_FLOAT64:
        if length != 8:
            raise LengthMismatchError(f"{what}: float64 payload must be 8 bytes, got {length}")
        return DataValue("float64", struct.unpack(">d", payload)[0])
    if tag == _TAG_TIMESTAMP:
        if length != 8:
            raise LengthMismatchError(f"{what}: timestamp payload must be 8 bytes, got {length}")
        return DataValue("timestamp", struct.unpack(">Q", payload)[0])
    if tag == _TAG_ENUM:
        er = _Reader(payload)
        try:
            tlen = er.u8("enum tag length")
            etag = er.take(tlen, "enum tag").decode("utf-8", errors="strict")
            vlen = er.u8("enum value length")
            evalue = er.take(vlen, "enum value").decode("utf-8", errors="strict")
        except TruncatedError:
            raise LengthMismatchError(f"{what}: enum payload inconsistent with length") from None
        except UnicodeDecodeError:
            raise LengthMismatchError(f"{what}: enum strings are not valid UTF-8") from None
        if er.pos != len(payload):
            raise LengthMismatchError(f"{what}: {len(payload) - er.pos} stray bytes in enum payload")
        try:
            return DataValue("enum", evalue, enum_type=etag)
        except ValueError as e:
            raise LengthMismatchError(f"{what}: {e}") from None
    raise UnknownTagError(f"{what}: unknown value tag {tag}")


def decode(buf: bytes) -> GooseMessage:
    r = _Reader(bytes(buf))
    if len(buf) < len(MAGIC):
        raise TruncatedError(f"buffer of {len(buf)} bytes is shorter than the magic")
    if r.take(4, "magic") != MAGIC:
        raise BadMagicError(f"bad magic {bytes(buf[:4])!r}")
    version = r.u8("version")
    if version != VERSION:
        raise CodecError(f"unsupported wire version {version}")
    total = r.u16("total length")
    if total != len(buf):
        raise LengthMismatchError(f"declared length {total} != buffer length {len(buf)}")
    app_id = r.u16("app_id")
    st_num = r.u32("st_num")
    sq_num = r.u32("sq_num")
    ttl = r.u32("ttl_ms")
    t = r.u64("t")
    go_len = r.u8("go_id length")
    try:
        go_id = r.take(go_len, "go_id").decode("utf-8", errors="strict")
    except UnicodeDecodeError:
        raise CodecError("go_id is not valid UTF-8") from None
    count = r.u16("entry count")
    values = tuple(_decode_entry(r, i) for i in range(count))
    if r.pos != len(buf):
        raise LengthMismatchError(f"{len(buf) - r.pos} stray bytes after last entry")
    return GooseMessage(app_id, go_id, st_num, sq_num, ttl, t, values)
