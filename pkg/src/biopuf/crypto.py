"""XOR key-mixture encrypted communication.

Two parties each hold a private key extracted from their own token; the
XOR of the two keys is published as a dictionary. A message encrypted with
the sender's key decrypts as keyB xor dictionary xor ciphertext.

Keys are one-time pads: a usage cursor tracks consumed bits and a second
encryption past the key length is refused. The plaintext carries a 32-bit
little-endian byte-length prefix so decryption restores the exact length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (DimensionError, FormatError, KeyCapacityError,
                         ParameterError)
from .hashing import BinaryKey

DICT_MAGIC = b"BPUD"
CIPHER_MAGIC = b"BPUC"
CIPHER_VERSION = 1
_LENGTH_PREFIX = 4


@dataclass(frozen=True)
class PublicDictionary:
    """Published XOR of two private keys; reveals neither key alone."""

    dict_key: BinaryKey
    key_a_id: str = "A"
    key_b_id: str = "B"

    @property
    def length(self) -> int:
        return self.dict_key.length

    def save(self, path) -> None:
        self.dict_key.save(path, magic=DICT_MAGIC)

    @staticmethod
    def load(path, key_a_id: str = "A", key_b_id: str = "B") -> "PublicDictionary":
        return PublicDictionary(BinaryKey.load(path, magic=DICT_MAGIC),
                                key_a_id, key_b_id)


@dataclass(frozen=True)
class Ciphertext:
    payload: bytes = field(repr=False)
    message_length: int
    bit_offset: int
    key_id: str = "A"
    dict_id: str = ""

    def to_bytes(self) -> bytes:
        key_id = self.key_id.encode()
        dict_id = self.dict_id.encode()
        header = struct.pack("<4sIQQH", CIPHER_MAGIC, CIPHER_VERSION,
                             self.message_length, self.bit_offset, len(key_id))
        header += key_id + struct.pack("<H", len(dict_id)) + dict_id
        return header + self.payload

    @staticmethod
    def from_bytes(data: bytes) -> "Ciphertext":
        fixed = struct.calcsize("<4sIQQH")
        if len(data) < fixed:
            raise FormatError("ciphertext shorter than header")
        magic, version, msg_len, bit_offset, id_len = struct.unpack(
            "<4sIQQH", data[:fixed])
        if magic != CIPHER_MAGIC:
            raise FormatError(f"bad ciphertext magic {magic!r}")
        if version != CIPHER_VERSION:
            raise FormatError(f"unsupported ciphertext version {version}")
        pos = fixed
        key_id = data[pos:pos + id_len].decode()
        pos += id_len
        (dict_len,) = struct.unpack("<H", data[pos:pos + 2])
        pos += 2
        dict_id = data[pos:pos + dict_len].decode()
        pos += dict_len
        payload = data[pos:]
        if len(payload) != msg_len + _LENGTH_PREFIX:
            raise FormatError("ciphertext payload length inconsistent with header")
        return Ciphertext(payload=payload, message_length=msg_len,
                          bit_offset=bit_offset, key_id=key_id, dict_id=dict_id)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @staticmethod
    def load(path) -> "Ciphertext":
        with open(path, "rb") as fh:
            return Ciphertext.from_bytes(fh.read())


def build_dictionary(key_a: BinaryKey, key_b: BinaryKey,
                     key_a_id: str = "A", key_b_id: str = "B") -> PublicDictionary:
    if key_a.length != key_b.length:
        raise ParameterError(
            f"key lengths differ: {key_a.length} vs {key_b.length}")
    return PublicDictionary(key_a ^ key_b, key_a_id, key_b_id)


def _key_segment_bytes(key: BinaryKey, bit_offset: int, nbytes: int) -> np.ndarray:
    if bit_offset % 8:
        raise ParameterError("bit offset must be byte-aligned")
    start = bit_offset // 8
    packed = np.frombuffer(key.packed, dtype=np.uint8)
    segment = packed[start:start + nbytes]
    if segment.size != nbytes:
        raise DimensionError("key segment shorter than requested payload")
    return segment


class OneTimePad:
    """Encryption side of one key, with strict no-reuse accounting."""

    def __init__(self, key: BinaryKey, key_id: str = "A", used_bits: int = 0):
        self.key = key
        self.key_id = key_id
        self.used_bits = int(used_bits)

    @property
    def remaining_bits(self) -> int:
        return self.key.length - self.used_bits

    def encrypt(self, message: bytes, dict_id: str = "") -> Ciphertext:
        frame = struct.pack("<I", len(message)) + bytes(message)
        needed = 8 * len(frame)
        if needed > self.remaining_bits:
            raise KeyCapacityError(
                f"message needs {needed} key bits, only {self.remaining_bits} "
                f"remain of {self.key.length}")
        segment = _key_segment_bytes(self.key, self.used_bits, len(frame))
        payload = np.bitwise_xor(np.frombuffer(frame, dtype=np.uint8), segment)
        cipher = Ciphertext(payload=payload.tobytes(),
                            message_length=len(message),
                            bit_offset=self.used_bits,
                            key_id=self.key_id, dict_id=dict_id)
        self.used_bits += needed
        return cipher


def encrypt(message: bytes, key_a: BinaryKey, key_id: str = "A",
            dict_id: str = "") -> Ciphertext:
    """One-shot encryption from the start of a fresh key."""
    return OneTimePad(key_a, key_id).encrypt(message, dict_id=dict_id)


def decrypt(cipher: Ciphertext, key_b: BinaryKey,
            dictionary: PublicDictionary, strict: bool = True) -> bytes:
    """Recover the message as keyB xor dictionary xor ciphertext.

    With ``strict`` the in-band length prefix must match the header (it will
    not for a wrong key); without it the header length wins and the raw
    (possibly garbled) bytes are returned.
    """
    if dictionary.length != key_b.length:
        raise ParameterError(
            f"dictionary length {dictionary.length} != key length {key_b.length}")
    nbytes = len(cipher.payload)
    seg_b = _key_segment_bytes(key_b, cipher.bit_offset, nbytes)
    seg_d = _key_segment_bytes(dictionary.dict_key, cipher.bit_offset, nbytes)
    payload = np.frombuffer(cipher.payload, dtype=np.uint8)
    frame = np.bitwise_xor(np.bitwise_xor(seg_b, seg_d), payload).tobytes()
    (in_band_length,) = struct.unpack("<I", frame[:_LENGTH_PREFIX])
    if strict and in_band_length != cipher.message_length:
        raise FormatError(
            f"length prefix {in_band_length} disagrees with header "
            f"{cipher.message_length}; wrong key or corrupted ciphertext")
    return frame[_LENGTH_PREFIX:_LENGTH_PREFIX + cipher.message_length]
