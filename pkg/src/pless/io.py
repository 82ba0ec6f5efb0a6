"""Bit-exact file formats for slices, label maps, probability maps and metadata.

Centralizes all on-disk formats so that the rest of the package only ever
sees numpy arrays:

* ``.plt`` tensor container: 4-byte magic ``PLT1``, uint8 rank, rank
  little-endian uint32 dims, 1 dtype byte (0 = float32, 1 = uint8,
  2 = uint16), then the row-major little-endian payload.
* grayscale PGM (P5) / PNG label images where the pixel value is the
  class code.
* a JSON sidecar with voxel spacing, class palette and the unlabeled code.

Everything is written little-endian regardless of host byte order and
round-trips bitwise.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"PLT1"

# dtype byte <-> numpy dtype (explicitly little-endian)
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<u1"), 2: np.dtype("<u2")}
_CODE_FOR_KIND = {"f4": 0, "u1": 1, "u2": 2}

DEFAULT_UNLABELED = 255


class TensorFormatError(ValueError):
    """Raised for malformed tensor files or unsupported array layouts."""


@dataclass
class VolumeMeta:
    """Physical spacing and class palette carried next to label volumes.

    spacing_mm is (x, y, z); class codes are the indices into class_names.
    """

    spacing_mm: tuple = (1.0, 1.0, 1.0)
    class_names: list = field(default_factory=lambda: ["BG", "RV", "MYO", "LV"])
    unlabeled_code: int = DEFAULT_UNLABELED

    def __post_init__(self):
        self.spacing_mm = tuple(float(s) for s in self.spacing_mm)
        if len(self.spacing_mm) != 3 or any(s <= 0 for s in self.spacing_mm):
            raise ValueError("spacing_mm must be 3 positive reals")
        if self.unlabeled_code in range(len(self.class_names)):
            raise ValueError("unlabeled_code collides with a class code")

    @property
    def num_classes(self):
        return len(self.class_names)

    def to_json(self):
        return {
            "spacing_mm": list(self.spacing_mm),
            "classes": list(self.class_names),
            "unlabeled": int(self.unlabeled_code),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            spacing_mm=tuple(obj["spacing_mm"]),
            class_names=list(obj["classes"]),
            unlabeled_code=int(obj.get("unlabeled", DEFAULT_UNLABELED)),
        )


def save_meta(path, meta):
    with open(path, "w") as fh:
        json.dump(meta.to_json(), fh, indent=2)
        fh.write("\n")


def load_meta(path):
    with open(path) as fh:
        return VolumeMeta.from_json(json.load(fh))


def _dtype_code(data, dtype=None):
    if dtype is not None:
        if dtype not in _DTYPE_CODES:
            raise TensorFormatError(f"unknown dtype code {dtype}")
        return dtype
    kind = np.dtype(data.dtype).newbyteorder("<").str.lstrip("<|>=")
    if kind not in _CODE_FOR_KIND:
        raise TensorFormatError(
            f"unsupported dtype {data.dtype}; use float32, uint8 or uint16"
        )
    return _CODE_FOR_KIND[kind]


def write_tensor(path, data, dtype=None):
    """Write ``data`` to ``path`` in the .plt container.

    dtype may be an explicit dtype code (0/1/2); otherwise it is inferred
    from the array. Rank must be 2..4 and every dim must fit in 32 bits.
    """
    data = np.asarray(data)
    if not 2 <= data.ndim <= 4:
        raise TensorFormatError(f"rank out of range: {data.ndim} (want 2..4)")
    if any(d >= 2**32 for d in data.shape):
        raise TensorFormatError("dims overflow 32 bits")
    code = _dtype_code(data, dtype)
    payload = np.ascontiguousarray(data, dtype=_DTYPE_CODES[code]).tobytes()
    header = MAGIC + struct.pack("<B", data.ndim)
    header += struct.pack(f"<{data.ndim}I", *data.shape)
    header += struct.pack("<B", code)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path):
    """Read a .plt tensor; raises TensorFormatError on malformed files."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise TensorFormatError(f"bad magic {raw[:4]!r}")
    if len(raw) < 5:
        raise TensorFormatError("truncated header")
    rank = raw[4]
    if not 2 <= rank <= 4:
        raise TensorFormatError(f"rank out of range: {rank} (want 2..4)")
    head_end = 5 + 4 * rank + 1
    if len(raw) < head_end:
        raise TensorFormatError("truncated header")
    dims = struct.unpack(f"<{rank}I", raw[5 : 5 + 4 * rank])
    code = raw[head_end - 1]
    if code not in _DTYPE_CODES:
        raise TensorFormatError(f"unknown dtype code {code}")
    dt = _DTYPE_CODES[code]
    expect = int(np.prod(dims)) * dt.itemsize
    payload = raw[head_end:]
    if len(payload) != expect:
        raise TensorFormatError(
            f"truncated payload: got {len(payload)} bytes, want {expect}"
        )
    return np.frombuffer(payload, dtype=dt).reshape(dims).copy()


def _validate_codes(codes, meta):
    valid = np.zeros(256, dtype=bool)
    valid[: meta.num_classes] = True
    valid[meta.unlabeled_code] = True
    bad = ~valid[codes]
    if bad.any():
        first = int(codes[bad][0] if codes.ndim == 1 else codes[np.nonzero(bad)][0])
        raise ValueError(f"unknown code {first} in label image")


def read_labelmap_image(path, meta=None):
    """Read an 8-bit grayscale PGM/PNG where pixel value = class code.

    With ``meta`` given, every pixel must be one of its class codes or
    the unlabeled code.
    """
    path = str(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"P5":
        codes = _read_pgm(path)
    else:
        from PIL import Image

        img = Image.open(path)
        if img.mode != "L":
            raise ValueError(f"label image must be single-channel 8-bit, got {img.mode}")
        codes = np.asarray(img, dtype=np.uint8)
    if meta is not None:
        _validate_codes(codes, meta)
    return codes


def write_labelmap_pgm(path, codes):
    """Write uint8 codes as a binary PGM (P5), the normative label format."""
    codes = np.asarray(codes, dtype=np.uint8)
    if codes.ndim != 2:
        raise ValueError("PGM label maps are 2D")
    h, w = codes.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(codes.tobytes())


def _read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them
    tokens = []
    i = 2  # past "P5"
    while len(tokens) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ValueError("malformed PGM header")
        tokens.append(data[start:i])
    i += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval > 255:
        raise ValueError("label image must be single-channel 8-bit")
    pixels = np.frombuffer(data[i:], dtype=np.uint8)
    if pixels.size != w * h:
        raise ValueError("truncated PGM payload")
    return pixels.reshape(h, w).copy()
