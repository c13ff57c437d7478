"""Reader and writer for a constrained subset of multi-frame ultrasound DICOM.

Supported files: 128-byte preamble + "DICM", explicit or implicit VR little
endian, uncompressed 8-bit grayscale pixel data, defined value lengths only.
The writer always emits explicit VR little endian and is the inverse of the
parser on this subset.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"
IMPLICIT_VR_LE = "1.2.840.10008.1.2"

SOP_CLASS_US_MULTIFRAME = "1.2.840.10008.5.1.4.1.1.3.1"
IMPLEMENTATION_CLASS_UID = "1.2.826.0.1.3680043.10.424.1"

# Tags used by the subset.
TAG_SOP_INSTANCE_UID = (0x0008, 0x0018)
TAG_INSTITUTION_NAME = (0x0008, 0x0080)
TAG_REFERRING_PHYSICIAN = (0x0008, 0x0090)
TAG_SERIES_DESCRIPTION = (0x0008, 0x103E)
TAG_PATIENT_NAME = (0x0010, 0x0010)
TAG_PATIENT_ID = (0x0010, 0x0020)
TAG_PATIENT_BIRTH_DATE = (0x0010, 0x0030)
TAG_CINE_RATE = (0x0018, 0x0040)
TAG_FRAME_TIME = (0x0018, 0x1063)
TAG_US_REGIONS = (0x0018, 0x6011)
TAG_REGION_UNITS_X = (0x0018, 0x6024)
TAG_REGION_UNITS_Y = (0x0018, 0x6026)
TAG_PHYSICAL_DELTA_X = (0x0018, 0x602C)
TAG_PHYSICAL_DELTA_Y = (0x0018, 0x602E)
TAG_STUDY_INSTANCE_UID = (0x0020, 0x000D)
TAG_INSTANCE_NUMBER = (0x0020, 0x0013)
TAG_SAMPLES_PER_PIXEL = (0x0028, 0x0002)
TAG_PHOTOMETRIC = (0x0028, 0x0004)
TAG_NUMBER_OF_FRAMES = (0x0028, 0x0008)
TAG_ROWS = (0x0028, 0x0010)
TAG_COLUMNS = (0x0028, 0x0011)
TAG_PIXEL_SPACING = (0x0028, 0x0030)
TAG_BITS_ALLOCATED = (0x0028, 0x0100)
TAG_BITS_STORED = (0x0028, 0x0101)
TAG_HIGH_BIT = (0x0028, 0x0102)
TAG_PIXEL_REPRESENTATION = (0x0028, 0x0103)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)

# Tags whose values are replaced during anonymization.
PHI_TAGS = (
    TAG_PATIENT_NAME,
    TAG_PATIENT_ID,
    TAG_PATIENT_BIRTH_DATE,
    TAG_INSTITUTION_NAME,
    TAG_REFERRING_PHYSICIAN,
)
PHI_PLACEHOLDER = b"ANON"

# VRs carrying a 2-byte reserved field and 32-bit length in explicit VR.
_LONG_VRS = frozenset({"OB", "OW", "OF", "SQ", "UT", "UN"})

# VR dictionary for implicit VR parsing and canonical writing.
VR_BY_TAG = {
    TAG_SOP_INSTANCE_UID: "UI",
    TAG_INSTITUTION_NAME: "LO",
    TAG_REFERRING_PHYSICIAN: "PN",
    TAG_SERIES_DESCRIPTION: "LO",
    TAG_PATIENT_NAME: "PN",
    TAG_PATIENT_ID: "LO",
    TAG_PATIENT_BIRTH_DATE: "DA",
    TAG_CINE_RATE: "IS",
    TAG_FRAME_TIME: "DS",
    TAG_US_REGIONS: "SQ",
    TAG_REGION_UNITS_X: "US",
    TAG_REGION_UNITS_Y: "US",
    TAG_PHYSICAL_DELTA_X: "FD",
    TAG_PHYSICAL_DELTA_Y: "FD",
    TAG_STUDY_INSTANCE_UID: "UI",
    TAG_INSTANCE_NUMBER: "IS",
    TAG_SAMPLES_PER_PIXEL: "US",
    TAG_PHOTOMETRIC: "CS",
    TAG_NUMBER_OF_FRAMES: "IS",
    TAG_ROWS: "US",
    TAG_COLUMNS: "US",
    TAG_PIXEL_SPACING: "DS",
    TAG_BITS_ALLOCATED: "US",
    TAG_BITS_STORED: "US",
    TAG_HIGH_BIT: "US",
    TAG_PIXEL_REPRESENTATION: "US",
    TAG_PIXEL_DATA: "OB",
}

REGION_UNITS_CM = 3  # DICOM physical-units code for centimetres

FLAG_UNCALIBRATED = "uncalibrated"
FLAG_MISSING_FRAME_TIMING = "missing-frame-timing"
FLAG_MISSING_STUDY_ID = "missing-study-id"
FLAG_MISSING_CLIP_ID = "missing-clip-id"

DEFAULT_FRAME_INTERVAL_MS = 40.0


class DicomError(Exception):
    """Base class for every parse/write failure in this module."""


class MissingMagic(DicomError):
    pass


class UnsupportedTransferSyntax(DicomError):
    pass


class UnsupportedFeature(DicomError):
    """Valid DICOM, but outside the supported subset (undefined lengths, non-8-bit pixels)."""


class MissingRequiredTag(DicomError):
    pass


class TruncatedValue(DicomError):
    pass


class MalformedDataset(DicomError):
    pass


class UnencodableValue(DicomError):
    pass


@dataclass(frozen=True)
class DicomElement:
    group: int
    element: int
    vr: str
    value: bytes

    @property
    def tag(self) -> Tuple[int, int]:
        return (self.group, self.element)

    def __repr__(self) -> str:
        return (f"DicomElement(({self.group:04X},{self.element:04X}), "
                f"{self.vr}, {len(self.value)} bytes)")


@dataclass(eq=False)
class EchoClip:
    """One multi-frame ultrasound recording with calibration and timing."""

    study_id: str
    clip_id: str
    rows: int
    cols: int
    num_frames: int
    frame_interval_ms: float
    pixel_spacing_mm: Optional[Tuple[float, float]]  # (row_mm, col_mm); None if uncalibrated
    frames: np.ndarray  # uint8, shape (num_frames, rows, cols)
    acquisition_index: int = 0
    declared_view_hint: Optional[str] = None
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.uint8)
        if self.frames.shape != (self.num_frames, self.rows, self.cols):
            raise ValueError(
                f"frames shape {self.frames.shape} does not match "
                f"({self.num_frames}, {self.rows}, {self.cols})"
            )
        if self.frame_interval_ms <= 0:
            raise ValueError("frame_interval_ms must be positive")
        if self.pixel_spacing_mm is not None:
            row_mm, col_mm = self.pixel_spacing_mm
            if not (row_mm > 0 and col_mm > 0 and np.isfinite(row_mm) and np.isfinite(col_mm)):
                raise ValueError("pixel spacing components must be positive and finite")
        self.frames.setflags(write=False)

    @property
    def calibrated(self) -> bool:
        return self.pixel_spacing_mm is not None

    def __eq__(self, other) -> bool:
        if not isinstance(other, EchoClip):
            return NotImplemented
        return (
            self.study_id == other.study_id
            and self.clip_id == other.clip_id
            and self.rows == other.rows
            and self.cols == other.cols
            and self.num_frames == other.num_frames
            and self.frame_interval_ms == other.frame_interval_ms
            and self.pixel_spacing_mm == other.pixel_spacing_mm
            and self.acquisition_index == other.acquisition_index
            and self.declared_view_hint == other.declared_view_hint
            and self.flags == other.flags
            and np.array_equal(self.frames, other.frames)
        )


# ---------------------------------------------------------------------------
# parsing


def _require(data: bytes, pos: int, count: int, what: str) -> None:
    if pos + count > len(data):
        raise TruncatedValue(f"file ends inside {what} at offset {pos}")


def _read_element(data: bytes, pos: int, explicit: bool) -> Tuple[DicomElement, int]:
    _require(data, pos, 8, "element header")
    group, element = struct.unpack_from("<HH", data, pos)
    pos += 4
    if explicit:
        vr = data[pos:pos + 2].decode("ascii", errors="replace")
        if not (len(vr) == 2 and vr.isalpha() and vr.isupper()):
            raise MalformedDataset(
                f"invalid VR {vr!r} for tag ({group:04X},{element:04X}) at offset {pos}"
            )
        pos += 2
        if vr in _LONG_VRS:
            _require(data, pos, 6, "element length")
            pos += 2  # reserved
            (length,) = struct.unpack_from("<I", data, pos)
            pos += 4
        else:
            (length,) = struct.unpack_from("<H", data, pos)
            pos += 2
    else:
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        vr = VR_BY_TAG.get((group, element), "UN")
    if length == 0xFFFFFFFF:
        raise UnsupportedFeature(
            f"undefined-length value for tag ({group:04X},{element:04X}) "
            "is outside the supported subset"
        )
    if length % 2 != 0:
        raise MalformedDataset(
            f"odd value length {length} for tag ({group:04X},{element:04X})"
        )
    _require(data, pos, length, f"value of ({group:04X},{element:04X})")
    value = data[pos:pos + length]
    return DicomElement(group, element, vr, value), pos + length


def _parse_element_stream(data: bytes, explicit: bool) -> List[DicomElement]:
    elements: List[DicomElement] = []
    seen = set()
    pos = 0
    while pos < len(data):
        elem, pos = _read_element(data, pos, explicit)
        if elem.tag in seen:
            raise MalformedDataset(f"duplicate tag ({elem.group:04X},{elem.element:04X})")
        seen.add(elem.tag)
        elements.append(elem)
    return elements


def _split_meta(data: bytes) -> Tuple[List[DicomElement], int]:
    """Parse the group-0002 file meta (always explicit VR), return it and the body offset."""
    meta: List[DicomElement] = []
    pos = 132
    while pos < len(data):
        _require(data, pos, 4, "element header")
        (group,) = struct.unpack_from("<H", data, pos)
        if group != 0x0002:
            break
        elem, pos = _read_element(data, pos, explicit=True)
        meta.append(elem)
    return meta, pos


def parse_parts(data: bytes) -> Tuple[List[DicomElement], List[DicomElement], str]:
    """Split a DICOM stream into (meta elements, dataset elements, transfer syntax UID)."""
    if len(data) < 132 or data[128:132] != b"DICM":
        raise MissingMagic("input is not a DICOM file (no DICM magic after the preamble)")
    meta, body_start = _split_meta(data)
    ts_elem = next((e for e in meta if e.tag == (0x0002, 0x0010)), None)
    if ts_elem is None:
        raise MissingRequiredTag("file meta has no TransferSyntaxUID (0002,0010)")
    ts_uid = _decode_text(ts_elem.value)
    if ts_uid == EXPLICIT_VR_LE:
        explicit = True
    elif ts_uid == IMPLICIT_VR_LE:
        explicit = False
    else:
        raise UnsupportedTransferSyntax(f"transfer syntax {ts_uid!r} is not supported")
    dataset = _parse_element_stream(data[body_start:], explicit)
    return meta, dataset, ts_uid


def parse_dataset(data: bytes) -> List[DicomElement]:
    """Parse a DICOM stream and return its dataset elements (file meta excluded)."""
    _, dataset, _ = parse_parts(data)
    return dataset


def _decode_text(value: bytes) -> str:
    return value.decode("latin-1").rstrip(" \x00")


def _decode_int(elem: DicomElement) -> int:
    if elem.vr == "US":
        if len(elem.value) != 2:
            raise MalformedDataset(f"US value of length {len(elem.value)} in {elem!r}")
        return struct.unpack("<H", elem.value)[0]
    text = _decode_text(elem.value).strip()
    try:
        return int(text)
    except ValueError as exc:
        raise MalformedDataset(f"unparseable integer {text!r} in {elem!r}") from exc


def _decode_float(elem: DicomElement) -> float:
    if elem.vr == "FD":
        if len(elem.value) != 8:
            raise MalformedDataset(f"FD value of length {len(elem.value)} in {elem!r}")
        return struct.unpack("<d", elem.value)[0]
    text = _decode_text(elem.value).strip()
    try:
        return float(text)
    except ValueError as exc:
        raise MalformedDataset(f"unparseable decimal {text!r} in {elem!r}") from exc


def _decode_ds_pair(elem: DicomElement) -> Tuple[float, float]:
    parts = _decode_text(elem.value).split("\\")
    if len(parts) != 2:
        raise MalformedDataset(f"expected two decimal values in {elem!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise MalformedDataset(f"unparseable decimal pair in {elem!r}") from exc


def _iter_sequence_items(value: bytes, explicit: bool) -> Iterable[List[DicomElement]]:
    """Yield the element list of each defined-length item in a sequence value."""
    pos = 0
    while pos < len(value):
        if pos + 8 > len(value):
            raise TruncatedValue("sequence ends inside an item header")
        group, element, length = struct.unpack_from("<HHI", value, pos)
        pos += 8
        if (group, element) == (0xFFFE, 0xE0DD):  # sequence delimiter
            break
        if (group, element) != (0xFFFE, 0xE000):
            raise MalformedDataset(
                f"unexpected tag ({group:04X},{element:04X}) inside a sequence"
            )
        if length == 0xFFFFFFFF:
            raise UnsupportedFeature("undefined-length sequence items are not supported")
        if pos + length > len(value):
            raise TruncatedValue("sequence ends inside an item value")
        yield _parse_element_stream(value[pos:pos + length], explicit)
        pos += length


def _spacing_from_regions(elem: DicomElement, explicit: bool) -> Optional[Tuple[float, float]]:
    """Extract (row_mm, col_mm) from the first usable ultrasound region (cm deltas x10)."""
    for item in _iter_sequence_items(elem.value, explicit):
        by_tag = {e.tag: e for e in item}
        units_x = by_tag.get(TAG_REGION_UNITS_X)
        units_y = by_tag.get(TAG_REGION_UNITS_Y)
        if units_x is not None and _decode_int(units_x) != REGION_UNITS_CM:
            continue
        if units_y is not None and _decode_int(units_y) != REGION_UNITS_CM:
            continue
        dx = by_tag.get(TAG_PHYSICAL_DELTA_X)
        dy = by_tag.get(TAG_PHYSICAL_DELTA_Y)
        if dx is None or dy is None:
            continue
        return (_decode_float(dy) * 10.0, _decode_float(dx) * 10.0)
    return None


def clip_from_elements(dataset: Sequence[DicomElement], explicit: bool = True) -> EchoClip:
    """Assemble an EchoClip from parsed dataset elements."""
    by_tag = {e.tag: e for e in dataset}

    def require(tag: Tuple[int, int], name: str) -> DicomElement:
        elem = by_tag.get(tag)
        if elem is None:
            raise MissingRequiredTag(f"required tag {name} ({tag[0]:04X},{tag[1]:04X}) is absent")
        return elem

    rows = _decode_int(require(TAG_ROWS, "Rows"))
    cols = _decode_int(require(TAG_COLUMNS, "Columns"))
    num_frames = _decode_int(require(TAG_NUMBER_OF_FRAMES, "NumberOfFrames"))
    pixel_elem = require(TAG_PIXEL_DATA, "PixelData")
    if rows < 1 or cols < 1 or num_frames < 1:
        raise MalformedDataset(f"non-positive image dimensions {rows}x{cols}x{num_frames}")

    bits = by_tag.get(TAG_BITS_ALLOCATED)
    if bits is not None and _decode_int(bits) != 8:
        raise UnsupportedFeature(f"only 8-bit pixel data is supported, got {_decode_int(bits)}")
    samples = by_tag.get(TAG_SAMPLES_PER_PIXEL)
    if samples is not None and _decode_int(samples) != 1:
        raise UnsupportedFeature("only single-sample grayscale pixel data is supported")

    expected = rows * cols * num_frames
    padded = expected + (expected % 2)
    if len(pixel_elem.value) < expected:
        raise TruncatedValue(
            f"PixelData holds {len(pixel_elem.value)} bytes, expected {expected}"
        )
    if len(pixel_elem.value) > padded:
        raise MalformedDataset(
            f"PixelData holds {len(pixel_elem.value)} bytes, expected {expected}"
        )
    frames = np.frombuffer(pixel_elem.value[:expected], dtype=np.uint8)
    frames = frames.reshape(num_frames, rows, cols)

    flags = set()

    spacing: Optional[Tuple[float, float]] = None
    spacing_elem = by_tag.get(TAG_PIXEL_SPACING)
    if spacing_elem is not None:
        spacing = _decode_ds_pair(spacing_elem)
    else:
        regions = by_tag.get(TAG_US_REGIONS)
        if regions is not None:
            spacing = _spacing_from_regions(regions, explicit)
    if spacing is not None and not (spacing[0] > 0 and spacing[1] > 0
                                    and np.isfinite(spacing[0]) and np.isfinite(spacing[1])):
        spacing = None
    if spacing is None:
        flags.add(FLAG_UNCALIBRATED)

    frame_time = by_tag.get(TAG_FRAME_TIME)
    cine_rate = by_tag.get(TAG_CINE_RATE)
    if frame_time is not None:
        interval = _decode_float(frame_time)
    elif cine_rate is not None:
        rate = _decode_int(cine_rate)
        if rate <= 0:
            raise MalformedDataset(f"non-positive CineRate {rate}")
        interval = 1000.0 / rate
    else:
        interval = DEFAULT_FRAME_INTERVAL_MS
        flags.add(FLAG_MISSING_FRAME_TIMING)
    if interval <= 0:
        raise MalformedDataset(f"non-positive frame interval {interval}")

    study_elem = by_tag.get(TAG_STUDY_INSTANCE_UID)
    if study_elem is not None:
        study_id = _decode_text(study_elem.value)
    else:
        study_id = ""
        flags.add(FLAG_MISSING_STUDY_ID)
    clip_elem = by_tag.get(TAG_SOP_INSTANCE_UID)
    if clip_elem is not None:
        clip_id = _decode_text(clip_elem.value)
    else:
        digest = hashlib.sha256()
        for e in dataset:
            digest.update(struct.pack("<HH", e.group, e.element))
            digest.update(e.value)
        clip_id = digest.hexdigest()[:16]
        flags.add(FLAG_MISSING_CLIP_ID)

    acq_elem = by_tag.get(TAG_INSTANCE_NUMBER)
    acquisition_index = _decode_int(acq_elem) if acq_elem is not None else 0
    hint_elem = by_tag.get(TAG_SERIES_DESCRIPTION)
    hint = _decode_text(hint_elem.value) if hint_elem is not None else None

    return EchoClip(
        study_id=study_id,
        clip_id=clip_id,
        rows=rows,
        cols=cols,
        num_frames=num_frames,
        frame_interval_ms=interval,
        pixel_spacing_mm=spacing,
        frames=frames,
        acquisition_index=acquisition_index,
        declared_view_hint=hint,
        flags=frozenset(flags),
    )


def parse_dicom(data: bytes) -> EchoClip:
    """Parse a DICOM byte stream into an EchoClip."""
    _, dataset, ts_uid = parse_parts(data)
    return clip_from_elements(dataset, explicit=(ts_uid == EXPLICIT_VR_LE))


# ---------------------------------------------------------------------------
# anonymization


def anonymize(dataset: Sequence[DicomElement]) -> List[DicomElement]:
    """Replace PHI tag values with a fixed placeholder; everything else is untouched."""
    out = []
    for elem in dataset:
        if elem.tag in PHI_TAGS:
            out.append(DicomElement(elem.group, elem.element, elem.vr, PHI_PLACEHOLDER))
        else:
            out.append(elem)
    return out


# ---------------------------------------------------------------------------
# writing


def _text_bytes(text: str, vr: str) -> bytes:
    raw = text.encode("latin-1")
    if len(raw) % 2 != 0:
        raw += b"\x00" if vr == "UI" else b" "
    return raw


def _ds_bytes(value: float) -> str:
    text = str(float(value))
    if len(text) > 16:
        raise UnencodableValue(
            f"decimal value {text!r} does not fit the 16-character DS limit; "
            "round it before writing"
        )
    return text


def _encode_element(elem: DicomElement) -> bytes:
    if len(elem.value) % 2 != 0:
        raise UnencodableValue(f"odd-length value in {elem!r}")
    header = struct.pack("<HH", elem.group, elem.element) + elem.vr.encode("ascii")
    if elem.vr in _LONG_VRS:
        if len(elem.value) > 0xFFFFFFFE:
            raise UnencodableValue(f"value too large in {elem!r}")
        return header + b"\x00\x00" + struct.pack("<I", len(elem.value)) + elem.value
    if len(elem.value) > 0xFFFF:
        raise UnencodableValue(f"value exceeds the 16-bit length field in {elem!r}")
    return header + struct.pack("<H", len(elem.value)) + elem.value


def _element(tag: Tuple[int, int], vr: str, value: bytes) -> DicomElement:
    return DicomElement(tag[0], tag[1], vr, value)


def _text_element(tag: Tuple[int, int], text: str) -> DicomElement:
    vr = VR_BY_TAG[tag]
    return _element(tag, vr, _text_bytes(text, vr))


def _us_element(tag: Tuple[int, int], value: int) -> DicomElement:
    return _element(tag, "US", struct.pack("<H", value))


def build_elements(clip: EchoClip, phi: Optional[Mapping[Tuple[int, int], str]] = None,
                   ) -> List[DicomElement]:
    """Construct the canonical dataset for a clip.

    Calibration is carried in PixelSpacing; `phi` adds patient/institution
    text elements keyed by tag (used for anonymization round trips).
    """
    elements = [
        _text_element(TAG_SOP_INSTANCE_UID, clip.clip_id),
        _text_element(TAG_STUDY_INSTANCE_UID, clip.study_id),
        _text_element(TAG_INSTANCE_NUMBER, str(clip.acquisition_index)),
        _us_element(TAG_SAMPLES_PER_PIXEL, 1),
        _element(TAG_PHOTOMETRIC, "CS", _text_bytes("MONOCHROME2", "CS")),
        _text_element(TAG_NUMBER_OF_FRAMES, str(clip.num_frames)),
        _us_element(TAG_ROWS, clip.rows),
        _us_element(TAG_COLUMNS, clip.cols),
        _us_element(TAG_BITS_ALLOCATED, 8),
        _us_element(TAG_BITS_STORED, 8),
        _us_element(TAG_HIGH_BIT, 7),
        _us_element(TAG_PIXEL_REPRESENTATION, 0),
        _text_element(TAG_FRAME_TIME, _ds_bytes(clip.frame_interval_ms)),
    ]
    if clip.declared_view_hint is not None:
        elements.append(_text_element(TAG_SERIES_DESCRIPTION, clip.declared_view_hint))
    if clip.pixel_spacing_mm is not None:
        row_mm, col_mm = clip.pixel_spacing_mm
        spacing = f"{_ds_bytes(row_mm)}\\{_ds_bytes(col_mm)}"
        elements.append(_element(TAG_PIXEL_SPACING, "DS", _text_bytes(spacing, "DS")))
    if phi:
        for tag, text in phi.items():
            elements.append(_text_element(tag, text))
    pixels = clip.frames.tobytes()
    if len(pixels) % 2 != 0:
        pixels += b"\x00"
    elements.append(_element(TAG_PIXEL_DATA, "OB", pixels))
    elements.sort(key=lambda e: e.tag)
    return elements


def _build_meta(clip_id: str) -> bytes:
    meta_elements = [
        _element((0x0002, 0x0001), "OB", b"\x00\x01"),
        _element((0x0002, 0x0002), "UI", _text_bytes(SOP_CLASS_US_MULTIFRAME, "UI")),
        _element((0x0002, 0x0003), "UI", _text_bytes(clip_id, "UI")),
        _element((0x0002, 0x0010), "UI", _text_bytes(EXPLICIT_VR_LE, "UI")),
        _element((0x0002, 0x0012), "UI", _text_bytes(IMPLEMENTATION_CLASS_UID, "UI")),
    ]
    body = b"".join(_encode_element(e) for e in meta_elements)
    group_length = _element((0x0002, 0x0000), "UL", struct.pack("<I", len(body)))
    return _encode_element(group_length) + body


def write_dicom(clip: EchoClip, elements: Optional[Sequence[DicomElement]] = None) -> bytes:
    """Encode a clip (or an explicit dataset) as explicit VR little endian bytes.

    With `elements` given they are taken as the authoritative dataset and
    written in ascending tag order; otherwise a canonical dataset is built
    from the clip. Output parses back to an equal clip.
    """
    if clip.num_frames < 1:
        raise UnencodableValue("clip must hold at least one frame")
    if clip.frames.shape != (clip.num_frames, clip.rows, clip.cols):
        raise UnencodableValue("clip frame array does not match its declared dimensions")
    dataset = list(elements) if elements is not None else build_elements(clip)
    dataset.sort(key=lambda e: e.tag)
    tags = [e.tag for e in dataset]
    if len(set(tags)) != len(tags):
        raise UnencodableValue("dataset holds duplicate tags")
    body = b"".join(_encode_element(e) for e in dataset)
    return b"\x00" * 128 + b"DICM" + _build_meta(clip.clip_id) + body
