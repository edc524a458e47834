"""3D scalar volumes, label masks, probability fields, and the VOL1 file format.

VOL1 is a little-endian binary container:

    bytes 0-3   magic ``VOL1``
    bytes 4-15  nx, ny, nz as unsigned 32-bit
    byte  16    dtype code (1 = float64 scalar field, 2 = uint8 label mask)
    byte  17    num_classes (label masks only)
    payload     nx*ny*nz values in x-fastest order, i.e. linear index
                ``x + nx*(y + ny*z)``

The x-fastest linear ordering is the project-wide convention for every flat
buffer; in-memory arrays are indexed ``[x, y, z]``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"VOL1"
DTYPE_FLOAT64 = 1
DTYPE_LABELS = 2

# Refuse dim products that cannot be honest payloads (2^31 doubles = 16 GiB).
MAX_VOXELS = 1 << 31

PHANTOM_KINDS = (
    "constant",
    "solid-ball",
    "hollow-shell",
    "solid-torus",
    "two-blobs",
    "fig2-line",
)


class VolumeFormatError(ValueError):
    """A VOL1 stream violates the format."""


class BadMagicError(VolumeFormatError):
    """Leading magic bytes are not ``VOL1``."""


class TruncatedPayloadError(VolumeFormatError):
    """Header or payload is shorter (or longer) than the dims require."""


class DimsError(VolumeFormatError):
    """Dimensions are zero or overflow the supported voxel count."""


class NonFiniteValueError(VolumeFormatError):
    """A float payload carries NaN or infinity."""


class UnknownDtypeError(VolumeFormatError):
    """The dtype code byte is not a known code."""


class LabelRangeError(VolumeFormatError):
    """A stored label is >= num_classes."""


class PhantomError(ValueError):
    """Unknown phantom kind, bad parameter, or dims too small for the shape."""


def _check_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise DimsError(f"dims must be three positive integers, got {dims}")
    if dims[0] * dims[1] * dims[2] > MAX_VOXELS:
        raise DimsError(f"dims {dims} overflow the {MAX_VOXELS}-voxel limit")
    return dims


@dataclass(frozen=True)
class Volume3D:
    """Dense 3D scalar field. Values are float64, finite, indexed [x, y, z]."""

    dims: tuple[int, int, int]
    values: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != dims:
            raise DimsError(f"value array shape {values.shape} != dims {dims}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValueError("volume values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, Volume3D):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.dims, self.values.tobytes()))

    def linear(self) -> np.ndarray:
        """Flat copy in the canonical x-fastest order."""
        return self.values.ravel(order="F").copy()

    @classmethod
    def from_linear(cls, dims, flat) -> "Volume3D":
        dims = _check_dims(dims)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != dims[0] * dims[1] * dims[2]:
            raise DimsError(f"{flat.size} values do not fill dims {dims}")
        return cls(dims, flat.reshape(dims, order="F"))


@dataclass(frozen=True)
class LabelMask:
    """Dense 3D integer labels in [0, num_classes), indexed [x, y, z]."""

    dims: tuple[int, int, int]
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        dims = _check_dims(self.dims)
        if not 2 <= int(self.num_classes) <= 255:
            raise LabelRangeError(f"num_classes must be in [2, 255], got {self.num_classes}")
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if labels.shape != dims:
            raise DimsError(f"label array shape {labels.shape} != dims {dims}")
        if labels.max(initial=0) >= self.num_classes:
            raise LabelRangeError(
                f"label {int(labels.max())} out of range for {self.num_classes} classes"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "num_classes", int(self.num_classes))

    def __eq__(self, other):
        if not isinstance(other, LabelMask):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.num_classes == other.num_classes
            and np.array_equal(self.labels, other.labels)
        )

    def __hash__(self):
        return hash((self.dims, self.num_classes, self.labels.tobytes()))


@dataclass(frozen=True)
class ProbabilityField:
    """Per-voxel class probabilities, shape (num_classes, nx, ny, nz)."""

    dims: tuple[int, int, int]
    probs: np.ndarray

    SUM_TOL = 1e-6

    def __post_init__(self):
        dims = _check_dims(self.dims)
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if probs.ndim != 4 or probs.shape[1:] != dims:
            raise DimsError(f"probability array shape {probs.shape} != (L, *{dims})")
        if probs.shape[0] < 2:
            raise DimsError("a probability field needs at least 2 classes")
        if probs.min() < 0.0 or probs.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        sums = probs.sum(axis=0)
        if np.abs(sums - 1.0).max() > self.SUM_TOL:
            raise ValueError("per-voxel class probabilities must sum to 1 within 1e-6")
        probs.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "probs", probs)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]


def save_volume(volume: Volume3D, path) -> None:
    """Write a float64 VOL1 file. Byte stream is deterministic for equal input."""
    nx, ny, nz = volume.dims
    payload = volume.values.ravel(order="F").astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", nx, ny, nz))
        fh.write(struct.pack("<B", DTYPE_FLOAT64))
        fh.write(payload)


def save_labels(mask: LabelMask, path) -> None:
    """Write a uint8 label-mask VOL1 file (carries num_classes)."""
    nx, ny, nz = mask.dims
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", nx, ny, nz))
        fh.write(struct.pack("<BB", DTYPE_LABELS, mask.num_classes))
        fh.write(mask.labels.ravel(order="F").tobytes())


def _read_header(data: bytes, path):
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 17:
        raise TruncatedPayloadError(f"{path}: truncated header")
    nx, ny, nz = struct.unpack_from("<III", data, 4)
    dtype_code = data[16]
    dims = _check_dims((nx, ny, nz))
    return dims, dtype_code


def load_volume(path) -> Volume3D:
    """Read a float64 VOL1 file; exact inverse of :func:`save_volume`."""
    data = Path(path).read_bytes()
    dims, dtype_code = _read_header(data, path)
    if dtype_code != DTYPE_FLOAT64:
        raise UnknownDtypeError(f"{path}: dtype code {dtype_code} is not a float64 volume")
    n = dims[0] * dims[1] * dims[2]
    payload = data[17:]
    if len(payload) != 8 * n:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} bytes, dims {dims} need {8 * n}"
        )
    flat = np.frombuffer(payload, dtype="<f8", count=n)
    if not np.all(np.isfinite(flat)):
        raise NonFiniteValueError(f"{path}: payload carries non-finite values")
    return Volume3D.from_linear(dims, flat)


def load_labels(path) -> LabelMask:
    """Read a uint8 label-mask VOL1 file; exact inverse of :func:`save_labels`."""
    data = Path(path).read_bytes()
    dims, dtype_code = _read_header(data, path)
    if dtype_code != DTYPE_LABELS:
        raise UnknownDtypeError(f"{path}: dtype code {dtype_code} is not a label mask")
    if len(data) < 18:
        raise TruncatedPayloadError(f"{path}: truncated header")
    num_classes = data[17]
    n = dims[0] * dims[1] * dims[2]
    payload = data[18:]
    if len(payload) != n:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} bytes, dims {dims} need {n}"
        )
    labels = np.frombuffer(payload, dtype=np.uint8, count=n).reshape(dims, order="F")
    return LabelMask(dims, labels, num_classes)


def field_from_mask(mask: LabelMask, class_id: int) -> Volume3D:
    """Scalarize one class of a mask: 1 - indicator(label == class_id).

    The class region gets value 0 and the rest 1, so the region enters a
    sublevel filtration first.
    """
    if not 0 <= class_id < mask.num_classes:
        raise ValueError(f"class_id {class_id} out of range for {mask.num_classes} classes")
    return Volume3D(mask.dims, 1.0 - (mask.labels == class_id))


def field_from_probs(probs: ProbabilityField, class_id: int) -> Volume3D:
    """Scalarize one class of a probability field: 1 - p_class, in [0, 1]."""
    if not 0 <= class_id < probs.num_classes:
        raise ValueError(f"class_id {class_id} out of range for {probs.num_classes} classes")
    return Volume3D(probs.dims, 1.0 - probs.probs[class_id])


def one_hot(mask: LabelMask) -> ProbabilityField:
    """Probability field that puts mass 1 on each voxel's label."""
    probs = np.zeros((mask.num_classes,) + mask.dims)
    for c in range(mask.num_classes):
        probs[c] = mask.labels == c
    return ProbabilityField(mask.dims, probs)


def _phantom_params(params, allowed):
    params = dict(params or {})
    unknown = set(params) - set(allowed)
    if unknown:
        raise PhantomError(f"unknown phantom parameters: {sorted(unknown)}")
    return params


def generate_phantom(kind: str, dims, params=None) -> Volume3D:
    """Deterministic synthetic volume with known sublevel topology.

    Shapes are carved as value-0 voxels on a value-1 background, so the
    sublevel set at threshold 0.5 is exactly the shape:

    - ``constant``: every voxel equals ``value`` (default 0).
    - ``solid-ball``: Euclidean ball of ``radius`` voxels, Betti (1, 0, 0).
    - ``hollow-shell``: one-voxel-thick box shell at Chebyshev ``radius``
      from the center, enclosing a cavity, Betti (1, 0, 1).
    - ``solid-torus``: square ring of ``radius`` in the central z-slice,
      Betti (1, 1, 0).
    - ``two-blobs``: two boxes separated along x, Betti (2, 0, 0).
    - ``fig2-line``: the fixed 5x1x1 ramp [-2, 1, -1, 2, -1] whose merge
      tree yields the 0-dim pairs (-2, inf), (-1, 1), (-1, 2).
    """
    if kind not in PHANTOM_KINDS:
        raise PhantomError(f"unknown phantom kind {kind!r}; choose from {PHANTOM_KINDS}")
    dims = _check_dims(dims)
    nx, ny, nz = dims

    if kind == "constant":
        params = _phantom_params(params, {"value"})
        value = float(params.get("value", 0.0))
        return Volume3D(dims, np.full(dims, value))

    if kind == "fig2-line":
        _phantom_params(params, set())
        if dims != (5, 1, 1):
            raise PhantomError(f"fig2-line is a fixed 5x1x1 fixture, got dims {dims}")
        return Volume3D(dims, np.array([-2.0, 1.0, -1.0, 2.0, -1.0]).reshape(5, 1, 1))

    x, y, z = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")

    if kind == "solid-ball":
        params = _phantom_params(params, {"radius"})
        if min(dims) < 3:
            raise PhantomError(f"solid-ball needs dims >= 3 in each axis, got {dims}")
        radius = float(params.get("radius", (min(dims) - 1) / 2.0 - 0.4))
        if radius <= 0:
            raise PhantomError(f"solid-ball radius must be positive, got {radius}")
        cx, cy, cz = ((d - 1) / 2.0 for d in dims)
        inside = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 <= radius**2
        if not inside.any():
            raise PhantomError(f"radius {radius} selects no voxels on dims {dims}")
        return Volume3D(dims, 1.0 - inside)

    if kind == "hollow-shell":
        params = _phantom_params(params, {"radius"})
        if min(dims) < 5:
            raise PhantomError(f"hollow-shell needs dims >= 5 in each axis, got {dims}")
        radius = int(params.get("radius", min((d - 1) // 2 for d in dims)))
        if radius < 2:
            raise PhantomError("hollow-shell radius must be >= 2 to enclose a cavity")
        cx, cy, cz = ((d - 1) // 2 for d in dims)
        if any(c - radius < 0 or c + radius > d - 1 for c, d in zip((cx, cy, cz), dims)):
            raise PhantomError(f"radius {radius} shell does not fit dims {dims}")
        cheb = np.maximum.reduce([abs(x - cx), abs(y - cy), abs(z - cz)])
        return Volume3D(dims, 1.0 - (cheb == radius))

    if kind == "solid-torus":
        params = _phantom_params(params, {"radius"})
        if nx < 5 or ny < 5:
            raise PhantomError(f"solid-torus needs nx, ny >= 5, got {dims}")
        radius = int(params.get("radius", min((nx - 1) // 2, (ny - 1) // 2)))
        if radius < 2:
            raise PhantomError("solid-torus radius must be >= 2 to enclose a hole")
        cx, cy = (nx - 1) // 2, (ny - 1) // 2
        if cx - radius < 0 or cx + radius > nx - 1 or cy - radius < 0 or cy + radius > ny - 1:
            raise PhantomError(f"radius {radius} ring does not fit dims {dims}")
        ring = np.maximum(abs(x - cx), abs(y - cy)) == radius
        inside = ring & (z == nz // 2)
        return Volume3D(dims, 1.0 - inside)

    # two-blobs
    _phantom_params(params, set())
    if nx < 5:
        raise PhantomError(f"two-blobs needs nx >= 5, got {dims}")
    w = max(1, nx // 3)
    cy, cz = (ny - 1) // 2, (nz - 1) // 2
    in_y = (y >= max(0, cy - 1)) & (y <= min(ny - 1, cy + 1))
    in_z = (z >= max(0, cz - 1)) & (z <= min(nz - 1, cz + 1))
    inside = ((x < w) | (x >= nx - w)) & in_y & in_z
    return Volume3D(dims, 1.0 - inside)
