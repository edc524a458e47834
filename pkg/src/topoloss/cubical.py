"""Sublevel-set persistent homology of 3D volumes as cubical complexes.

Each voxel is a top-dimensional 3-cube carrying its value; every
lower-dimensional face carries the minimum over the voxels incident to it.
The sublevel complex at threshold t is then exactly the union of the closed
cubes of voxels with value <= t, and the critical values are the distinct
voxel values.

Cells are addressed on the doubled grid (2*nx+1, 2*ny+1, 2*nz+1): a grid
point whose coordinates are all odd is a voxel cube, and every even
coordinate drops the cell dimension by one. Ties in the filtration are
broken by (dimension, z, y, x) on doubled coordinates, which keeps every
face strictly before its cofaces and makes diagrams reproducible.

Pairing is computed with union-find over the 1-skeleton for dimension 0
(elder rule: the component with the older birth survives a merge) and
mod-2 boundary-matrix column reduction with clearing for dimensions 1-2.
``betti_oracle`` is an independent validation path that rebuilds the
sublevel complex by brute force and takes dense GF(2) boundary ranks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .volume import Volume3D

ORACLE_CELL_CAP = 20_000


class DiagramFormatError(ValueError):
    """A diagram CSV stream is malformed."""


class ComplexTooLargeError(RuntimeError):
    """The sublevel complex exceeds the brute-force oracle's cell cap."""


@dataclass(frozen=True, order=True)
class PersistencePair:
    """One homological feature: born at ``birth``, dead at ``death``.

    ``death`` is ``math.inf`` for essential classes. Pairs with
    birth == death carry no information and are never constructed.
    """

    dim: int
    birth: float
    death: float

    def __post_init__(self):
        if self.dim not in (0, 1, 2):
            raise ValueError(f"pair dimension must be 0, 1 or 2, got {self.dim}")
        if not self.birth < self.death:
            raise ValueError(f"pair must satisfy birth < death, got ({self.birth}, {self.death})")

    @property
    def essential(self) -> bool:
        return math.isinf(self.death)

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of persistence pairs, canonically sorted by (dim, birth, death)."""

    pairs: tuple
    dims: tuple | None = field(default=None, compare=False)
    value_range: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs)))

    def in_dim(self, dim: int) -> tuple:
        return tuple(p for p in self.pairs if p.dim == dim)

    def points(self, dim: int) -> np.ndarray:
        """(n, 2) array of (birth, death) for one dimension; death may be inf."""
        pts = [(p.birth, p.death) for p in self.pairs if p.dim == dim]
        return np.array(pts, dtype=np.float64).reshape(len(pts), 2)

    def betti_at(self, threshold: float, max_dim: int = 2) -> tuple:
        """Number of dim-k pairs alive at t (birth <= t < death) for k <= max_dim."""
        counts = [0] * (max_dim + 1)
        for p in self.pairs:
            if p.dim <= max_dim and p.birth <= threshold < p.death:
                counts[p.dim] += 1
        return tuple(counts)


# ---------------------------------------------------------------------------
# cell grid helpers
# ---------------------------------------------------------------------------


def _double_min(arr: np.ndarray, axis: int) -> np.ndarray:
    """Expand one axis of length n to 2n+1: odd slots copy the input, even
    slots take the min of the adjacent input entries (single at the borders)."""
    n = arr.shape[axis]
    shape = list(arr.shape)
    shape[axis] = 2 * n + 1
    out = np.empty(shape, dtype=arr.dtype)

    def sl(i):
        idx = [slice(None)] * arr.ndim
        idx[axis] = i
        return tuple(idx)

    out[sl(slice(1, None, 2))] = arr
    out[sl(slice(0, 1))] = arr[sl(slice(0, 1))]
    out[sl(slice(2 * n, 2 * n + 1))] = arr[sl(slice(n - 1, n))]
    if n > 1:
        inner = np.minimum(arr[sl(slice(None, -1))], arr[sl(slice(1, None))])
        out[sl(slice(2, 2 * n - 1, 2))] = inner
    return out


def _cell_values(values: np.ndarray) -> np.ndarray:
    """Doubled-grid array of cell values (min over incident voxels)."""
    out = values
    for axis in range(3):
        out = _double_min(out, axis)
    return out


def _cell_dims(shape_doubled) -> np.ndarray:
    """Cell dimension (number of odd coordinates) per doubled-grid point."""
    dx, dy, dz = shape_doubled
    ox = (np.arange(dx) % 2).astype(np.int8)
    oy = (np.arange(dy) % 2).astype(np.int8)
    oz = (np.arange(dz) % 2).astype(np.int8)
    return ox[:, None, None] + oy[None, :, None] + oz[None, None, :]


class _UnionFind:
    """Union-find over vertex cells with per-root birth bookkeeping."""

    def __init__(self):
        self.parent: dict[int, int] = {}
        self.birth: dict[int, tuple] = {}  # root -> (birth value, creator rank)

    def add(self, cell: int, birth_value: float, rank: int):
        self.parent[cell] = cell
        self.birth[cell] = (birth_value, rank)

    def find(self, cell: int) -> int:
        root = cell
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[cell] != root:
            self.parent[cell], cell = root, self.parent[cell]
        return root

    def union(self, a: int, b: int):
        """Merge the components of a and b; returns the dying component's
        (birth value, creator rank) or None when already connected."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return None
        if self.birth[rb] < self.birth[ra]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return self.birth.pop(rb)


def sublevel_persistence(volume: Volume3D, max_dim: int = 2) -> PersistenceDiagram:
    """All finite and essential persistence pairs of the sublevel filtration.

    Zero-persistence pairs are discarded. Essential deaths are ``math.inf``.
    """
    if max_dim not in (0, 1, 2):
        raise ValueError(f"max_dim must be 0, 1 or 2, got {max_dim}")
    vals = _cell_values(volume.values)
    dims = _cell_dims(vals.shape)
    dx, dy, dz = vals.shape

    flat_vals = vals.ravel(order="F")
    flat_dims = dims.ravel(order="F")
    n_cells = flat_vals.size
    ids = np.arange(n_cells)
    xs = ids % dx
    ys = (ids // dx) % dy
    zs = ids // (dx * dy)

    # Total filtration order: value, then dim, then (z, y, x); fixes ties and
    # keeps faces strictly before cofaces.
    order = np.lexsort((xs, ys, zs, flat_dims, flat_vals))
    rank = np.empty(n_cells, dtype=np.int64)
    rank[order] = ids

    pairs: list[PersistencePair] = []

    # --- dimension 0: union-find over vertices and edges in filtration order
    uf = _UnionFind()
    edge_creators: list[int] = []  # edges that close a cycle (dim-1 births)
    stride = (1, dx, dx * dy)
    for cell in order:
        d = flat_dims[cell]
        if d == 0:
            uf.add(cell, float(flat_vals[cell]), int(rank[cell]))
        elif d == 1:
            if xs[cell] % 2:
                s = stride[0]
            elif ys[cell] % 2:
                s = stride[1]
            else:
                s = stride[2]
            died = uf.union(cell - s, cell + s)
            if died is None:
                edge_creators.append(cell)
            else:
                birth = died[0]
                death = float(flat_vals[cell])
                if birth < death:
                    pairs.append(PersistencePair(0, birth, death))
    for root in uf.birth.values():
        pairs.append(PersistencePair(0, root[0], math.inf))

    if max_dim >= 1:
        pairs.extend(_reduce_high_dims(flat_vals, flat_dims, xs, ys, zs, order, rank,
                                       stride, edge_creators, max_dim))

    vmin = float(volume.values.min())
    vmax = float(volume.values.max())
    return PersistenceDiagram(
        tuple(p for p in pairs if p.dim <= max_dim),
        dims=volume.dims,
        value_range=(vmin, vmax),
    )


def _faces(cell: int, odd_axes, stride):
    """Codimension-1 faces of a cell (drop each odd axis in turn)."""
    out = []
    for axis in odd_axes:
        out.append(cell - stride[axis])
        out.append(cell + stride[axis])
    return out


def _reduce_high_dims(flat_vals, flat_dims, xs, ys, zs, order, rank, stride,
                      edge_creators, max_dim):
    """Dim 1-2 pairs via column reduction with clearing (cubes first).

    Columns are arbitrary-precision ints: bit i set means the face with
    filtration rank i is in the column's mod-2 boundary.
    """

    def odd_axes(cell):
        axes = []
        if xs[cell] % 2:
            axes.append(0)
        if ys[cell] % 2:
            axes.append(1)
        if zs[cell] % 2:
            axes.append(2)
        return axes

    pairs = []

    # boundary of cubes: pivots pair (square, cube) -> dim-2 features
    pivot_sq: dict[int, int] = {}  # square rank -> reduced column
    for cell in order:
        if flat_dims[cell] != 3:
            continue
        col = 0
        for f in _faces(cell, (0, 1, 2), stride):
            col ^= 1 << int(rank[f])
        while col:
            low = col.bit_length() - 1
            other = pivot_sq.get(low)
            if other is None:
                pivot_sq[low] = col
                birth = float(flat_vals[order[low]])
                death = float(flat_vals[cell])
                if birth < death:
                    pairs.append(PersistencePair(2, birth, death))
                break
            col ^= other

    # boundary of squares: squares that are pivot rows above are creators of
    # dim-2 classes and reduce to zero, so clearing skips them.
    pivot_edge: dict[int, int] = {}
    essential_sq = []
    for cell in order:
        if flat_dims[cell] != 2 or int(rank[cell]) in pivot_sq:
            continue
        col = 0
        for f in _faces(cell, odd_axes(cell), stride):
            col ^= 1 << int(rank[f])
        while col:
            low = col.bit_length() - 1
            other = pivot_edge.get(low)
            if other is None:
                pivot_edge[low] = col
                birth = float(flat_vals[order[low]])
                death = float(flat_vals[cell])
                if birth < death:
                    pairs.append(PersistencePair(1, birth, death))
                break
            col ^= other
        else:
            essential_sq.append(cell)  # unpaired dim-2 creator

    for cell in essential_sq:
        pairs.append(PersistencePair(2, float(flat_vals[cell]), math.inf))
    for cell in edge_creators:
        if int(rank[cell]) not in pivot_edge:
            pairs.append(PersistencePair(1, float(flat_vals[cell]), math.inf))

    if max_dim < 2:
        pairs = [p for p in pairs if p.dim <= max_dim]
    return pairs


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def _gf2_rank(rows: int, cols: list) -> int:
    """Rank of a GF(2) matrix given as dense packed uint64 row words."""
    if rows == 0 or not cols:
        return 0
    n_words = (rows + 63) // 64
    mat = np.zeros((len(cols), n_words), dtype=np.uint64)
    for j, col in enumerate(cols):
        for i in col:
            mat[j, i >> 6] |= np.uint64(1) << np.uint64(i & 63)
    rank = 0
    for bit in range(rows):
        w = bit >> 6
        b = np.uint64(1) << np.uint64(bit & 63)
        hits = np.nonzero(mat[rank:, w] & b)[0]
        if hits.size == 0:
            continue
        p = rank + int(hits[0])
        if p != rank:
            mat[[rank, p]] = mat[[p, rank]]
        others = np.nonzero(mat[:, w] & b)[0]
        others = others[others != rank]
        if others.size:
            mat[others] ^= mat[rank]
        rank += 1
        if rank == len(cols):
            break
    return rank


def betti_oracle(volume: Volume3D, threshold: float, max_dim: int = 2) -> tuple:
    """Betti numbers of the sublevel complex at ``threshold`` by brute force.

    Rebuilds the complex cell by cell, computes beta_k as
    #k-cells - rank(boundary_k) - rank(boundary_{k+1}) over GF(2), and
    cross-checks beta_0 with a flood fill over face incidences. Refuses
    complexes above ``ORACLE_CELL_CAP`` cells.
    """
    if max_dim not in (0, 1, 2):
        raise ValueError(f"max_dim must be 0, 1 or 2, got {max_dim}")
    nx, ny, nz = volume.dims
    vox = volume.values

    def cell_value(a, b, c):
        x0, x1 = (a - 1) // 2, a // 2
        y0, y1 = (b - 1) // 2, b // 2
        z0, z1 = (c - 1) // 2, c // 2
        best = math.inf
        for x in {max(x0, 0), min(x1, nx - 1)}:
            for y in {max(y0, 0), min(y1, ny - 1)}:
                for z in {max(z0, 0), min(z1, nz - 1)}:
                    best = min(best, vox[x, y, z])
        return best

    active: dict[tuple, int] = {}
    by_dim: list[list[tuple]] = [[], [], [], []]
    for c in range(2 * nz + 1):
        for b in range(2 * ny + 1):
            for a in range(2 * nx + 1):
                if cell_value(a, b, c) <= threshold:
                    d = (a % 2) + (b % 2) + (c % 2)
                    active[(a, b, c)] = len(by_dim[d])
                    by_dim[d].append((a, b, c))
    n_active = len(active)
    if n_active > ORACLE_CELL_CAP:
        raise ComplexTooLargeError(
            f"sublevel complex at {threshold} has {n_active} cells "
            f"(oracle cap {ORACLE_CELL_CAP})"
        )

    def boundary_cols(k):
        cols = []
        for a, b, c in by_dim[k]:
            col = []
            for axis, coord in enumerate((a, b, c)):
                if coord % 2:
                    for delta in (-1, 1):
                        f = [a, b, c]
                        f[axis] = coord + delta
                        col.append(active[tuple(f)])
            cols.append(col)
        return cols

    counts = [len(by_dim[k]) for k in range(4)]
    ranks = [0] * 5  # ranks[k] = rank of boundary_k
    for k in range(1, 4):
        ranks[k] = _gf2_rank(counts[k - 1], boundary_cols(k))
    betti = tuple(counts[k] - ranks[k] - ranks[k + 1] for k in range(max_dim + 1))

    if counts[0]:
        b0_flood = _flood_fill_components(active)
        if betti[0] != b0_flood:
            raise RuntimeError(
                f"oracle self-check failed: rank beta0={betti[0]}, flood fill={b0_flood}"
            )
    return betti


def _flood_fill_components(active: dict) -> int:
    """Connected components of a cell set via face/coface incidence."""
    seen = set()
    components = 0
    for start in active:
        if start in seen:
            continue
        components += 1
        stack = [start]
        seen.add(start)
        while stack:
            a, b, c = stack.pop()
            for axis, coord in enumerate((a, b, c)):
                for delta in (-1, 1):
                    nb = [a, b, c]
                    nb[axis] = coord + delta
                    nb = tuple(nb)
                    if nb in active and nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
    return components


# ---------------------------------------------------------------------------
# diagram CSV
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_diagram(diagram: PersistenceDiagram, path) -> None:
    """CSV with header ``dim,birth,death``; essential deaths serialize as ``inf``.

    Rows are sorted by (dim, birth, death), so equal diagrams produce
    byte-identical files.
    """
    with open(path, "w", newline="") as fh:
        fh.write("dim,birth,death\n")
        for p in diagram.pairs:
            death = "inf" if p.essential else _fmt(p.death)
            fh.write(f"{p.dim},{_fmt(p.birth)},{death}\n")


def read_diagram(path) -> PersistenceDiagram:
    """Inverse of :func:`write_diagram`; exact for 17-significant-digit values."""
    pairs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["dim", "birth", "death"]:
            raise DiagramFormatError(f"{path}: bad header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DiagramFormatError(f"{path}:{lineno}: expected 3 fields, got {row}")
            try:
                dim = int(row[0])
                birth = float(row[1])
                death = math.inf if row[2].strip() == "inf" else float(row[2])
            except ValueError as exc:
                raise DiagramFormatError(f"{path}:{lineno}: {exc}") from exc
            if math.isnan(birth) or math.isnan(death) or math.isinf(birth):
                raise DiagramFormatError(f"{path}:{lineno}: non-finite coordinate")
            try:
                pairs.append(PersistencePair(dim, birth, death))
            except ValueError as exc:
                raise DiagramFormatError(f"{path}:{lineno}: {exc}") from exc
    return PersistenceDiagram(tuple(pairs))
