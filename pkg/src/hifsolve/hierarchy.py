"""Cell tree over the grid and per-level grouping of active DOFs.

Level ell of the tree tiles the domain with cells of side s = 2^ell * m grid
steps.  A DOF is classified by how many of its lattice coordinates fall on
the level-ell cell lines (multiples of s): none -> strictly inside a cell
(interior); one -> on a shared edge (2D) or face (3D); two in 3D -> on a
shared edge; all -> at a cell corner.  Groups are keyed by the owning piece
of geometry, so DOFs surviving from earlier levels land in the group their
original grid coordinates dictate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError
from .grid import GridSpec

INTERIOR = "interior"
EDGE = "edge"
FACE = "face"
CORNER = "corner"

# stage membership by (dim, number of on-line coordinates)
_KIND_2D = {0: INTERIOR, 1: EDGE, 2: CORNER}
_KIND_3D = {0: INTERIOR, 1: FACE, 2: EDGE, 3: CORNER}


@dataclass(frozen=True)
class CellBox:
    """One cell: lattice bounds [lo, hi] per dimension, both inclusive."""

    level: int
    lo: tuple
    hi: tuple

    def contains_strictly(self, coord) -> bool:
        return all(l < c < h for l, c, h in zip(self.lo, coord, self.hi))


@dataclass(frozen=True)
class DofGroup:
    kind: str
    level: int
    indices: np.ndarray  # global DOF ids, ascending
    owner: tuple  # geometry key: (kind, lattice descriptor...)

    def __len__(self):
        return len(self.indices)


@dataclass
class LevelPartition:
    """Active DOFs of one level split into the three stage groupings."""

    level: int
    interior_groups: list
    skeleton_groups: list  # edges in 2D, faces in 3D: the compressed separators
    precond_groups: list  # everything that is not interior

    @property
    def p(self) -> int:
        return len(self.interior_groups)

    @property
    def q(self) -> int:
        return len(self.skeleton_groups)

    @property
    def r(self) -> int:
        return len(self.precond_groups)

    def all_groups(self):
        return self.interior_groups + self.precond_groups


def build_hierarchy(spec: GridSpec):
    """Cells per level, 0 (leaves) .. L (root); 2^(dim*(L-ell)) cells at level ell."""
    levels = []
    for ell in range(spec.levels + 1):
        s = (2 ** ell) * spec.m
        per_dim = spec.n // s
        boxes = []
        for flat in range(per_dim ** spec.dim):
            idx = []
            rem = flat
            for _ in range(spec.dim):
                idx.append(rem % per_dim)
                rem //= per_dim
            lo = tuple(i * s for i in idx)
            hi = tuple(i * s + s for i in idx)
            boxes.append(CellBox(ell, lo, hi))
        # lexicographic by origin, x-major
        boxes.sort(key=lambda b: b.lo)
        levels.append(boxes)
    return levels


def classify_active(spec: GridSpec, level: int, active, cells=None) -> LevelPartition:
    """Group the active DOFs of one level by owning cell geometry.

    `active` is the ordered surviving DOF set entering this level; `cells`
    (optional) are the level's CellBox list, used only for cross-checks.
    Group order is lexicographic by lattice origin, then by geometry kind;
    indices within a group are ascending.
    """
    active = np.asarray(active, dtype=np.int64)
    s = (2 ** level) * spec.m
    per_dim = spec.n // s
    if cells is not None and len(cells) != per_dim ** spec.dim:
        raise ConsistencyError(
            f"expected {per_dim ** spec.dim} cells at level {level}, got {len(cells)}"
        )
    if active.size == 0:
        return LevelPartition(level, [], [], [])

    coords = spec.coords_of(active)
    if np.any(coords < 1) or np.any(coords > spec.n - 1):
        raise ConsistencyError("active DOF with coordinates outside the domain")

    q = coords // s
    on_line = (coords % s) == 0
    nline = on_line.sum(axis=1)
    bits = np.zeros(len(active), dtype=np.int64)
    for d in range(spec.dim):
        bits |= on_line[:, d].astype(np.int64) << d

    # composite key: origin-major, geometry kind last
    keycols = [q[:, d] for d in range(spec.dim)] + [bits]
    order = np.lexsort(tuple(reversed(keycols)))
    code = np.zeros(len(active), dtype=np.int64)
    for col in keycols:
        code = code * (per_dim + 8) + col
    sorted_code = code[order]
    starts = np.flatnonzero(np.r_[True, sorted_code[1:] != sorted_code[:-1]])
    ends = np.r_[starts[1:], len(sorted_code)]

    kinds = _KIND_2D if spec.dim == 2 else _KIND_3D
    interior, skeleton, precond = [], [], []
    sep_kind = EDGE if spec.dim == 2 else FACE
    for a, b in zip(starts, ends):
        members = np.sort(active[order[a:b]])
        i0 = order[a]
        kind = kinds[int(nline[i0])]
        owner = _owner_key(kind, spec.dim, q[i0], on_line[i0])
        group = DofGroup(kind, level, members, owner)
        if kind == INTERIOR:
            interior.append(group)
        else:
            precond.append(group)
            if kind == sep_kind:
                skeleton.append(group)
    return LevelPartition(level, interior, skeleton, precond)


def _owner_key(kind, dim, q, on_line):
    if kind == INTERIOR:
        return (INTERIOR, tuple(int(x) for x in q))
    if kind == CORNER:
        return (CORNER, tuple(int(x) for x in q))
    axes = tuple(int(d) for d in range(dim) if on_line[d])
    free = tuple(int(d) for d in range(dim) if not on_line[d])
    lines = tuple(int(q[d]) for d in axes)
    segs = tuple(int(q[d]) for d in free)
    return (kind, axes, lines, segs)


def write_partition_csv(part: LevelPartition, spec: GridSpec, path):
    """Debug dump: one row per active DOF with coordinates, kind and group id."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dof_id"] + [f"x{d}" for d in range(spec.dim)]
                   + ["group_kind", "group_id"])
        for gid, group in enumerate(part.all_groups()):
            coords = spec.coords_of(group.indices)
            for dof, xyz in zip(group.indices, coords):
                w.writerow([int(dof)] + [int(c) for c in xyz] + [group.kind, gid])
