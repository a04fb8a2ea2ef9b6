"""Wire geometry: polylines, segment meshes, and nesting relations.

A mesh carries K ordered nodes along the wire axis; the unknowns are
triangle (hat) functions on interior nodes, so basis_count = K - 2 and the
current vanishes at both wire ends.  Everything here is immutable value
data: arrays are made read-only on construction and meshes compare by
identity (callers use `fingerprint()` for content identity).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def _as_points(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError(f"{name} must be an (n, 3) array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite coordinates")
    return arr


@dataclass(frozen=True, eq=False)
class WirePolyline:
    """Ordered 3-D centreline of a thin wire with a uniform radius (metres)."""

    vertices: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        verts = _as_points(self.vertices, "vertices")
        if verts.shape[0] < 2:
            raise ValidationError("a wire polyline needs at least two vertices")
        steps = np.linalg.norm(np.diff(verts, axis=0), axis=1)
        if np.any(steps == 0.0):
            raise ValidationError("consecutive polyline vertices must be distinct")
        if not np.isfinite(self.radius) or self.radius <= 0.0:
            raise ValidationError(f"wire radius must be positive, got {self.radius!r}")
        verts = verts.copy()
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)))


@dataclass(frozen=True, eq=False)
class WireMesh:
    """Segmentation of a polyline into nodes, with derived segment data.

    Nodes must be ordered along the wire; segment s runs from node s to
    node s+1.  Basis function m peaks at interior node m+1 and spans
    segments m and m+1.
    """

    polyline: WirePolyline
    nodes: np.ndarray
    # derived, filled in __post_init__
    seg_lengths: np.ndarray = field(init=False, repr=False)
    tangents: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes = _as_points(self.nodes, "nodes")
        if nodes.shape[0] < 3:
            raise ValidationError("a mesh needs at least three nodes (one interior basis)")
        # NOTE: keep the caller's exact floats -- nested meshes rely on
        # bitwise-shared node coordinates with their parent.
        nodes = nodes.copy()
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

        deltas = np.diff(nodes, axis=0)
        lengths = np.linalg.norm(deltas, axis=1)
        if np.any(lengths <= 0.0):
            raise ValidationError("every segment must have positive length")
        if self.polyline.radius >= lengths.min():
            raise ValidationError(
                f"wire radius {self.polyline.radius:g} must be smaller than the shortest "
                f"segment {lengths.min():g} for the thin-wire kernel to make sense"
            )
        tangents = deltas / lengths[:, None]
        lengths.setflags(write=False)
        tangents.setflags(write=False)
        object.__setattr__(self, "seg_lengths", lengths)
        object.__setattr__(self, "tangents", tangents)

    @property
    def radius(self) -> float:
        return self.polyline.radius

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def segment_count(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def basis_count(self) -> int:
        return self.nodes.shape[0] - 2

    @property
    def seg_starts(self) -> np.ndarray:
        return self.nodes[:-1]

    @property
    def seg_ends(self) -> np.ndarray:
        return self.nodes[1:]

    def fingerprint(self) -> str:
        """Content hash of the mesh (radius + node coordinates)."""
        h = hashlib.sha256()
        h.update(np.float64(self.radius).tobytes())
        h.update(np.ascontiguousarray(self.nodes).tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class NestingMap:
    """Where each basis function of a child mesh lives inside a parent mesh.

    index_map[mu] is the parent basis index whose support nodes coincide with
    child basis mu's, or None when that basis has no parent counterpart.  A
    partial map is valid; `complete` says whether every child basis matched.
    """

    parent_fingerprint: str
    child_fingerprint: str
    index_map: tuple
    tolerance: float

    @property
    def complete(self) -> bool:
        return all(m is not None for m in self.index_map)

    def parent_indices(self) -> np.ndarray:
        if not self.complete:
            raise ValidationError("nesting map is incomplete; no full parent index list exists")
        return np.asarray(self.index_map, dtype=int)


def make_dipole(length: float, radius: float, n_segments: int) -> WireMesh:
    """Straight wire dipole on the z axis, centred at the origin, uniformly
    segmented.  basis_count comes out as n_segments - 1."""
    if not np.isfinite(length) or length <= 0.0:
        raise ValidationError(f"dipole length must be positive, got {length!r}")
    if int(n_segments) != n_segments or n_segments < 3:
        raise ValidationError(f"n_segments must be an integer >= 3, got {n_segments!r}")
    n_segments = int(n_segments)
    if radius >= length / n_segments:
        raise ValidationError(
            f"radius {radius!r} must be smaller than the segment length {length / n_segments:g}"
        )
    z = np.linspace(-0.5 * length, 0.5 * length, n_segments + 1)
    nodes = np.zeros((n_segments + 1, 3))
    nodes[:, 2] = z
    poly = WirePolyline(vertices=nodes[[0, -1]], radius=radius)
    return WireMesh(polyline=poly, nodes=nodes)


def trim_dipole(mesh: WireMesh, length: float) -> WireMesh:
    """Centred sub-dipole of a uniformly segmented straight mesh.

    The requested length snaps to a whole number of parent segments with the
    same centring parity, so the result's nodes are bitwise-shared with the
    parent's and every basis of the child nests in the parent.
    """
    if not np.isfinite(length) or length <= 0.0:
        raise ValidationError(f"trim length must be positive, got {length!r}")
    total = mesh.segment_count
    pitch = float(np.mean(mesh.seg_lengths))
    span = float(mesh.seg_lengths.sum())
    if length > span * (1.0 + 1e-12):
        raise ValidationError(f"trim length {length:g} exceeds the mesh length {span:g}")
    want = int(round(length / pitch))
    want = max(want, 3)
    want = min(want, total)
    if (total - want) % 2 != 0:
        # keep the child centred: move to the nearer odd/even neighbour
        lo, hi = want - 1, want + 1
        if hi > total or (lo >= 3 and abs(lo * pitch - length) <= abs(hi * pitch - length)):
            want = lo
        else:
            want = hi
    if want < 3:
        raise ValidationError(f"trim length {length:g} is too short for this segmentation")
    start = (total - want) // 2
    nodes = mesh.nodes[start : start + want + 1]
    poly = WirePolyline(vertices=np.array([nodes[0], nodes[-1]]), radius=mesh.radius)
    return WireMesh(polyline=poly, nodes=nodes)


def nest(child: WireMesh, parent: WireMesh, tol: float = 1e-12) -> NestingMap:
    """Match child basis functions to parent basis functions by node
    coincidence within `tol`.  Unmatched bases map to None; that is not an
    error (disjoint structures simply produce an empty map)."""
    if tol <= 0.0:
        raise ValidationError(f"nesting tolerance must be positive, got {tol!r}")
    # pairwise node distances (meshes are small; brute force is fine)
    diff = child.nodes[:, None, :] - parent.nodes[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    node_match = np.full(child.node_count, -1, dtype=int)
    for i in range(child.node_count):
        j = int(np.argmin(dist[i]))
        if dist[i, j] <= tol:
            node_match[i] = j

    index_map = []
    for mu in range(child.basis_count):
        # child basis mu spans child nodes mu, mu+1, mu+2
        trio = node_match[mu : mu + 3]
        if np.all(trio >= 0) and trio[1] == trio[0] + 1 and trio[2] == trio[1] + 1:
            centre = trio[1]  # parent node index of the peak
            if 1 <= centre <= parent.node_count - 2:
                index_map.append(int(centre - 1))
                continue
        index_map.append(None)
    return NestingMap(
        parent_fingerprint=parent.fingerprint(),
        child_fingerprint=child.fingerprint(),
        index_map=tuple(index_map),
        tolerance=tol,
    )
