import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wirecm.errors import ValidationError
from wirecm.geometry import WireMesh, WirePolyline, make_dipole, nest, trim_dipole


def test_make_dipole_basic_shape():
    mesh = make_dipole(2.0, 0.001, 40)
    assert mesh.node_count == 41
    assert mesh.segment_count == 40
    assert mesh.basis_count == 39
    assert mesh.nodes[0, 2] == pytest.approx(-1.0)
    assert mesh.nodes[-1, 2] == pytest.approx(1.0)
    # centered on the origin, lying on the z axis
    assert np.allclose(mesh.nodes[:, :2], 0.0)
    assert abs(mesh.nodes[:, 2].sum()) < 1e-12


def test_make_dipole_rejects_bad_input():
    with pytest.raises(ValidationError):
        make_dipole(0.0, 0.001, 10)
    with pytest.raises(ValidationError):
        make_dipole(1.0, 0.001, 2)
    with pytest.raises(ValidationError):
        make_dipole(1.0, 0.2, 10)  # radius thicker than a segment


def test_mesh_segment_quantities():
    mesh = make_dipole(1.0, 0.001, 20)
    assert np.all(mesh.seg_lengths > 0)
    assert mesh.seg_lengths == pytest.approx(np.full(20, 0.05), rel=1e-12)
    assert np.allclose(mesh.tangents, np.array([0.0, 0.0, 1.0]))


def test_fingerprint_tracks_content():
    a = make_dipole(1.0, 0.001, 20)
    b = make_dipole(1.0, 0.001, 20)
    c = make_dipole(1.0, 0.002, 20)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()


def test_trim_shares_parent_nodes_bitwise():
    parent = make_dipole(2.0, 0.001, 40)
    child = trim_dipole(parent, 1.0)
    assert child.segment_count == 20
    assert child.radius == parent.radius
    start = (parent.segment_count - child.segment_count) // 2
    sel = parent.nodes[start : start + child.node_count]
    assert np.array_equal(child.nodes, sel)  # exact floats, not approximate


def test_trim_parity_snap():
    parent = make_dipole(2.0, 0.001, 40)  # pitch 0.05, even segment count
    # 0.44 wants 8.8 segments -> 9 is odd -> snaps down to 8 (nearer than 10)
    child = trim_dipole(parent, 0.44)
    assert child.segment_count == 8
    # full length passes through unchanged
    assert trim_dipole(parent, 2.0).segment_count == 40


def test_trim_rejects_nonpositive_and_overlong():
    parent = make_dipole(2.0, 0.001, 40)
    with pytest.raises(ValidationError):
        trim_dipole(parent, 0.0)
    with pytest.raises(ValidationError):
        trim_dipole(parent, 2.5)


def test_nest_maps_child_bases_into_parent():
    parent = make_dipole(2.0, 0.001, 40)
    child = trim_dipole(parent, 1.0)
    nm = nest(child, parent)
    assert nm.complete
    assert len(nm.index_map) == child.basis_count
    idx = nm.parent_indices()
    # contiguous run of parent basis indices, centered
    assert list(idx) == list(range(idx[0], idx[0] + child.basis_count))


def test_nest_of_foreign_mesh_is_incomplete():
    parent = make_dipole(2.0, 0.001, 40)
    stranger = make_dipole(1.0, 0.001, 20)
    shifted = WireMesh(
        polyline=stranger.polyline,
        nodes=stranger.nodes + np.array([0.0, 0.0, 1e-3]),
    )
    nm = nest(shifted, parent)
    assert not nm.complete
    with pytest.raises(ValidationError):
        nm.parent_indices()


def test_polyline_validation():
    with pytest.raises(ValidationError):
        WirePolyline(vertices=np.zeros((1, 3)), radius=0.001)
    with pytest.raises(ValidationError):
        WirePolyline(vertices=np.array([[0.0, 0, 0], [0, 0, 1]]), radius=-1.0)


@given(
    length=st.floats(min_value=0.12, max_value=2.0),
    n_parent=st.integers(min_value=12, max_value=48),
)
def test_trim_always_nests(length, n_parent):
    parent = make_dipole(2.0, 0.001, n_parent)
    child = trim_dipole(parent, length)
    pitch = 2.0 / n_parent
    assert 3 <= child.segment_count <= n_parent
    if length >= 4.5 * pitch:
        # snapped to whole segments: round-off plus at most one parity step
        got = child.seg_lengths.sum()
        assert abs(got - length) <= 1.5 * pitch + 1e-12
    nm = nest(child, parent)
    assert nm.complete
