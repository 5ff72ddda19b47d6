"""Solid-model construction, mesh diagnostics, and STL round-tripping."""
import io
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paramhand import handspec as H
from paramhand.geometry import (
    GeometryError,
    TriMesh,
    bone_shaft_mesh,
    build_finger_mesh,
    build_hand_mesh,
    check_print_constraint,
    export_stl,
    import_stl,
    stl_bytes,
    weld,
)

PUL = H.PulleySpec()
LIG = H.LigamentSpec(w_lig=3.4, t_lig=0.5)
D_MIN = 2.0 * (PUL.t_p + PUL.r_p)  # 3.4 mm, smallest legal joint/width


def _tiny_finger(**overrides) -> H.FingerSpec:
    """Smallest legal finger: every sizing inequality at equality."""
    base = dict(
        name="tiny",
        l_meta=D_MIN / 2 + PUL.l_p,
        l_prox=D_MIN + 2 * PUL.l_p,
        l_inte=D_MIN + 2 * PUL.l_p,
        l_dist=D_MIN,
        w=D_MIN,
        d_mcp=D_MIN,
        d_pip=D_MIN,
        d_dip=D_MIN,
    )
    base.update(overrides)
    return H.FingerSpec(**base)


def _mid_finger(**overrides) -> H.FingerSpec:
    base = dict(
        name="mid", l_meta=20.0, l_prox=18.0, l_inte=15.0, l_dist=8.0,
        w=8.0, d_mcp=7.0, d_pip=6.0, d_dip=5.0,
    )
    base.update(overrides)
    return H.FingerSpec(**base)


def _tet() -> TriMesh:
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    t = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    return TriMesh(v, t)


# ─────────────────────────────── mesh diagnostics ───────────────────────────────


def test_tetrahedron_is_watertight_single_component():
    m = _tet()
    assert m.is_watertight()
    assert m.component_count() == 1
    assert m.volume() == pytest.approx(1.0 / 6.0, rel=1e-12)


def test_open_surface_is_not_watertight():
    m = _tet()
    open_mesh = TriMesh(m.vertices, m.triangles[:3])
    assert not open_mesh.is_watertight()


def test_disjoint_solids_count_two_components():
    a = _tet()
    v = np.vstack([a.vertices, a.vertices + 10.0])
    t = np.vstack([a.triangles, a.triangles + 4])
    assert TriMesh(v, t).component_count() == 2


def test_weld_merges_duplicates_and_drops_collapsed():
    a = _tet()
    v = np.vstack([a.vertices, a.vertices[:1]])  # vertex 4 duplicates vertex 0
    t = np.vstack([a.triangles, [[4, 2, 1]], [[0, 0, 1]]])
    m = weld(v, t)
    assert m.vertices.shape[0] == 4
    # the duplicate face survives (as 0,2,1 again), the collapsed one does not
    assert m.triangles.shape[0] == 5


def test_trimesh_rejects_out_of_range_indices():
    v = np.zeros((3, 3))
    with pytest.raises(ValueError):
        TriMesh(v, np.array([[0, 1, 3]]))


# ─────────────────────────────── STL layout ───────────────────────────────


def test_empty_mesh_exports_84_bytes():
    m = TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    assert len(stl_bytes(m, strict=False)) == 84


def test_single_triangle_exports_134_bytes():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    m = TriMesh(v, np.array([[0, 1, 2]]))
    assert len(stl_bytes(m, strict=False)) == 84 + 50


def test_strict_export_refuses_open_mesh():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    m = TriMesh(v, np.array([[0, 1, 2]]))
    with pytest.raises(GeometryError):
        stl_bytes(m)


def test_binary_round_trip_is_exact(tmp_path):
    m = _tet()
    path = tmp_path / "tet.stl"
    n = export_stl(m, path)
    assert n == path.stat().st_size == 84 + 50 * 4
    back = import_stl(path)
    assert back.n_triangles == 4
    assert back.volume() == pytest.approx(m.volume(), abs=0)
    # same vertex set, bit for bit
    a = np.sort(m.vertices.view("f8,f8,f8").ravel())
    b = np.sort(back.vertices.view("f8,f8,f8").ravel())
    assert np.array_equal(a, b)


def test_ascii_export_parses_as_text(tmp_path):
    path = tmp_path / "tet_ascii.stl"
    export_stl(_tet(), path, ascii_format=True)
    text = path.read_text()
    assert text.startswith("solid ") and text.rstrip().endswith("endsolid paramhand")
    assert text.count("facet normal") == 4


def test_import_rejects_ascii():
    buf = io.BytesIO(b"solid thing\nendsolid thing\n" + b" " * 200)
    with pytest.raises(GeometryError):
        import_stl(buf)


def test_file_count_must_match_payload():
    blob = bytearray(stl_bytes(_tet(), strict=False))
    blob[80:84] = (99).to_bytes(4, "little")  # lie about the count
    with pytest.raises(GeometryError):
        import_stl(io.BytesIO(bytes(blob)))


# ─────────────────────────────── print constraint ───────────────────────────────


def test_min_required_angle_matches_formula_exactly():
    rep = check_print_constraint(H.preset("human"))
    assert rep.min_required_angle == math.atan2(1.7, 3.0)


def test_vertical_and_default_curvature_pass():
    hand = H.preset("human")
    assert check_print_constraint(replace(hand, theta_c=0.60)).ok
    assert check_print_constraint(replace(hand, theta_c=math.pi / 2)).ok


def test_shallow_curvature_fails_on_angle_not_features():
    rep = check_print_constraint(replace(H.preset("human"), theta_c=0.30))
    assert not rep.ok
    assert rep.min_required_angle == pytest.approx(0.515549, abs=1e-5)
    assert all(f.ok for f in rep.features)  # spans widen as the angle shallows


def test_feature_layer_span_is_thickness_over_cosine():
    hand = H.preset("human")
    rep = check_print_constraint(hand, layer_height=0.2)
    lig = next(f for f in rep.features if f.name.endswith("ligament"))
    assert lig.thickness == hand.ligament.t_lig
    assert lig.layer_span == pytest.approx(hand.ligament.t_lig / math.cos(hand.theta_c), rel=1e-12)
    upright = check_print_constraint(replace(hand, theta_c=math.pi / 2))
    assert math.isinf(upright.features[0].layer_span)


def test_too_thick_layer_fails_features():
    rep = check_print_constraint(H.preset("human"), layer_height=1.0)
    assert not rep.ok
    assert any(not f.ok for f in rep.features)
    assert "FAIL" in rep.summary()


# ─────────────────────────────── solid construction ───────────────────────────────


def test_rectangular_shaft_volume_within_one_percent():
    m = bone_shaft_mesh(20.0, 8.0, 8.0)
    assert m.is_watertight() and m.component_count() == 1
    assert abs(m.volume() - 1280.0) / 1280.0 < 0.01
    assert np.allclose(m.extents(), [8.0, 20.0, 8.0], atol=0.05)


def test_minimal_legal_finger_builds_sound():
    m = build_finger_mesh(_tiny_finger(), LIG, PUL, H.min_print_angle(PUL))
    assert m.n_triangles > 0
    assert m.is_watertight()
    assert m.component_count() == 1
    assert m.degenerate_count() == 0


def test_doubling_width_doubles_lateral_extent():
    a = build_finger_mesh(_mid_finger(), LIG, PUL, 0.6)
    b = build_finger_mesh(_mid_finger(w=16.0), LIG, PUL, 0.6)
    # exact by design; vertices are quantized to float32 for the STL contract
    assert b.extents()[2] / a.extents()[2] == pytest.approx(2.0, rel=1e-6)


def test_volume_grows_with_bone_length():
    a = build_finger_mesh(_mid_finger(), LIG, PUL, 0.6)
    b = build_finger_mesh(_mid_finger(l_prox=24.0), LIG, PUL, 0.6)
    assert b.volume() > a.volume()


def test_finger_mesh_is_deterministic():
    a = build_finger_mesh(_mid_finger(), LIG, PUL, 0.6)
    b = build_finger_mesh(_mid_finger(), LIG, PUL, 0.6)
    assert stl_bytes(a) == stl_bytes(b)


def test_guide_pushed_into_joint_gap_names_the_bones():
    hand = H.preset("human")
    idx = hand.finger("index")
    bad = replace(idx, placement=replace(idx.placement, l_2=-11.0))
    with pytest.raises(GeometryError, match="'metacarpal' and 'proximal'"):
        build_finger_mesh(bad, hand.ligament, hand.pulley, hand.theta_c)


def test_mildly_negative_offset_clamps_quietly():
    f = _mid_finger()
    shifted = replace(f, placement=replace(f.placement, l_1=40.0))  # runs off the far end
    m = build_finger_mesh(shifted, LIG, PUL, 0.6)
    assert m.is_watertight() and m.component_count() == 1


# ─────────────────────────────── hand assembly ───────────────────────────────


def _pair_hand(gap_z: float) -> H.HandSpec:
    a = _mid_finger(name="a")
    b = _mid_finger(name="b", origin=(0.0, 0.0, gap_z))
    return H.HandSpec(fingers=(a, b), pulley=PUL, ligament=LIG, theta_c=0.6)


def test_two_fingers_bridge_into_one_component():
    m = build_hand_mesh(_pair_hand(30.0))
    assert m.is_watertight()
    assert m.component_count() == 1


def test_hand_mesh_is_byte_deterministic():
    a = stl_bytes(build_hand_mesh(_pair_hand(30.0)))
    b = stl_bytes(build_hand_mesh(_pair_hand(30.0)))
    assert a == b


def test_coincident_fingers_report_collision():
    with pytest.raises(GeometryError, match="'a' and 'b' collide"):
        build_hand_mesh(_pair_hand(0.0))


def test_palm_cannot_reach_a_lifted_finger():
    a = _mid_finger(name="a")
    b = _mid_finger(name="b", origin=(40.0, 0.0, 30.0))
    hs = H.HandSpec(fingers=(a, b), pulley=PUL, ligament=LIG, theta_c=0.6)
    with pytest.raises(GeometryError, match="palm slab cannot bridge"):
        build_hand_mesh(hs)


@settings(max_examples=5, deadline=None)
@given(
    scale=st.floats(1.0, 3.0),
    stretch=st.floats(1.0, 2.0),
)
def test_random_legal_fingers_build_watertight(scale, stretch):
    f = _tiny_finger(
        l_meta=(D_MIN / 2 + PUL.l_p) * scale * stretch,
        l_prox=(D_MIN + 2 * PUL.l_p) * scale * stretch,
        l_inte=(D_MIN + 2 * PUL.l_p) * scale,
        l_dist=D_MIN * scale,
        w=D_MIN * scale,
        d_mcp=D_MIN * scale,
        d_pip=D_MIN * scale,
        d_dip=D_MIN * scale,
    )
    m = build_finger_mesh(f, LIG, PUL, 0.6)
    assert m.is_watertight()
    assert m.component_count() == 1
