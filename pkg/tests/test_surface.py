import numpy as np
import pytest

from engine.errors import HitsSingularity, NotAPermutation, ParseError
from engine.surface.flow import distance_to_cone_points, straight_flow, translate
from engine.surface.origami import commutator, load_origami
from models.surface import Direction, SurfacePoint


def test_one_square_torus():
    surface = load_origami("name=torus\nsquares=1\nh=1\nv=1\n")
    assert surface.genus == 1
    assert surface.cone_points == ()
    assert surface.is_torus


def test_l_shaped_origami_has_one_cone_point(l3):
    assert l3.n_squares == 3
    assert l3.genus == 2
    assert len(l3.cone_points) == 1
    assert l3.cone_points[0].k == 2
    assert l3.cone_points[0].angle == pytest.approx(6.0 * np.pi)


def test_commutator_cycles_cover_all_corners(l3):
    # one vertex: the commutator is a single 3-cycle
    perm = commutator(l3.h_perm, l3.v_perm)
    assert sorted(perm) == [0, 1, 2]
    assert all(perm[i] != i for i in range(3))


def test_duplicate_image_is_not_a_permutation():
    with pytest.raises(NotAPermutation):
        load_origami("squares=3\nh=2,2,3\nv=1,2,3\n")


def test_comments_and_blank_lines_are_ignored():
    surface = load_origami("# L\n\nname=L3  # shape\nsquares=3\nh=2,1,3\nv=3,2,1\n")
    assert surface.name == 'L3'
    assert surface.genus == 2


@pytest.mark.parametrize('text', [
    "squares=1\nh=1\n",
    "squares=2\nh=2,1\nv=1\n",
    "squares=x\nh=1\nv=1\n",
    "squares=1\nh=1\nh=1\nv=1\n",
    "squares=1\nh 1\nv=1\n",
])
def test_malformed_spec(text):
    with pytest.raises(ParseError):
        load_origami(text)


def test_disconnected_squares_are_rejected():
    with pytest.raises(ParseError):
        load_origami("squares=2\nh=1,2\nv=1,2\n")


def test_flow_on_torus(torus):
    p = straight_flow(torus, Direction((1.0, 0.0)), SurfacePoint(0, 0.25, 0.5), 0.5)
    assert p.square == 0
    assert p.x == pytest.approx(0.75)
    assert p.y == pytest.approx(0.5)


def test_flow_crosses_into_right_neighbour(l3):
    p = straight_flow(l3, Direction((1.0, 0.0)), SurfacePoint(0, 0.9, 0.5), 0.2)
    assert p.square == l3.h_perm[0] == 1
    assert p.x == pytest.approx(0.1)
    assert p.y == pytest.approx(0.5)


def test_zero_time_leaves_point_unchanged(l3, golden):
    start = SurfacePoint(2, 0.3, 0.7)
    assert straight_flow(l3, golden, start, 0.0) == start


def test_backward_flow_inverts_forward_flow(l3, golden):
    start = SurfacePoint(1, 0.37, 0.41)
    there = straight_flow(l3, golden, start, 1.3)
    back = straight_flow(l3, golden, there, -1.3)
    assert back.square == start.square
    assert back.x == pytest.approx(start.x, abs=1e-12)
    assert back.y == pytest.approx(start.y, abs=1e-12)


def test_flow_is_additive_in_time(l3, golden):
    start = SurfacePoint(1, 0.37, 0.41)
    direct = straight_flow(l3, golden, start, 1.3)
    stepped = straight_flow(l3, golden, straight_flow(l3, golden, start, 0.7), 0.6)
    assert stepped.square == direct.square
    assert stepped.x == pytest.approx(direct.x, abs=1e-12)
    assert stepped.y == pytest.approx(direct.y, abs=1e-12)


def test_flow_into_cone_point_raises(l3):
    with pytest.raises(HitsSingularity):
        straight_flow(l3, Direction((1.0, 1.0)), SurfacePoint(0, 0.5, 0.5), 0.5)


def test_translate_wraps_across_edges(l3):
    sq, x, y = translate(l3, np.array([0, 0]), np.array([0.9, 0.5]), np.array([0.5, 0.95]),
                         np.array([0.2, 0.0]), np.array([0.0, 0.1]))
    assert list(sq) == [l3.h_perm[0], l3.v_perm[0]]
    np.testing.assert_allclose(x, [0.1, 0.5])
    np.testing.assert_allclose(y, [0.5, 0.05])


def test_distance_to_cone_points(torus, l3):
    assert np.all(np.isinf(distance_to_cone_points(torus, np.array([0]), np.array([0.0]), np.array([0.0]))))
    d = distance_to_cone_points(l3, np.array([0, 1]), np.array([0.5, 0.0]), np.array([0.5, 0.0]))
    np.testing.assert_allclose(d, [np.sqrt(0.5), 0.0])
