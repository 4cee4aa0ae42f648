import numpy as np
import pytest

from dgles.errors import InvalidParameterError
from dgles.mesh import ChannelMeshSpec, build_mesh, solve_omega, stretched_planes, wall_distance


def test_planes_follow_tanh_law():
    omega, Ny = 1.7, 8
    y = stretched_planes(omega, Ny)
    j = np.arange(Ny + 1)
    expected = -np.tanh(omega * (1 - 2 * j / Ny)) / np.tanh(omega)
    assert np.abs(y - expected).max() < 1e-15
    assert y[0] == -1.0 and y[-1] == 1.0
    assert np.all(np.diff(y) > 0)


def test_planes_symmetric():
    y = stretched_planes(2.3, 16)
    assert np.array_equal(y, -y[::-1])


def test_small_omega_is_uniform():
    y = stretched_planes(1e-9, 4)
    assert np.abs(y - np.linspace(-1, 1, 5)).max() < 1e-15


def test_omega_solves_first_plane():
    omega = solve_omega(-0.9765, 16)
    assert stretched_planes(omega, 16)[1] == pytest.approx(-0.9765, abs=1e-13)
    spec = ChannelMeshSpec(2, 16, 2, 1.0, 1.0, y1_target=-0.9765)
    assert spec.omega == pytest.approx(omega)


def test_infeasible_first_plane():
    with pytest.raises(InvalidParameterError):
        solve_omega(-0.5, 16)


@pytest.mark.parametrize("periodic_y", [False, True])
def test_mesh_topology(periodic_y):
    spec = ChannelMeshSpec(3, 2, 2, 2.0, 1.0, omega=1.1, periodic_y=periodic_y)
    m = build_mesh(spec)
    n_hex = 3 * 2 * 2
    assert m.n_elements == 6 * n_hex
    assert np.all(m.volumes() > 0)
    assert m.volumes().sum() == pytest.approx(spec.volume, rel=1e-13)
    n_bfaces = 0 if periodic_y else 2 * 2 * 3 * 2
    assert len(m.bface_elem) == n_bfaces
    # every local face is used exactly once
    used = np.zeros((m.n_elements, 4), dtype=int)
    np.add.at(used, (m.face_elems[:, 0], m.face_local[:, 0]), 1)
    np.add.at(used, (m.face_elems[:, 1], m.face_local[:, 1]), 1)
    np.add.at(used, (m.bface_elem, m.bface_local), 1)
    assert np.all(used == 1)


def test_periodic_faces_coincide_after_shift():
    m = build_mesh(ChannelMeshSpec(2, 2, 3, 2.0, 1.5, omega=0.8))
    fL = m.face_vertices(m.face_elems[:, 0], m.face_local[:, 0])
    fR = m.face_vertices(m.face_elems[:, 1], m.face_local[:, 1])
    a = np.sort((fL + m.face_shift[:, None, :]).round(12).view("f8,f8,f8"), axis=1)
    b = np.sort(fR.round(12).view("f8,f8,f8"), axis=1)
    assert np.array_equal(a, b)
    assert m.face_periodic.sum() > 0


def test_wall_tags_and_hex_dims():
    spec = ChannelMeshSpec(2, 4, 2, 3.0, 2.0, omega=1.5)
    m = build_mesh(spec)
    v = m.face_vertices(m.bface_elem, m.bface_local)[:, :, 1]
    assert np.all(v == m.bface_tag[:, None])
    assert set(np.unique(m.bface_tag)) == {-1, 1}
    assert np.allclose(m.hex_dims[:, 0], 1.5) and np.allclose(m.hex_dims[:, 2], 1.0)
    assert set(np.round(m.hex_dims[:, 1], 12)) == set(np.round(np.diff(m.y_planes), 12))


def test_wall_distance():
    assert np.allclose(wall_distance(np.array([[0, -0.9, 0], [0, 0.25, 1]])), [0.1, 0.75])


def test_invalid_spec_lists_problems():
    with pytest.raises(InvalidParameterError) as exc:
        ChannelMeshSpec(0, 2, 2, -1.0, 1.0)
    assert "Nx" in str(exc.value) and "Lx" in str(exc.value)


def test_dump(tmp_path):
    m = build_mesh(ChannelMeshSpec(1, 1, 1, 1.0, 1.0, omega=0.5))
    p = tmp_path / "mesh.txt"
    m.dump(p)
    text = p.read_text()
    assert "# vertices 8" in text and "# tets 6" in text
