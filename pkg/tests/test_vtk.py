"""Legacy-format VTK export and the matching reader."""

import numpy as np
import pytest

from meshcs import PointCloud
from meshcs.vtk import VtkFormatError, export_vtk, read_vtk


def cloud_2d(n=5, seed=70):
    return PointCloud(np.random.default_rng(seed).random((n, 2)))


def test_polydata_roundtrip_2d(tmp_path):
    path = tmp_path / "out.vtk"
    cloud = cloud_2d()
    vals = np.array([1.0, -2.0, 0.5, 1e-16, 33067.0])
    export_vtk(path, cloud, {"f": vals})
    back, fields = read_vtk(path)
    assert back.dim == 2                      # constant z column dropped again
    assert np.array_equal(back.coords, cloud.coords)
    assert set(fields) == {"f"}
    assert np.array_equal(fields["f"], vals)


def test_header_declares_polydata_and_vertices(tmp_path):
    path = tmp_path / "out.vtk"
    export_vtk(path, cloud_2d(3), {"f": np.arange(3.0)})
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert "DATASET POLYDATA" in text
    assert "POINTS 3 double" in text
    assert "VERTICES 3 6" in text
    assert "SCALARS f double 1" in text


def test_cells_switch_to_unstructured_grid(tmp_path):
    path = tmp_path / "out.vtk"
    cloud = cloud_2d(4)
    cells = np.array([[0, 1, 2], [1, 2, 3]])
    export_vtk(path, cloud, {"f": np.ones(4)}, cells=cells)
    text = path.read_text()
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert "CELLS 2 8" in text
    assert "CELL_TYPES 2" in text
    assert "VERTICES" not in text
    back, fields = read_vtk(path)
    assert np.array_equal(back.coords, cloud.coords)
    assert np.array_equal(fields["f"], np.ones(4))


def test_quad_cells_are_typed_by_dimension(tmp_path):
    quad = np.array([[0, 1, 2, 3]])
    path2 = tmp_path / "flat.vtk"
    export_vtk(path2, cloud_2d(4), {}, cells=quad)
    assert "CELL_TYPES 1\n9" in path2.read_text()     # planar quad
    path3 = tmp_path / "solid.vtk"
    cloud3 = PointCloud(np.random.default_rng(72).random((4, 3)))
    export_vtk(path3, cloud3, {}, cells=quad)
    assert "CELL_TYPES 1\n10" in path3.read_text()    # tetrahedron


def test_3d_cloud_keeps_its_z(tmp_path):
    path = tmp_path / "out.vtk"
    cloud = PointCloud(np.random.default_rng(71).random((6, 3)))
    export_vtk(path, cloud, {"s": np.arange(6.0)})
    back, _ = read_vtk(path)
    assert back.dim == 3
    assert np.array_equal(back.coords, cloud.coords)


def test_1d_cloud_pads_then_recovers(tmp_path):
    path = tmp_path / "out.vtk"
    cloud = PointCloud(np.array([[0.1], [0.5], [0.9]]))
    export_vtk(path, cloud, {"s": np.array([5.0, 6.0, 7.0])})
    back, fields = read_vtk(path)
    assert back.dim == 1
    assert np.array_equal(back.coords, cloud.coords)
    assert np.array_equal(fields["s"], [5.0, 6.0, 7.0])


def test_multiple_fields_keep_names_and_values(tmp_path):
    path = tmp_path / "out.vtk"
    cloud = cloud_2d(4)
    fields_in = {"recon": np.arange(4.0), "truth": np.arange(4.0) * 2.0}
    export_vtk(path, cloud, fields_in)
    _, fields = read_vtk(path)
    assert set(fields) == {"recon", "truth"}
    for name, vals in fields_in.items():
        assert np.array_equal(fields[name], vals)


def test_export_rejects_wrong_field_length(tmp_path):
    path = tmp_path / "out.vtk"
    with pytest.raises(ValueError):
        export_vtk(path, cloud_2d(5), {"f": np.ones(4)})


def test_reader_rejects_garbage(tmp_path):
    path = tmp_path / "bad.vtk"
    path.write_text("not a vtk file\n")
    with pytest.raises(VtkFormatError):
        read_vtk(path)


def test_reader_rejects_truncated_points(tmp_path):
    path = tmp_path / "bad.vtk"
    export_vtk(path, cloud_2d(5), {"f": np.ones(5)})
    lines = path.read_text().splitlines()
    cut = next(i for i, ln in enumerate(lines) if ln.startswith("POINTS")) + 3
    path.write_text("\n".join(lines[:cut]) + "\n")
    with pytest.raises(VtkFormatError):
        read_vtk(path)
