import numpy as np
import pytest

from valveseg.annulus import (AnnulusDefinition, fit_annulus, read_annulus_json,
                              signed_height, write_annulus_json)
from valveseg.errors import AnnulusFitError


def circle_points(n=8, radius=15.0, center=(0.0, 0.0, 0.0), seed=None):
    theta = np.linspace(0, 2 * np.pi, n + 1)[:-1]
    pts = np.stack([center[0] + radius * np.cos(theta),
                    center[1] + radius * np.sin(theta),
                    np.full_like(theta, center[2])], axis=1)
    if seed is not None:
        rng = np.random.default_rng(seed)
        pts += rng.normal(0, 0.05, pts.shape)
    return pts


def test_circle_fit():
    defn = AnnulusDefinition(points=circle_points(8, 15.0), probe_dir=(0, 0, 1))
    model = fit_annulus(defn)
    assert np.linalg.norm(model.centroid - [0, 0, 0]) < 0.1
    assert np.max(np.abs(model.plane_normal - [0, 0, 1])) < 1e-6
    radii = np.linalg.norm(model.samples - model.centroid, axis=1)
    assert np.max(np.abs(radii - 15.0)) < 0.15


def test_too_few_points():
    with pytest.raises(AnnulusFitError, match="too few points"):
        AnnulusDefinition(points=circle_points(5))


def test_collinear_points_rejected():
    pts = np.stack([np.arange(6, dtype=float), np.zeros(6), np.zeros(6)], axis=1)
    with pytest.raises(AnnulusFitError, match="collinear"):
        AnnulusDefinition(points=pts)


def test_close_points_rejected():
    pts = circle_points(8)
    pts[3] = pts[2] + [0.01, 0, 0]
    with pytest.raises(AnnulusFitError, match="closer"):
        AnnulusDefinition(points=pts)


def brute_force_plane_normal(samples):
    centered = samples - samples.mean(axis=0)
    cov = np.zeros((3, 3))
    for p in centered:  # explicit accumulation, independent of the fit path
        cov += np.outer(p, p)
    vals, vecs = np.linalg.eigh(cov)
    return vecs[:, np.argmin(vals)]


def test_saddle_plane_matches_eigen_oracle():
    rng = np.random.default_rng(4)
    theta = np.linspace(0, 2 * np.pi, 11)[:-1]
    pts = np.stack([16 * np.cos(theta), 13 * np.sin(theta), 3.0 * np.sin(2 * theta)], axis=1)
    rot = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    if np.linalg.det(rot) < 0:
        rot[:, 0] = -rot[:, 0]
    pts = pts @ rot.T + [4.0, -2.0, 9.0]
    probe = rot @ np.array([0, 0, 1.0])
    model = fit_annulus(AnnulusDefinition(points=pts, probe_dir=probe))
    oracle = brute_force_plane_normal(model.samples)
    if oracle @ probe < 0:
        oracle = -oracle
    assert np.max(np.abs(model.plane_normal - oracle)) < 1e-6


def test_samples_uniform_arc_length():
    model = fit_annulus(AnnulusDefinition(points=circle_points(9, 14.0, seed=2)))
    closed = np.vstack([model.samples, model.samples[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    assert seg.max() / seg.min() < 1.05
    assert len(model.samples) == 100


def test_centroid_is_mean_of_samples():
    model = fit_annulus(AnnulusDefinition(points=circle_points(8, 12.0, seed=5)))
    assert np.allclose(model.centroid, model.samples.mean(axis=0))


def test_normal_points_toward_probe():
    pts = circle_points(8, 10.0)
    for probe in ([0, 0, 1], [0, 0, -1], [0.1, 0.1, 0.99]):
        model = fit_annulus(AnnulusDefinition(points=pts, probe_dir=probe))
        assert model.plane_normal @ (np.asarray(probe) / np.linalg.norm(probe)) > 0


def densify_closed_polyline(samples, per_segment=64):
    closed = np.vstack([samples, samples[:1]])
    t = np.linspace(0, 1, per_segment, endpoint=False)
    return np.concatenate([
        (1 - t)[:, None] * closed[i] + t[:, None] * closed[i + 1]
        for i in range(len(samples))])


def test_cyclic_rotation_invariance():
    # Same closed curve regardless of which point starts the ordering; the
    # resampling phase differs, so compare samples against the dense curve.
    pts = circle_points(10, 13.0, seed=8)
    base = fit_annulus(AnnulusDefinition(points=pts, probe_dir=(0, 0, 1)))
    rolled = fit_annulus(AnnulusDefinition(points=np.roll(pts, 3, axis=0), probe_dir=(0, 0, 1)))
    dense = densify_closed_polyline(base.samples)
    d = np.linalg.norm(rolled.samples[:, None, :] - dense[None, :, :], axis=2)
    # tolerance dominated by the chord sag of the dense polyline (~L^2 / 8R)
    assert d.min(axis=1).max() < 1e-2
    assert np.allclose(base.centroid, rolled.centroid, atol=1e-5)
    assert np.max(np.abs(base.plane_normal - rolled.plane_normal)) < 1e-6


def test_rigid_equivariance():
    rng = np.random.default_rng(17)
    pts = circle_points(8, 15.0, seed=3)
    rot = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    if np.linalg.det(rot) < 0:
        rot[:, 0] = -rot[:, 0]
    shift = np.array([5.0, -7.0, 2.0])
    m1 = fit_annulus(AnnulusDefinition(points=pts, probe_dir=(0, 0, 1)))
    m2 = fit_annulus(AnnulusDefinition(points=pts @ rot.T + shift, probe_dir=rot @ [0, 0, 1]))
    assert np.max(np.abs(m2.centroid - (rot @ m1.centroid + shift))) < 1e-6
    assert np.max(np.abs(m2.samples - (m1.samples @ rot.T + shift))) < 1e-6
    assert np.max(np.abs(m2.plane_normal - rot @ m1.plane_normal)) < 1e-6


def test_signed_height_on_plane_and_offset():
    model = fit_annulus(AnnulusDefinition(points=circle_points(8, 15.0), probe_dir=(0, 0, 1)))
    on_plane = model.centroid + 5.0 * np.array([1.0, 0, 0])
    assert abs(signed_height(on_plane, model)) < 1e-9
    assert signed_height(model.centroid + 3.0 * model.plane_normal, model) == pytest.approx(3.0)


def test_signed_height_reflection_antisymmetry():
    model = fit_annulus(AnnulusDefinition(points=circle_points(8, 15.0, seed=1), probe_dir=(0, 0, 1)))
    rng = np.random.default_rng(2)
    pts = rng.uniform(-20, 20, size=(50, 3))
    h = signed_height(pts, model)
    reflected = pts - 2.0 * h[:, None] * model.plane_normal
    assert np.max(np.abs(signed_height(reflected, model) + h)) < 1e-9


def test_json_round_trip(tmp_path):
    defn = AnnulusDefinition(points=circle_points(8, 11.0), probe_dir=(0, 0, 1))
    path = tmp_path / "ann.json"
    write_annulus_json(defn, path)
    back = read_annulus_json(path)
    assert np.allclose(back.points, defn.points)
    assert np.allclose(back.probe_dir, defn.probe_dir)


def test_json_bare_array(tmp_path):
    path = tmp_path / "bare.json"
    path.write_text('[{"x": 1, "y": 0, "z": 0}, {"x": 2, "y": 1, "z": 0}, {"x": 1.5, "y": 2, "z": 0},'
                    ' {"x": 0, "y": 2.5, "z": 0}, {"x": -1, "y": 1.5, "z": 0.2}, {"x": -0.5, "y": 0.2, "z": 0}]')
    back = read_annulus_json(path)
    assert back.points.shape == (6, 3)
    assert back.probe_dir is None
