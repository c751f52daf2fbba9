import numpy as np
import pytest

from vipelab.errors import DegenerateProjectionWarning, DimensionError
from vipelab.genlab import (DEFAULT_ALPHAS, embedding_viz_export, interpolate, interpolation_codes, pca_2d,
                            perturb, random_direction, unit_direction)
from vipelab.nn import Mlp, MlpSpec


@pytest.fixture(scope="module")
def decoder():
    return Mlp(MlpSpec(6, 51, 16, 1, 0.1), np.random.default_rng(0))


def test_default_schedule():
    assert DEFAULT_ALPHAS == (0.2, 0.3, 0.4, 0.5)


def test_alpha_zero_is_plain_decode(decoder):
    e = np.random.default_rng(1).normal(size=6)
    out = perturb(decoder, e, np.ones(6), [0.0])
    np.testing.assert_array_equal(out[0], decoder(e[None]).reshape(17, 3))


def test_zero_direction_gives_identical_decodes(decoder):
    e = np.random.default_rng(2).normal(size=6)
    outs = perturb(decoder, e, np.zeros(6))
    assert len(outs) == 4
    assert all(o.tobytes() == outs[0].tobytes() for o in outs)


def test_perturb_uses_unit_direction(decoder):
    e = np.zeros(6)
    z = np.arange(6.0)
    a = perturb(decoder, e, z, [0.3])[0]
    b = perturb(decoder, e, 10 * z, [0.3])[0]
    np.testing.assert_allclose(a, b, atol=1e-6)
    assert np.linalg.norm(unit_direction(z)) == pytest.approx(1.0)
    assert np.linalg.norm(random_direction(np.random.default_rng(0), 32)) == pytest.approx(1.0)


def test_dimension_errors(decoder):
    with pytest.raises(DimensionError):
        perturb(decoder, np.zeros(5), np.zeros(5))
    with pytest.raises(DimensionError):
        interpolate(decoder, np.zeros(6), np.zeros(7))


def test_interpolation_endpoints_and_linearity(decoder):
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, 6))
    codes = interpolation_codes(a, b, 5)
    np.testing.assert_array_equal(codes[0], a)
    np.testing.assert_array_equal(codes[-1], b)
    for t, c in enumerate(codes):
        assert np.linalg.norm(c - b) == pytest.approx((1 - t / 4) * np.linalg.norm(a - b), abs=1e-12)
    path = interpolate(decoder, a, b, 2)
    np.testing.assert_array_equal(path[0], decoder(a[None].astype(np.float32)).reshape(17, 3))
    np.testing.assert_array_equal(path[1], decoder(b[None].astype(np.float32)).reshape(17, 3))
    assert all(p.shape == (17, 3) for p in interpolate(decoder, a, b, 5))
    with pytest.raises(ValueError):
        interpolation_codes(a, b, 1)


def pca_oracle(x):
    c = x - x.mean(0)
    w, v = np.linalg.eigh(c.T @ c)
    v = v[:, ::-1][:, :2]
    return c @ v, v.T


def test_pca_matches_eigendecomposition():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(200, 6)) @ rng.normal(size=(6, 6))
    coords, comps, degenerate = pca_2d(x)
    ref_coords, ref_comps = pca_oracle(x)
    assert not degenerate
    signs = np.sign((comps * ref_comps).sum(1))
    np.testing.assert_allclose(comps * signs[:, None], ref_comps, atol=1e-9)
    centered = x - x.mean(0)
    recon_err = np.linalg.norm(centered - coords @ comps)
    ref_err = np.linalg.norm(centered - ref_coords @ ref_comps)
    assert recon_err == pytest.approx(ref_err, abs=1e-9)
    assert coords[:, 0].var() >= coords[:, 1].var()


def test_pca_recovers_2d_input():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(50, 2)) * [3.0, 1.0]
    x -= x.mean(0)
    coords, _, _ = pca_2d(x)
    # same point cloud up to an orthogonal transform: pairwise distances agree
    d1 = np.linalg.norm(x[:, None] - x[None], axis=-1)
    d2 = np.linalg.norm(coords[:, None] - coords[None], axis=-1)
    np.testing.assert_allclose(d1, d2, atol=1e-9)


def test_export_csv(tmp_path):
    x = np.random.default_rng(6).normal(size=(5, 4))
    coords = embedding_viz_export(x, list("abcde"), tmp_path / "v.csv")
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "x,y,label" and len(lines) == 6
    assert lines[3].endswith(",c")
    assert float(lines[1].split(",")[0]) == coords[0, 0]


def test_export_degenerate(tmp_path):
    with pytest.warns(DegenerateProjectionWarning):
        coords = embedding_viz_export(np.ones((4, 3)), range(4), tmp_path / "d.csv")
    assert not coords.any()
    with pytest.raises(ValueError):
        pca_2d(np.ones((1, 3)))
    with pytest.raises(DimensionError):
        embedding_viz_export(np.eye(3), [1, 2], tmp_path / "x.csv")
