import numpy as np

from mmgzsl import plotting

PNG = b"\x89PNG\r\n\x1a\n"


def _histories():
    return {"translation": {"epoch": [0, 1, 2], "L_cyc": [3.0, 2.0, 1.5]},
            "synthesis": {"epoch": [0, 1, 2], "L_CVAE": [9.0, 5.0, 4.0], "L_CPC": [0, 0, 2.1]}}


def test_history_figure_is_a_png_and_byte_stable(tmp_path):
    a = plotting.plot_histories(_histories(), tmp_path / "a.png")
    b = plotting.plot_histories(_histories(), tmp_path / "sub" / "b.png")
    assert a.read_bytes().startswith(PNG)
    assert a.read_bytes() == b.read_bytes()
    assert b"matplotlib" not in a.read_bytes()


def test_ablation_figure_is_byte_stable(tmp_path):
    args = (["MM_GZSL", "MM_wCPC"], [93.5, 92.1], [1.0, 0.8])
    a = plotting.plot_ablation(*args, tmp_path / "a.png")
    b = plotting.plot_ablation(*args, tmp_path / "b.png")
    assert a.read_bytes() == b.read_bytes()


def test_pca_components_are_sign_fixed_and_orthonormal():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100, 4)) * [5.0, 2.0, 0.5, 0.1]
    mean, comps = plotting.pca_2d(x)
    np.testing.assert_allclose(mean, x.mean(axis=0))
    np.testing.assert_allclose(comps @ comps.T, np.eye(2), atol=1e-12)
    for row in comps:
        assert row[np.argmax(np.abs(row))] > 0
    _, flipped = plotting.pca_2d(-x)
    np.testing.assert_allclose(flipped, comps, atol=1e-12)


def test_feature_scatter_renders(tmp_path):
    rng = np.random.default_rng(1)
    real = rng.normal(size=(30, 5))
    path = plotting.plot_features(real, np.repeat([1, 2, 3], 10), rng.normal(size=(12, 5)),
                                  np.repeat([1, 2, 3, 4], 3), tmp_path / "f.png", unseen=[2, 4])
    assert path.read_bytes().startswith(PNG)
