import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmgzsl.dataio import (FeatureSet, PairedDataset, SplitSpec, SyntheticSpec, export_csv,
                           generate_synthetic, import_csv, load_features, save_features, split)
from mmgzsl.errors import ConfigError, DataError, FeatureFormatError, ShapeError


def test_generator_counts_and_determinism():
    spec = SyntheticSpec(dim=5, samples_per_class=7, seed=4)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert len(a) == 35
    np.testing.assert_array_equal(a.mri.features, b.mri.features)
    np.testing.assert_array_equal(a.dp.features, b.dp.features)
    assert np.bincount(a.mri.classes).tolist() == [0, 7, 7, 7, 7, 7]
    assert a.mri.class_range == (1, 5)


def test_class_centers_are_ordered_along_the_axis():
    data = generate_synthetic(SyntheticSpec(dim=8, samples_per_class=400, seed=1))
    axis = data.meta["class_axis"]
    proj = [data.mri.features[data.mri.classes == c].mean(axis=0) @ axis for c in range(1, 6)]
    assert np.all(np.diff(proj) > 0)
    np.testing.assert_allclose(np.diff(proj), 3.0, atol=0.2)


def test_dp_is_the_planted_affine_image_without_noise():
    data = generate_synthetic(SyntheticSpec(dim=4, dp_dim=6, samples_per_class=5, seed=2))
    a, b = data.meta["map_matrix"], data.meta["map_offset"]
    assert a.shape == (6, 4)
    np.testing.assert_allclose(data.dp.features, data.mri.features @ a.T + b, atol=1e-12)
    assert data.mri.features.min() >= 0.5 - 1e-12
    assert data.dp.features.min() >= 0.5 - 1e-12


def test_planted_map_is_well_conditioned():
    a = generate_synthetic(SyntheticSpec(dim=6, samples_per_class=2, seed=9)).meta["map_matrix"]
    np.testing.assert_allclose(np.linalg.svd(a, compute_uv=False), np.linspace(1.5, 0.5, 6))


def test_stddev_slope_widens_higher_classes():
    data = generate_synthetic(SyntheticSpec(dim=3, samples_per_class=3000, stddev_slope=1.0))
    x, c = data.mri.features, data.mri.classes
    widths = [x[c == k].std(axis=0).mean() for k in (1, 3)]
    np.testing.assert_allclose(widths, [1.0, 3.0], rtol=0.05)


@pytest.mark.parametrize("field,value", [("dim", 0), ("samples_per_class", 0),
                                         ("within_class_stddev", -1.0)])
def test_generator_validation(field, value):
    with pytest.raises(ConfigError, match=field):
        generate_synthetic(SyntheticSpec(**{field: value}))


def test_featureset_checks_lengths_and_range():
    with pytest.raises(ShapeError):
        FeatureSet(np.zeros((2, 3)), [1], ["a", "b"])
    with pytest.raises(DataError):
        FeatureSet(np.zeros((1, 3)), [7], ["a"], class_range=(1, 5))


def test_paired_dataset_requires_aligned_ids(small_data):
    dp = small_data.dp.take(np.arange(len(small_data))[::-1])
    with pytest.raises(DataError):
        PairedDataset(small_data.mri, dp)


def test_split_is_stratified_and_keeps_unseen_out(small_data):
    spl = split(small_data, SplitSpec([1, 3, 5], [2, 4], 0.8, seed=0))
    c = small_data.mri.classes
    assert sorted(np.bincount(c[spl.train]).tolist()) == [0, 0, 0, 8, 8, 8]
    assert np.bincount(c[spl.test], minlength=6).tolist() == [0, 2, 0, 2, 0, 2]
    assert set(c[spl.unseen]) == {2, 4} and len(spl.unseen) == 20
    assert not set(spl.train) & set(spl.test)


def test_split_depends_on_seed(small_data):
    a = split(small_data, SplitSpec([1, 3, 5], [2, 4], seed=0))
    b = split(small_data, SplitSpec([1, 3, 5], [2, 4], seed=1))
    assert not np.array_equal(a.train, b.train)


@pytest.mark.parametrize("spec", [SplitSpec([1, 2, 3], [3, 4, 5]),
                                  SplitSpec([1, 3, 5], [2, 4], train_fraction=1.0),
                                  SplitSpec([1, 3], [2, 4])])
def test_split_validation(small_data, spec):
    with pytest.raises(ConfigError):
        split(small_data, spec)


def test_feature_file_round_trip(tmp_path, small_data):
    meta, feat = save_features(small_data.mri, tmp_path / "mri")
    assert meta.suffix == ".json" and feat.suffix == ".feat"
    back = load_features(tmp_path / "mri.feat")
    np.testing.assert_array_equal(back.features, small_data.mri.features.astype(np.float32))
    np.testing.assert_array_equal(back.classes, small_data.mri.classes)
    assert back.sample_ids == small_data.mri.sample_ids
    assert back.modality == "MRI" and back.class_range == (1, 5)


def test_record_layout_is_length_prefixed_little_endian(tmp_path):
    fs = FeatureSet(np.array([[1.5, -2.0]]), [3], ["ab"], "DP", (1, 5))
    _, feat = save_features(fs, tmp_path / "one")
    raw = feat.read_bytes()
    assert raw == (b"\x02\x00\x00\x00" + b"ab" + b"\x03\x00\x00\x00"
                   + np.array([1.5, -2.0], "<f4").tobytes())


def test_truncated_file_reports_row_and_offset(tmp_path, small_data):
    _, feat = save_features(small_data.mri.take(np.arange(3)), tmp_path / "x")
    raw = feat.read_bytes()
    record = len(raw) // 3
    feat.write_bytes(raw[:-5])
    with pytest.raises(FeatureFormatError) as info:
        load_features(feat)
    assert info.value.row == 2 and info.value.offset == 2 * record
    assert "row 2" in str(info.value)


def test_trailing_bytes_are_rejected(tmp_path, small_data):
    _, feat = save_features(small_data.mri.take(np.arange(2)), tmp_path / "x")
    feat.write_bytes(feat.read_bytes() + b"\x00\x00\x00")
    with pytest.raises(FeatureFormatError, match="trailing"):
        load_features(feat)


def test_header_dim_mismatch_is_detected(tmp_path, small_data):
    import json

    meta, _ = save_features(small_data.mri.take(np.arange(4)), tmp_path / "x")
    doc = json.loads(meta.read_text())
    doc["dim"] = 5
    meta.write_text(json.dumps(doc))
    with pytest.raises(FeatureFormatError):
        load_features(meta)


def test_out_of_range_class_in_payload(tmp_path):
    fs = FeatureSet(np.zeros((1, 2)), [9], ["z"], "MRI", (1, 9))
    meta, _ = save_features(fs, tmp_path / "x")
    meta.write_text(meta.read_text().replace("9", "5", 1))
    with pytest.raises(FeatureFormatError, match="outside declared range"):
        load_features(meta)


def test_csv_round_trip(tmp_path, small_data):
    path = export_csv(small_data.dp, tmp_path / "dp.csv")
    back = import_csv(path, modality="DP", class_range=(1, 5))
    np.testing.assert_array_equal(back.features, small_data.dp.features.astype(np.float32))
    assert back.sample_ids == small_data.dp.sample_ids


def test_csv_bad_row_is_named(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("sample_id,class,f0,f1\na,1,0.5,0.25\nb,2,0.5\n")
    with pytest.raises(FeatureFormatError, match="row 2"):
        import_csv(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**31 - 1),
       st.text(min_size=0, max_size=6))
def test_round_trip_property(tmp_path_factory, dim, n, seed, suffix):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, dim)).astype(np.float32).astype(np.float64)
    fs = FeatureSet(x, rng.integers(1, 6, n), [f"id{i}{suffix}" for i in range(n)], "MRI", (1, 5))
    base = tmp_path_factory.mktemp("rt") / "f"
    save_features(fs, base)
    back = load_features(base)
    np.testing.assert_array_equal(back.features, x)
    assert back.sample_ids == fs.sample_ids
