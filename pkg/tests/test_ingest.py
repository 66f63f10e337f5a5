import numpy as np
import pytest
from hypothesis import given, strategies as st

from wealthmap.errors import AllMissingColumn, DimensionMismatch, MalformedHeader, UnknownCluster
from wealthmap.geo import ClusterSite, GeoPoint, Urbanity
from wealthmap.ingest import (
    FeatureMatrix,
    PoiRecord,
    SocialRecord,
    assemble_features,
    column_means,
    impute_missing,
    read_pois,
    read_raster,
    read_social,
    write_pois,
    write_raster,
    write_social,
)
from wealthmap.raster import RasterGrid

NODATA = -9999.0


def small_grid(rng, n=12):
    vals = rng.normal(5, 2, (n, n))
    vals[rng.random(vals.shape) < 0.1] = NODATA
    return RasterGrid(14.6, 121.0, 0.005, n, n, NODATA, vals)


def test_raster_round_trip(tmp_path, rng):
    grid = small_grid(rng)
    path = tmp_path / "g.asc"
    write_raster(path, grid)
    assert read_raster(path) == grid


def test_raster_center_registration(tmp_path):
    path = tmp_path / "c.asc"
    path.write_text("ncols 2\nnrows 2\nxllcenter 10.0\nyllcenter 20.0\ncellsize 1.0\nNODATA_value -1\n1 2\n3 -1\n")
    g = read_raster(path)
    assert (g.origin_lat_deg, g.origin_lon_deg) == (21.0, 10.0)
    assert g.values.tolist() == [[1, 2], [3, -1]]


def test_raster_body_size_mismatch(tmp_path):
    path = tmp_path / "bad.asc"
    path.write_text("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n4 5\n")
    with pytest.raises(DimensionMismatch):
        read_raster(path)


def test_raster_missing_header(tmp_path):
    path = tmp_path / "bad.asc"
    path.write_text("ncols 3\nnrows 1\ncellsize 1\n1 2 3\n")
    with pytest.raises(MalformedHeader):
        read_raster(path)


def test_poi_and_social_round_trip(tmp_path):
    pois = [PoiRecord("public_school", GeoPoint(1.0, 2.0), {"has_water": 1.0}),
            PoiRecord("bank", GeoPoint(1.5, 2.5))]
    write_pois(tmp_path / "p.csv", pois)
    assert read_pois(tmp_path / "p.csv") == pois
    social = [SocialRecord("A", 200, 50, 40, 10, 30, 5, 20)]
    write_social(tmp_path / "s.csv", social)
    assert read_social(tmp_path / "s.csv") == social


def one_cluster():
    return [ClusterSite("A", GeoPoint(14.6, 121.0), Urbanity.URBAN)]


def test_social_share():
    m = assemble_features(one_cluster(), {}, [], [SocialRecord("A", 200, users_4g=50)])
    assert m.column("sm_share_4g")[0] == 0.25
    assert m.column("sm_total_users")[0] == 200


def test_zero_poi_count_is_zero_not_missing():
    pois = [PoiRecord("bank", GeoPoint(20.0, 100.0)), PoiRecord("school", GeoPoint(14.6001, 121.0))]
    m = assemble_features(one_cluster(), {}, pois, [])
    assert m.column("poi_bank_count")[0] == 0.0
    assert m.column("poi_school_count")[0] == 1.0


def test_poi_attribute_share_and_missing():
    c = one_cluster()
    pois = [PoiRecord("public_school", GeoPoint(14.6001, 121.0), {"has_water": 1.0}),
            PoiRecord("public_school", GeoPoint(14.6002, 121.0), {"has_water": 0.0}),
            PoiRecord("public_school", GeoPoint(14.6003, 121.0), {"has_water": 1.0}),
            PoiRecord("public_school", GeoPoint(14.6004, 121.0), {"has_water": 1.0})]
    m = assemble_features(c, {}, pois, [])
    assert m.column("poi_public_school_share_has_water")[0] == 0.75
    far = [PoiRecord("public_school", GeoPoint(30.0, 100.0), {"has_water": 1.0})]
    m = assemble_features(c, {}, far, [])
    assert m.column("poi_public_school_count")[0] == 0.0
    assert np.isnan(m.column("poi_public_school_share_has_water")[0])


def test_missing_social_is_nan():
    clusters = one_cluster() + [ClusterSite("B", GeoPoint(10, 120), Urbanity.RURAL)]
    m = assemble_features(clusters, {}, [], [SocialRecord("A", 10, users_wifi=5)])
    assert np.isnan(m.column("sm_share_wifi")[1])


def test_unknown_cluster_in_social():
    with pytest.raises(UnknownCluster):
        assemble_features(one_cluster(), {}, [], [SocialRecord("Z", 10)])


def test_imputation_hand_case():
    m = FeatureMatrix(["a", "b", "c"], ["x"], ["SM"], np.array([[1.0], [np.nan], [3.0]]))
    assert impute_missing(m).values[:, 0].tolist() == [1.0, 2.0, 3.0]


def test_all_missing_column():
    with pytest.raises(AllMissingColumn):
        column_means(np.array([[1.0, np.nan], [2.0, np.nan]]), ["ok", "empty"])


def test_group_tags_and_order(rng):
    grid = small_grid(rng)
    clusters = [ClusterSite("A", GeoPoint(14.57, 121.03), Urbanity.URBAN)]
    m = assemble_features(clusters, {"ntl": grid, "lst": grid}, [PoiRecord("bank", GeoPoint(14.57, 121.03))],
                          [SocialRecord("A", 10)])
    assert m.groups == ["SM"] * 7 + ["RS"] * 12 + ["POI"]
    assert m.columns[7] == "lst_mean" and m.columns[13] == "ntl_mean"


def test_group_split_concat_identity(small_scene):
    m = assemble_features(small_scene.clusters, small_scene.rasters, small_scene.pois, small_scene.social)
    parts = [m.select_groups([g]) for g in ("SM", "RS", "POI")]
    assert FeatureMatrix.concat(parts).equals(m)


def test_feature_csv_round_trip(tmp_path, small_scene):
    m = assemble_features(small_scene.clusters, small_scene.rasters, small_scene.pois, small_scene.social)
    m.to_csv(tmp_path / "f.csv")
    assert FeatureMatrix.from_csv(tmp_path / "f.csv").equals(m)


@given(st.permutations(range(30)))
def test_poi_order_invariance(perm):
    rng = np.random.default_rng(0)
    clusters = [ClusterSite(f"C{i}", GeoPoint(14.0 + 0.05 * i, 121.0), Urbanity.RURAL) for i in range(5)]
    pois = [PoiRecord(str(rng.choice(["bank", "public_school"])),
                      GeoPoint(14.0 + rng.uniform(0, 0.25), 121.0 + rng.uniform(-0.03, 0.03)),
                      {"has_water": float(rng.random() < 0.5)} if i % 2 else {})
            for i in range(30)]
    a = assemble_features(clusters, {}, pois, [])
    b = assemble_features(clusters, {}, [pois[i] for i in perm], [])
    assert a.equals(b)
    assert np.array_equal(a.values, b.values, equal_nan=True)


def test_constant_raster_features():
    grid = RasterGrid(14.7, 120.9, 0.01, 25, 25, NODATA, np.full((25, 25), 5.0))
    clusters = [ClusterSite("A", GeoPoint(14.6, 121.0), Urbanity.URBAN),
                ClusterSite("B", GeoPoint(14.55, 121.05), Urbanity.RURAL)]
    m = assemble_features(clusters, {"ntl": grid}, [], [])
    assert m.column("ntl_mean").tolist() == [5.0, 5.0]
    assert m.column("ntl_variance").tolist() == [0.0, 0.0]


def test_nodata_cell_from_file_excluded(tmp_path):
    from wealthmap.raster import zonal_statistics

    path = tmp_path / "n.asc"
    path.write_text("ncols 2\nnrows 2\nxllcorner 121.0\nyllcorner 14.0\ncellsize 0.001\n"
                    "NODATA_value -9999\n1 2\n-9999 4\n")
    grid = read_raster(path)
    s = zonal_statistics(grid, GeoPoint(14.001, 121.001), 1000)
    assert s.count == 3 and s.mean == pytest.approx(7 / 3)


def test_impute_without_missing_is_identity(rng):
    m = FeatureMatrix(["a", "b"], ["x", "y"], ["SM", "POI"], rng.normal(size=(2, 2)))
    assert impute_missing(m).equals(m)
