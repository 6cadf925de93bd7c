import json

import numpy as np
import pytest

from mbgs._validation import DataError
from mbgs.dataio import (
    GenotypeDataset,
    ParseError,
    SnpMap,
    Table,
    format_float,
    load_genotypes,
    load_kinship,
    load_map,
    load_phenotypes,
    write_genotypes,
    write_kinship,
    write_map,
    write_phenotypes,
    write_report,
)
from mbgs.mblanket import blanket_stability


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_small_csv(tmp_path):
    path = write(tmp_path, "g.csv", "id,a,b\ni1,0,1\ni2,2,1\ni3,1,0\n")
    ds = load_genotypes(path)
    assert (ds.n, ds.m) == (3, 2)
    assert ds.snp_ids == ["a", "b"]
    assert ds.individuals == ["i1", "i2", "i3"]
    np.testing.assert_array_equal(ds.X, [[0, 1], [2, 1], [1, 0]])
    assert ds.missing_mask.sum() == 0


@pytest.mark.parametrize("token", ["NA", "?", ""])
def test_missing_tokens(tmp_path, token):
    path = write(tmp_path, "g.csv", f"id,a,b\ni1,0,{token}\ni2,2,1\n")
    ds = load_genotypes(path)
    assert ds.missing_mask.sum() == 1
    assert np.isnan(ds.X[0, 1])


def test_short_row_reports_line(tmp_path):
    path = write(tmp_path, "g.csv", "id,a,b\ni1,0,1\ni2,2\n")
    with pytest.raises(ParseError, match=r"g\.csv:3: expected 3 fields, found 2"):
        load_genotypes(path)


def test_bad_token_named(tmp_path):
    path = write(tmp_path, "g.csv", "id,a,b\ni1,0,3\n")
    with pytest.raises(ParseError, match=r":2: invalid genotype token '3'"):
        load_genotypes(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="file not found"):
        load_genotypes(tmp_path / "absent.csv")


def test_raw_format(tmp_path):
    path = write(tmp_path, "g.raw", "#id a b\n# comment\ni1 0 NA\ni2  2 1\n")
    ds = load_genotypes(path, format="raw")
    assert ds.snp_ids == ["a", "b"]
    assert ds.missing_mask.sum() == 1
    with pytest.raises(ParseError, match="must start with '#'"):
        load_genotypes(write(tmp_path, "bad.raw", "id a b\ni1 0 1\n"), format="raw")


@pytest.mark.parametrize("fmt", ["csv", "raw"])
def test_genotype_round_trip(tmp_path, rng, fmt):
    X = rng.integers(0, 3, size=(7, 5)).astype(float)
    X[2, 3] = np.nan
    ds = GenotypeDataset([f"i{i}" for i in range(7)], [f"s{j}" for j in range(5)], X)
    write_genotypes(ds, tmp_path / "g", fmt)
    back = load_genotypes(tmp_path / "g", fmt)
    np.testing.assert_array_equal(back.X, X)
    assert back.snp_ids == ds.snp_ids and back.individuals == ds.individuals


def test_duplicate_individuals_rejected(tmp_path):
    with pytest.raises(ParseError, match="duplicate individual"):
        load_genotypes(write(tmp_path, "g.csv", "id,a\ni1,0\ni1,1\n"))


def test_map_distance(tmp_path):
    path = write(tmp_path, "m.csv", "snp_id,chromosome,position_cM\nx,1H,10.0\ny,1H,25.5\nz,2H,1\n")
    snp_map = load_map(path)
    assert snp_map.distance("x", "y") == pytest.approx(15.5)
    assert snp_map.distance("x", "z") == np.inf


def test_map_unknown_position(tmp_path):
    snp_map = load_map(write(tmp_path, "m.csv", "snp_id,chromosome,position_cM\nx,1,?\ny,1,2\n"))
    np.testing.assert_array_equal(snp_map.mapped, [False, True])


def test_map_duplicate_id_named(tmp_path):
    with pytest.raises(DataError, match="duplicate snp_id 'x'"):
        load_map(write(tmp_path, "m.csv", "snp_id,chromosome,position_cM\nx,1,1\nx,1,2\n"))


def test_map_negative_position(tmp_path):
    with pytest.raises(DataError, match="negative position"):
        load_map(write(tmp_path, "m.csv", "snp_id,chromosome,position_cM\nx,1,-1\n"))


def test_map_round_trip(tmp_path):
    snp_map = SnpMap(["a", "b", "c"], ["1", "1", "2"], [0.0, np.nan, 3.25])
    write_map(snp_map, tmp_path / "m.csv")
    back = load_map(tmp_path / "m.csv")
    assert back.snp_ids == snp_map.snp_ids
    np.testing.assert_array_equal(back.positions, snp_map.positions)


def test_map_subset_order(rng):
    snp_map = SnpMap(["a", "b", "c"], ["1", "1", "2"], [0.0, 1.0, 2.0])
    sub = snp_map.subset(["c", "a"])
    assert sub.snp_ids == ("c", "a")
    np.testing.assert_array_equal(sub.positions, [2.0, 0.0])
    with pytest.raises(DataError, match="'q' is not in the map"):
        snp_map.subset(["q"])


def test_phenotypes_reordered_and_matched(tmp_path):
    path = write(tmp_path, "p.csv", "id,value\nb,2.5\na,-1\n")
    np.testing.assert_array_equal(load_phenotypes(path, ["a", "b"]), [-1.0, 2.5])
    with pytest.raises(DataError, match="one-to-one"):
        load_phenotypes(path, ["a", "b", "c"])


def test_phenotype_round_trip_exact(tmp_path, rng):
    y = rng.standard_normal(6)
    ids = [f"i{i}" for i in range(6)]
    write_phenotypes(ids, y, tmp_path / "p.csv")
    np.testing.assert_array_equal(load_phenotypes(tmp_path / "p.csv", ids), y)


def test_kinship_round_trip(tmp_path):
    K = np.array([[1.0, 0.25], [0.25, 0.5]])
    write_kinship(K, ["a", "b"], tmp_path / "k.csv")
    ids, back = load_kinship(tmp_path / "k.csv")
    assert ids == ["a", "b"]
    np.testing.assert_allclose(back, K)


def test_dataset_validation():
    with pytest.raises(DataError, match="genotype codes"):
        GenotypeDataset(["a"], ["s"], [[3.0]])
    with pytest.raises(DataError, match="map does not cover"):
        GenotypeDataset(["a"], ["s"], [[1.0]], map=SnpMap(["t"], ["1"], [0.0]))


def test_format_float():
    assert format_float(0.0) == "0"
    assert format_float(1 / 3) == "0.333333"
    assert format_float(123456789.0) == "1.23457e+08"


def test_report_byte_identical(tmp_path):
    table = Table(("a", "b"), [{"a": 1, "b": 0.1 + 0.2}, {"a": 2, "b": None}], {"note": "x"})
    for fmt in ("csv", "json"):
        write_report(table, tmp_path / f"r1.{fmt}", fmt)
        write_report(table, tmp_path / f"r2.{fmt}", fmt)
        assert (tmp_path / f"r1.{fmt}").read_bytes() == (tmp_path / f"r2.{fmt}").read_bytes()
    assert (tmp_path / "r1.csv").read_text() == "a,b\n1,0.3\n2,\n"
    assert json.loads((tmp_path / "r1.json").read_text())["rows"][0]["b"] == 0.3


def test_empty_report_header_only(tmp_path):
    write_report(Table(("x", "y"), []), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "x,y\n"


def test_frequency_table_schema(tmp_path):
    snp_map = SnpMap(["a", "b", "c"], ["1", "1", "2"], [0.0, 1.0, np.nan])
    table = blanket_stability([(0, 1), (1,)], 3, ["a", "b", "c"], snp_map)
    write_report(table, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "snp_id,chromosome,position,inclusion_fraction"
    assert lines[1:] == ["a,1,0,0.5", "b,1,1,1", "c,2,,0"]


def test_unwritable_report(tmp_path):
    with pytest.raises(OSError, match="cannot write report"):
        write_report(Table(("x",), []), tmp_path / "missing_dir" / "r.csv")
