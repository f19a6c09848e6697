"""Scenario file loading, validation, and environment overrides."""

import textwrap

import pytest

from sonogrid.errors import ValidationError
from sonogrid.scenario import load_scenario

MINIMAL = """
[rtdb]
token = "tok"

[mapper.bbox]
lat_min = 23.0
lat_max = 24.0
lon_min = 90.0
lon_max = 91.0
"""


def write(tmp_path, text, name="scenario.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


class TestLoad:
    def test_minimal_defaults(self, tmp_path):
        sc = load_scenario(write(tmp_path, MINIMAL))
        assert sc.rtdb.token == "tok"
        assert sc.rtdb.port == 9900
        assert sc.mapper.grid.rows == 128
        assert sc.nodes == ()
        assert sc.duration_s is None

    def test_demo_scenario_parses(self):
        sc = load_scenario("scenarios/demo.toml")
        assert len(sc.nodes) == 3
        assert sc.duration_s == 60
        ids = [n.node_id for n in sc.nodes]
        assert ids == ["node-quiet", "node-medium", "node-loud"]
        assert all(n.publish_interval_ms == 2000 for n in sc.nodes)
        assert sc.nodes[0].calibration.offset_db == 40.0
        assert sc.mapper.stops[1].db == 65.0
        # node coordinates sit on grid cell centers (within the 1 m snap)
        from sonogrid.mapper.grid import haversine_m

        lats, lons = sc.mapper.grid.cell_lats(), sc.mapper.grid.cell_lons()
        for node, (i, j) in zip(sc.nodes, ((32, 32), (64, 64), (96, 96))):
            assert haversine_m(node.lat, node.lon, float(lats[i]), float(lons[j])) < 0.01

    def test_duplicate_node_ids_rejected(self, tmp_path):
        doc = MINIMAL + """
        [[nodes]]
        node_id = "a"
        lat = 23.5
        lon = 90.5
        [nodes.source]
        kind = "sine"
        amplitude_counts = 5.0
        frequency_hz = 100.0

        [[nodes]]
        node_id = "a"
        lat = 23.6
        lon = 90.6
        [nodes.source]
        kind = "sine"
        amplitude_counts = 5.0
        frequency_hz = 100.0
        """
        with pytest.raises(ValidationError, match="duplicate"):
            load_scenario(write(tmp_path, doc))

    def test_empty_token_rejected(self, tmp_path):
        doc = MINIMAL.replace('token = "tok"', 'token = ""')
        with pytest.raises(ValidationError, match="token"):
            load_scenario(write(tmp_path, doc))

    def test_missing_file_source_rejected(self, tmp_path):
        doc = MINIMAL + """
        [[nodes]]
        node_id = "a"
        lat = 23.5
        lon = 90.5
        [nodes.source]
        kind = "file"
        path = "does-not-exist.csv"
        """
        with pytest.raises(ValidationError, match="not found"):
            load_scenario(write(tmp_path, doc))

    def test_relative_paths_resolve_against_scenario_dir(self, tmp_path):
        (tmp_path / "counts.csv").write_text("512\n" * 16)
        doc = """
        [rtdb]
        token = "tok"
        journal = "data/j.ndjson"

        [mapper.bbox]
        lat_min = 23.0
        lat_max = 24.0
        lon_min = 90.0
        lon_max = 91.0

        [[nodes]]
        node_id = "a"
        lat = 23.5
        lon = 90.5
        [nodes.source]
        kind = "file"
        path = "counts.csv"
        """
        sc = load_scenario(write(tmp_path, doc))
        assert sc.rtdb.journal == tmp_path / "data/j.ndjson"
        assert sc.nodes[0].source.path == str(tmp_path / "counts.csv")

    def test_env_overrides(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SONOGRID_TOKEN", "env-token")
        monkeypatch.setenv("SONOGRID_BIND", "0.0.0.0:7001")
        sc = load_scenario(write(tmp_path, MINIMAL))
        assert sc.rtdb.token == "env-token"
        assert (sc.rtdb.host, sc.rtdb.port) == ("0.0.0.0", 7001)
        assert sc.rtdb.client_url == "http://127.0.0.1:7001"
        # nodes inherit the overridden token
        assert sc.nodes == ()

    def test_bad_bind_rejected(self, tmp_path):
        doc = MINIMAL + '\n[mapper]\nbind = "nonsense"\n' + "\n[mapper.bbox]\nlat_min = 23.0\nlat_max = 24.0\nlon_min = 90.0\nlon_max = 91.0\n"
        with pytest.raises(ValidationError, match="bind"):
            load_scenario(write(tmp_path, doc))

    def test_missing_scenario_file(self):
        with pytest.raises(ValidationError, match="not found"):
            load_scenario("/no/such/file.toml")
