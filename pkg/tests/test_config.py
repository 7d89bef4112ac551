import pytest

from occtrack import config as C
from occtrack.errors import ConfigError


class TestDefaults:
    def test_echo(self):
        cfg = C.default_config()
        f, t = C.filter_config(cfg), C.tgospa_params(cfg)
        occ = C.occlusion(cfg)
        assert f.constant_pd == 0.529
        assert f.gate_threshold == 6.0
        assert f.max_hypotheses == 100
        assert f.prune_log_weight == -300.0
        assert f.murty_factor == 10.0
        assert f.exist_threshold == 0.5
        assert occ.z_max == 15.0
        assert occ.kappa == pytest.approx(0.425)
        assert (t.p, t.c, t.gamma) == (2.41, 1.0, 2.60)

    def test_defaults_validate(self):
        C.validate(C.default_config())

    def test_defaults_are_copied(self):
        a = C.default_config()
        a["filter"]["gate_threshold"] = 1.0
        assert C.default_config()["filter"]["gate_threshold"] == 6.0


class TestLoading:
    def test_file_then_override(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("filter:\n  gate_threshold: 9\n  max_hypotheses: 50\n")
        cfg = C.load_config(p, ["filter.gate_threshold=12"])
        assert cfg["filter"]["gate_threshold"] == 12
        assert cfg["filter"]["max_hypotheses"] == 50
        assert cfg["filter"]["constant_pd"] == 0.529

    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("")
        assert C.load_config(p) == C.default_config()

    @pytest.mark.parametrize(
        "text",
        ["filtr:\n  gate_threshold: 9\n", "filter:\n  gate: 9\n", "filter: 3\n", "- 1\n", "filter: [\n"],
    )
    def test_bad_file(self, tmp_path, text):
        p = tmp_path / "c.yaml"
        p.write_text(text)
        with pytest.raises(ConfigError):
            C.load_config(p)

    @pytest.mark.parametrize("item", ["filter.gate_threshold", "nope.x=1", "filter.strategy=banana", "epd.mc_samples=0"])
    def test_bad_override(self, item):
        with pytest.raises(ConfigError):
            C.load_config(None, [item])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            C.load_config(tmp_path / "absent.yaml")

    def test_dump_round_trip(self, tmp_path):
        cfg = C.load_config(None, ["seed=7", "scenario.n_frames=40"])
        p = tmp_path / "c.yaml"
        p.write_text(C.dump(cfg))
        assert C.load_config(p) == cfg

    def test_custom_scenario(self):
        cfg = C.load_config(None, ["scenario.kind=custom", "scenario.objects=[{id: 1, x: 0.0, z: 6.0}]"])
        spec = C.scenario_spec(cfg)
        assert len(spec.objects) == 1
