"""Configuration schema, validation, and preset loading."""

import math

import pytest

from starqkd.errors import ConfigurationError, ScenarioError
from starqkd.scenario import (
    ScheduleSpec,
    list_presets,
    load_preset,
    load_scenario,
    scenario_from_dict,
)


def minimal_config(**overrides):
    cfg = {
        "name": "mini",
        "seed": 5,
        "source": {"shg_power": 25.0, "visibility": 0.97},
        "plan": {
            "device": "awg",
            "pairs": [{"a": "alice", "b": "bob", "channel": 40}],
        },
        "participants": {
            "alice": {"link": {"length_km": 3.0, "extra_loss_db": 1.5}},
            "bob": {"detector": {"efficiency": 0.25}},
        },
    }
    cfg.update(overrides)
    return cfg


class TestBuild:
    def test_minimal_config_resolves(self):
        scn = scenario_from_dict(minimal_config())
        assert scn.name == "mini"
        assert scn.seed == 5
        assert scn.source.visibility == 0.97
        assert len(scn.pairings) == 1
        pairing = scn.pairings[0]
        assert (pairing.participant_a, pairing.participant_b) == ("alice", "bob")
        assert scn.participant("alice").link.length_km == 3.0
        assert scn.participant("bob").detector.efficiency == 0.25

    def test_defaults_fill_in(self):
        scn = scenario_from_dict(minimal_config())
        assert scn.schedule.runs == 5
        assert scn.schedule.run_length == 90.0
        assert scn.control.enabled is True
        assert scn.sync.bin_width == pytest.approx(500e-12)
        assert scn.participant("bob").link.length_km == 0.0
        # temperature coefficient default in rad/mK
        assert scn.participant("alice").temp_coeff == pytest.approx(
            0.039 * math.pi
        )

    def test_wss_plan_from_config(self):
        cfg = minimal_config(
            plan={
                "device": "wss",
                "demands": [
                    {"a": "alice", "b": "bob", "width_ghz": 50.0},
                ],
            }
        )
        scn = scenario_from_dict(cfg)
        assert scn.plan.device == "wss"
        assert scn.pairings[0].window_a.width_ghz == 50.0

    def test_unknown_participant_lookup(self):
        scn = scenario_from_dict(minimal_config())
        with pytest.raises(ConfigurationError):
            scn.participant("mallory")


class TestValidation:
    def test_all_violations_collected(self):
        bad = {
            "seed": "not-an-int",
            "bogus_section": {},
            "plan": {"device": "teleporter"},
            "participants": {},
            "schedule": {"runs": 1, "run_length": -3.0},
            "control": {"cadence_runs": 0},
            "sync": {"bin_width": 2.0, "search_range": 1.0},
        }
        with pytest.raises(ScenarioError) as err:
            scenario_from_dict(bad)
        text = "\n".join(err.value.violations)
        assert len(err.value.violations) >= 7
        assert "bogus_section" in text
        assert "seed" in text
        assert "teleporter" in text
        assert "participant" in text
        assert "runs" in text
        assert "run_length" in text
        assert "cadence_runs" in text
        assert "bin_width" in text

    def test_unknown_keys_rejected_everywhere(self):
        cfg = minimal_config()
        cfg["source"]["mystery"] = 1
        cfg["participants"]["alice"]["surprise"] = 2
        cfg["participants"]["alice"]["link"] = {"length_km": 1.0, "colour": 3}
        with pytest.raises(ScenarioError) as err:
            scenario_from_dict(cfg)
        text = "\n".join(err.value.violations)
        assert "mystery" in text
        assert "surprise" in text
        assert "colour" in text

    def test_pairing_with_undefined_participant(self):
        cfg = minimal_config()
        cfg["plan"]["pairs"][0]["b"] = "nobody"
        with pytest.raises(ScenarioError) as err:
            scenario_from_dict(cfg)
        assert any("nobody" in v for v in err.value.violations)

    def test_colliding_channels_reported(self):
        cfg = minimal_config()
        cfg["plan"]["pairs"] = [
            {"a": "alice", "b": "bob", "channel": 33},
            {"a": "alice", "b": "bob", "channel": 34},
        ]
        with pytest.raises(ScenarioError):
            scenario_from_dict(cfg)

    def test_single_run_schedule_rejected(self):
        cfg = minimal_config(schedule={"runs": 1})
        with pytest.raises(ScenarioError) as err:
            scenario_from_dict(cfg)
        assert any("calibration" in v for v in err.value.violations)

    def test_out_of_range_physics_value(self):
        cfg = minimal_config()
        cfg["participants"]["bob"]["detector"]["efficiency"] = 1.7
        with pytest.raises(ScenarioError) as err:
            scenario_from_dict(cfg)
        assert any("efficiency" in v for v in err.value.violations)


class TestSchedule:
    def test_run_starts_with_intermission(self):
        sched = ScheduleSpec(runs=4, run_length=90.0, intermission=6.0)
        assert sched.cycle == 96.0
        assert sched.run_start(0) == 0.0
        assert sched.run_start(3) == pytest.approx(288.0)
        assert sched.total_exchange_time == pytest.approx(360.0)

    def test_pipelined_mode_packs_runs_back_to_back(self):
        sched = ScheduleSpec(
            runs=4, run_length=90.0, intermission=6.0, pipelined=True
        )
        assert sched.cycle == 90.0
        assert sched.run_start(2) == pytest.approx(180.0)


class TestYaml:
    def test_yaml_round_trip(self, tmp_path):
        path = tmp_path / "scn.yaml"
        path.write_text(
            "name: fromfile\n"
            "seed: 12\n"
            "source: {shg_power: 10.0}\n"
            "plan:\n"
            "  device: awg\n"
            "  pairs:\n"
            "    - {a: x, b: y, channel: 20}\n"
            "participants:\n"
            "  x: {link: {length_km: 2.0}}\n"
            "  y: {}\n"
        )
        scn = load_scenario(path)
        assert scn.name == "fromfile"
        assert scn.pairings[0].participant_b == "y"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_scenario(tmp_path / "absent.yaml")

    def test_invalid_yaml_reports_violation(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("plan: [unclosed\n")
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_non_mapping_root_rejected(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- just\n- a\n- list\n")
        with pytest.raises(ScenarioError):
            load_scenario(path)


class TestPresets:
    def test_all_presets_listed(self):
        names = list_presets()
        for expected in (
            "fig4",
            "fig5",
            "fig6",
            "fig7a",
            "fig7b",
            "fig7c",
            "fig9",
            "quick",
        ):
            assert expected in names

    @pytest.mark.parametrize("name", list_presets())
    def test_every_preset_validates(self, name):
        scn = load_preset(name)
        assert scn.name == name
        assert len(scn.pairings) >= 1
        assert scn.schedule.runs >= 2

    def test_unknown_preset_lists_available(self):
        with pytest.raises(ConfigurationError, match="quick"):
            load_preset("figx")

    def test_low_pair_number_preset_regime(self):
        scn = load_preset("fig4")
        assert scn.pairings[0].mu == pytest.approx(1e-3, rel=1e-3)
        assert scn.source.visibility == pytest.approx(0.998)
        assert scn.schedule.runs == 11

    def test_spooled_fiber_preset_totals(self):
        scn = load_preset("fig5")
        totals = sorted(
            scn.participant(p.participant_a).link.length_km
            + scn.participant(p.participant_b).link.length_km
            for p in scn.pairings
        )
        assert totals == pytest.approx([47.6, 60.5])

    def test_configuration_presets_cover_all_six_combos(self):
        seen = set()
        for name in ("fig7a", "fig7b", "fig7c"):
            scn = load_preset(name)
            for p in scn.pairings:
                seen.add(frozenset((p.participant_a, p.participant_b)))
        assert len(seen) == 6

    def test_field_test_preset_is_pipelined_wss(self):
        scn = load_preset("fig9")
        assert scn.plan.device == "wss"
        assert scn.schedule.pipelined
        assert scn.schedule.cycle == scn.schedule.run_length
        widths = sorted(p.window_a.width_ghz for p in scn.pairings)
        assert widths == [25.0, 50.0]
