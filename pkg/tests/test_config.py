import json

import pytest

from gridduel.config import ConfigError, fixture_path, load_config, load_config_path, save_config

POC = fixture_path("poc.json")
LONE = fixture_path("lone_attacker.json")
TWO_BUS = fixture_path("two_bus.json")


def poc_doc():
    return json.loads(POC.read_text(encoding="utf-8"))


def load_doc(doc):
    return load_config(json.dumps(doc))


# -- fixtures load and match their documented shape ---------------------------------


def test_poc_fixture_matches_documented_assignment():
    cfg = load_config_path(POC)
    assert cfg.name == "poc"
    assert cfg.seed == 42
    assert cfg.rounds == 1000
    assert cfg.steps_per_turn == 1
    assert cfg.grid_source == "arl_poc_grid"
    attacker, defender = cfg.agents
    assert attacker.agent_class == "attacker"
    assert [ref.kind for ref in attacker.actuators] == ["transformer"] * 6
    assert len(attacker.sensors) == 14
    assert defender.agent_class == "defender"
    assert [ref.kind for ref in defender.actuators] == ["generator"] * 4 + ["load"] * 6
    assert len(defender.sensors) == 14


def test_lone_attacker_fixture_is_single_class():
    cfg = load_config_path(LONE)
    assert [a.agent_class for a in cfg.agents] == ["attacker"]
    assert cfg.allow_single_class
    assert cfg.rounds == 2000


def test_two_bus_fixture_has_inline_grid():
    cfg = load_config_path(TWO_BUS)
    grid = cfg.build_grid()
    assert grid.n_bus == 2
    assert grid.loads[0].p_mw == 5.0
    assert cfg.agents[0].learner_kind == "tabular"


# -- canonical save / round trips -----------------------------------------------------


@pytest.mark.parametrize("path", [POC, LONE, TWO_BUS])
def test_fixtures_are_canonical(path):
    text = path.read_text(encoding="utf-8")
    assert save_config(load_config(text)) == text


@pytest.mark.parametrize("path", [POC, LONE, TWO_BUS])
def test_load_save_round_trip_is_identity(path):
    cfg = load_config_path(path)
    assert load_config(save_config(cfg)) == cfg


def test_save_is_deterministic():
    cfg = load_config_path(POC)
    assert save_config(cfg) == save_config(cfg)


def test_save_canonicalizes_messy_input():
    doc = poc_doc()
    doc["schedule"] = {"steps_per_turn": 1, "rounds": 1000}  # reordered keys
    messy = json.dumps(doc, indent=7)
    canonical = save_config(load_config(messy))
    assert canonical == POC.read_text(encoding="utf-8")
    assert save_config(load_config(canonical)) == canonical  # idempotent


def test_floats_use_shortest_round_trip_form():
    text = POC.read_text(encoding="utf-8")
    assert '"p_fail": 0.9285714285714286' in text
    cfg = load_config_path(TWO_BUS)
    assert '"x_pu": 0.1' in save_config(cfg)


def test_fingerprint_is_stable_and_input_sensitive():
    cfg = load_config_path(POC)
    assert cfg.fingerprint() == cfg.fingerprint()
    doc = poc_doc()
    doc["seed"] = 43
    assert load_doc(doc).fingerprint() != cfg.fingerprint()


# -- validation rules, one fixture per rule --------------------------------------------


def test_parse_error_is_position_annotated():
    with pytest.raises(ConfigError, match=r"line \d+ column \d+"):
        load_config('{"name": "x",\n  broken')


def test_unknown_top_level_key_rejected():
    doc = poc_doc()
    doc["commentary"] = "hi"
    with pytest.raises(ConfigError, match="unknown key.*commentary"):
        load_doc(doc)


def test_unknown_nested_key_rejected():
    doc = poc_doc()
    doc["agents"][0]["learner"]["momentum"] = 0.9
    with pytest.raises(ConfigError, match=r"agents\[0\].learner.*momentum"):
        load_doc(doc)


def test_missing_required_key_rejected():
    doc = poc_doc()
    del doc["outputs"]
    with pytest.raises(ConfigError, match="missing required key 'outputs'"):
        load_doc(doc)


def test_wrong_type_rejected():
    doc = poc_doc()
    doc["seed"] = "forty-two"
    with pytest.raises(ConfigError, match="seed.*integer"):
        load_doc(doc)


def test_seed_must_fit_64_bits():
    doc = poc_doc()
    doc["seed"] = 2**64
    with pytest.raises(ConfigError, match="64-bit"):
        load_doc(doc)


def test_empty_agent_list_rejected():
    doc = poc_doc()
    doc["agents"] = []
    with pytest.raises(ConfigError, match="at least one agent"):
        load_doc(doc)


def test_duplicate_agent_ids_rejected():
    doc = poc_doc()
    doc["agents"][1]["id"] = doc["agents"][0]["id"]
    # Keep actuators disjoint so the id rule is what fires.
    with pytest.raises(ConfigError, match="duplicate agent id"):
        load_doc(doc)


def test_overlapping_actuators_rejected():
    doc = poc_doc()
    doc["agents"][1]["actuators"].append({"kind": "transformer", "index": 3})
    with pytest.raises(ConfigError, match=r"agents\[0\] and agents\[1\] share actuator transformer:3"):
        load_doc(doc)


def test_single_class_requires_flag():
    doc = poc_doc()
    doc["agents"] = [doc["agents"][0]]
    with pytest.raises(ConfigError, match="allow_single_class"):
        load_doc(doc)
    doc["allow_single_class"] = True
    cfg = load_doc(doc)
    assert cfg.allow_single_class


def test_unknown_grid_token_rejected():
    doc = poc_doc()
    doc["grid"] = "mystery_grid"
    with pytest.raises(ConfigError, match="unknown grid token"):
        load_doc(doc)


def test_invalid_inline_grid_rejected():
    doc = json.loads(TWO_BUS.read_text(encoding="utf-8"))
    doc["grid"]["lines"][0]["x_pu"] = 0.0
    doc["grid"]["lines"][0]["r_pu"] = 0.0
    with pytest.raises(ConfigError, match="grid.*zero-impedance"):
        load_doc(doc)


def test_empty_sensor_list_rejected():
    doc = poc_doc()
    doc["agents"][0]["sensors"] = []
    with pytest.raises(ConfigError, match=r"agents\[0\].sensors.*empty"):
        load_doc(doc)


def test_sensor_bus_must_exist():
    doc = poc_doc()
    doc["agents"][0]["sensors"][0]["bus"] = 99
    with pytest.raises(ConfigError, match="missing bus 99"):
        load_doc(doc)


def test_actuator_device_must_exist():
    doc = poc_doc()
    doc["agents"][0]["actuators"][0]["index"] = 42
    with pytest.raises(ConfigError, match="missing transformer 42"):
        load_doc(doc)


def test_unknown_actuator_kind_rejected():
    doc = poc_doc()
    doc["agents"][0]["actuators"][0]["kind"] = "capacitor"
    with pytest.raises(ConfigError, match="unknown actuator kind"):
        load_doc(doc)


def test_explicit_labels_must_match_kind():
    doc = poc_doc()
    doc["agents"][0]["actuators"][0]["labels"] = ["up", "down", "hold"]
    with pytest.raises(ConfigError, match="labels.*invalid for kind"):
        load_doc(doc)


def test_explicit_valid_labels_accepted():
    doc = poc_doc()
    doc["agents"][0]["actuators"][0]["labels"] = ["decrement", "hold", "increment"]
    cfg = load_doc(doc)
    assert cfg.agents[0].actuators[0].kind == "transformer"


def test_bad_agent_class_rejected():
    doc = poc_doc()
    doc["agents"][0]["class"] = "observer"
    with pytest.raises(ConfigError, match="attacker.*defender"):
        load_doc(doc)


def test_bad_learner_kind_rejected():
    doc = poc_doc()
    doc["agents"][0]["learner"]["kind"] = "sarsa"
    with pytest.raises(ConfigError, match="qnet.*tabular"):
        load_doc(doc)


def test_bad_reward_sigma_rejected():
    doc = poc_doc()
    doc["agents"][0]["reward"]["sigma"] = 0.0
    with pytest.raises(ConfigError, match=r"agents\[0\].reward"):
        load_doc(doc)


def test_bad_gamma_rejected():
    doc = poc_doc()
    doc["agents"][0]["learner"]["gamma"] = 1.0
    with pytest.raises(ConfigError, match="gamma"):
        load_doc(doc)


def test_negative_rounds_rejected():
    doc = poc_doc()
    doc["schedule"]["rounds"] = -1
    with pytest.raises(ConfigError, match="rounds"):
        load_doc(doc)


def test_zero_steps_per_turn_rejected():
    doc = poc_doc()
    doc["schedule"]["steps_per_turn"] = 0
    with pytest.raises(ConfigError, match="steps_per_turn"):
        load_doc(doc)


def test_bad_performance_band_rejected():
    doc = poc_doc()
    doc["performance"]["v_lo"] = 1.2
    with pytest.raises(ConfigError, match="performance"):
        load_doc(doc)


def test_empty_output_path_rejected():
    doc = poc_doc()
    doc["outputs"]["metrics_path"] = ""
    with pytest.raises(ConfigError, match="metrics_path.*empty"):
        load_doc(doc)


def test_reward_c_defaults_to_five_percent_boundary():
    doc = poc_doc()
    del doc["agents"][0]["reward"]["c"]
    cfg = load_doc(doc)
    from gridduel.agents import DEFAULT_C

    assert cfg.agents[0].reward.c == DEFAULT_C


def test_custom_sigma_moves_default_boundary():
    doc = poc_doc()
    doc["agents"][0]["reward"] = {"sigma": 0.05}
    cfg = load_doc(doc)
    import math

    assert cfg.agents[0].reward.c == math.exp(-(0.05**2) / (2 * 0.05**2))
