import collections
import hashlib
import json

import pytest

from anythreat.datamodel import FeatureSchema
from anythreat.ingest import FEATURES, build_dataset, load_log_dir
from anythreat.synth import SynthConfig, generate

NAMES = [n for n, _ in FEATURES]


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_same_seed_byte_identical(tmp_path):
    generate(SynthConfig(seed=42, days=8), tmp_path / "a")
    generate(SynthConfig(seed=42, days=8), tmp_path / "b")
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a == b
    assert {"logon.csv", "device.csv", "file.csv", "http.csv", "email.csv", "roles.csv",
            "insiders.csv", "manifest.json"} == set(a)


def test_different_seed_differs(tmp_path):
    generate(SynthConfig(seed=1, days=8), tmp_path / "a")
    generate(SynthConfig(seed=2, days=8), tmp_path / "b")
    assert _files(tmp_path / "a") != _files(tmp_path / "b")


def test_manifest(tmp_path):
    cfg = SynthConfig(seed=9, days=7)
    generate(cfg, tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 9 and man["config"]["days"] == 7
    for name, digest in man["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest


def test_no_insiders(tmp_path):
    truth = generate(SynthConfig(n_insiders=0, days=7, seed=3), tmp_path)
    assert truth.insiders == {}
    events, roles, truth = load_log_dir(tmp_path)
    d = build_dataset(events, roles, "ITAdmin", truth)
    assert not any(i.is_anomalous for i in d.instances) and d.n_threats == 0


def test_community_shape(tmp_path):
    truth = generate(SynthConfig(n_users=80, n_insiders=12, scenarios=["s2", "s3"], seed=4), tmp_path)
    assert len(truth.insiders) == 12
    assert {i.scenario for i in truth.insiders.values()} <= {"s2", "s3"}


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5, 42])
def test_default_config_properties(tmp_path, seed):
    generate(SynthConfig(seed=seed), tmp_path)
    events, roles, truth = load_log_dir(tmp_path)
    d = build_dataset(events, roles, "ITAdmin", truth)
    per_threat = collections.Counter(i.threat_id for i in d.instances if i.is_anomalous)
    assert d.n_threats == 12 and min(per_threat.values()) >= 3
    n_i = sum(per_threat.values())
    ratio = n_i / (len(d) - n_i)
    assert 0.02 <= ratio <= 0.15


def test_scenarios_leave_their_signatures(tmp_path):
    generate(SynthConfig(n_users=40, n_insiders=12, days=10, scenarios=["s1", "s2", "s3", "s4"],
                         seed=8), tmp_path)
    events, roles, truth = load_log_dir(tmp_path)
    d = build_dataset(events, roles, "ITAdmin", truth, normalized=False)
    col = {n: i for i, n in enumerate(NAMES)}
    by_scenario = collections.defaultdict(list)
    for inst in d.instances:
        if inst.is_anomalous:
            by_scenario[truth.insiders[inst.user].scenario].append(inst.x)
    checks = {"s1": "n_leaksite_url", "s2": "n_jobsite_url", "s3": "distinct_pcs", "s4": "any_bcc"}
    for scen, feature in checks.items():
        if scen in by_scenario:
            assert max(x[col[feature]] for x in by_scenario[scen]) >= 1
    assert len(by_scenario) >= 3


def test_multiple_roles(tmp_path):
    generate(SynthConfig(n_users=20, n_insiders=2, days=7, roles=[["A", 0.25], ["B", 0.75]],
                         seed=1), tmp_path)
    _, roles, _ = load_log_dir(tmp_path)
    assert collections.Counter(roles.values()) == {"A": 5, "B": 15}


@pytest.mark.parametrize("kwargs", [
    {"n_insiders": 80}, {"roles": [["A", 0.5]]}, {"scenarios": ["s9"]}, {"scenarios": []},
    {"noise": {"unknown": 1}}, {"days": 3}, {"n_users": 0},
])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="not writable"):
        generate(SynthConfig(days=7), blocker / "sub")


def test_schema_is_the_default_eighteen():
    assert len(NAMES) == 18
    FeatureSchema(NAMES, [g for _, g in FEATURES])
