from pathlib import Path

import pytest

from evacsim.fixtures import DATA_DIR

CASTLEMAINE = DATA_DIR / "castlemaine"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def castlemaine_dir() -> Path:
    return CASTLEMAINE


def write_scenario_dir(path: Path, seed: int = 0, n_agents: int = 60, **overrides) -> Path:
    """Write the desk scenario as files and return the scenario.json path."""
    import json

    from evacsim.engine.scenario import polygons_to_geojson_geometry
    from evacsim.fixtures import desk_scenario
    from evacsim.pipeline import write_agents_csv
    from evacsim.traffic.network import write_network

    sc = desk_scenario(seed, n_agents)
    path.mkdir(parents=True, exist_ok=True)
    write_agents_csv(path / "agents.csv", sc.agents)
    write_network(sc.network, path / "nodes.csv", path / "links.csv")
    fire = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"time": f.time}, "geometry": polygons_to_geojson_geometry(f.polygons)}
        for f in sc.fire.frames]}
    zones = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"id": z.id}, "geometry": polygons_to_geojson_geometry(z.polygons)}
        for z in sc.zones]}
    (path / "fire.geojson").write_text(json.dumps(fire))
    (path / "zones.geojson").write_text(json.dumps(zones))
    cfg = {
        "population": "agents.csv", "attitudes": str(DATA_DIR / "attitudes.csv"),
        "network": {"nodes": "nodes.csv", "links": "links.csv"},
        "fire_geojson": "fire.geojson", "zones_geojson": "zones.geojson",
        "messages": [{"time": m.time, "type": m.kind, "zones": list(m.zones)} for m in sc.messages],
        "horizon_s": sc.horizon_s, "seed": seed,
    }
    cfg.update(overrides)
    (path / "scenario.json").write_text(json.dumps(cfg, indent=1))
    return path / "scenario.json"


@pytest.fixture
def scenario_dir(tmp_path):
    def make(**kw):
        return write_scenario_dir(tmp_path / "scenario", **kw)
    return make


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
