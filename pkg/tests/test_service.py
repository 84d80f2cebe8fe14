import json
import time

import pytest
from fastapi.testclient import TestClient

from netlab import scenario as S
from netlab.service import create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=tmp_path / "store")
    with TestClient(app) as c:
        yield c


def catalog_text(name: str) -> str:
    return S.load_catalog_text(name)


def create_session(client, name="arp-basic") -> str:
    resp = client.post("/sessions", content=catalog_text(name))
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["mode"] == "paused"
    return body["id"]


def run_to_finish(client, sid, speed=10**12, timeout=10.0):
    resp = client.post(f"/sessions/{sid}/control", json={"cmd": "run", "speed": speed})
    assert resp.status_code == 200, resp.text
    deadline = time.time() + timeout
    while time.time() < deadline:
        snap = client.get(f"/sessions/{sid}/snapshot").json()
        if snap["mode"] == "finished":
            return snap
        time.sleep(0.01)
    raise AssertionError("session did not finish in time")


def read_stream(client, sid, from_seq=0):
    records = []
    with client.stream("GET", f"/sessions/{sid}/events", params={"from_seq": from_seq}) as resp:
        assert resp.status_code == 200
        for line in resp.iter_lines():
            if line.startswith("data: "):
                records.append(json.loads(line[len("data: "):]))
    return records


def cli_trace_records(name: str):
    scn = S.load_catalog_scenario(name)
    lab = S.run_scenario(scn)
    return [json.loads(S.dump_record(S.record_of(o))) for o in lab.engine.history]


def test_create_session_and_invalid_scenario(client):
    sid = create_session(client)
    assert sid
    resp = client.post("/sessions", content="{not json")
    assert resp.status_code == 400
    assert resp.json()["code"] == "syntax_error"
    bad = json.loads(catalog_text("arp-basic"))
    bad["interfaces"][1]["ip"] = "10.0.0.1"
    resp = client.post("/sessions", content=json.dumps(bad))
    assert resp.status_code == 400
    assert resp.json()["code"] == "duplicate_ip"


def test_two_sessions_are_independent(client):
    a = create_session(client)
    b = create_session(client)
    assert a != b
    client.post(f"/sessions/{a}/control", json={"cmd": "step", "n": 5})
    snap_a = client.get(f"/sessions/{a}/snapshot").json()
    snap_b = client.get(f"/sessions/{b}/snapshot").json()
    assert snap_a["at"] > 0 and snap_b["at"] == 0


def test_unknown_session_404(client):
    assert client.get("/sessions/nope/snapshot").status_code == 404
    assert client.post("/sessions/nope/control", json={"cmd": "pause"}).status_code == 404


def test_step_dispatches_and_step_while_running_rejected(client):
    sid = create_session(client, "rip-line-3")
    resp = client.post(f"/sessions/{sid}/control", json={"cmd": "step", "n": 3})
    assert resp.json()["dispatched"] == 3
    client.post(f"/sessions/{sid}/control", json={"cmd": "run", "speed": 10**4})
    resp = client.post(f"/sessions/{sid}/control", json={"cmd": "step", "n": 1})
    assert resp.status_code == 409
    client.post(f"/sessions/{sid}/control", json={"cmd": "pause"})


def test_service_stream_equals_cli_trace(client):
    for name in ("arp-basic", "rarp-boot", "ping-wan"):
        sid = create_session(client, name)
        run_to_finish(client, sid)
        got = read_stream(client, sid)
        assert got == cli_trace_records(name), name


def test_pause_resume_transparent(client):
    name = "arp-basic"
    sid = create_session(client, name)
    # slow enough that pauses land mid-run: 10s virtual at 5e6 ticks/s = ~2s real
    client.post(f"/sessions/{sid}/control", json={"cmd": "run", "speed": 5 * 10**6})
    time.sleep(0.1)
    client.post(f"/sessions/{sid}/control", json={"cmd": "pause"})
    snap = client.get(f"/sessions/{sid}/snapshot").json()
    assert snap["mode"] in ("paused", "finished")
    client.post(f"/sessions/{sid}/control", json={"cmd": "run", "speed": 5 * 10**6})
    time.sleep(0.1)
    client.post(f"/sessions/{sid}/control", json={"cmd": "pause"})
    run_to_finish(client, sid)
    assert read_stream(client, sid) == cli_trace_records(name)


def test_reset_reproduces_identical_trace(client):
    sid = create_session(client, "arp-basic")
    run_to_finish(client, sid)
    first = read_stream(client, sid)
    client.post(f"/sessions/{sid}/control", json={"cmd": "reset"})
    snap = client.get(f"/sessions/{sid}/snapshot").json()
    assert snap["mode"] == "paused" and snap["at"] == 0
    run_to_finish(client, sid)
    assert read_stream(client, sid) == first


def test_inject_fault_and_errors(client):
    sid = create_session(client, "arp-basic")
    resp = client.post(f"/sessions/{sid}/inject", json={"action": "break_link", "segment": "S1"})
    assert resp.status_code == 200
    resp = client.post(f"/sessions/{sid}/inject", json={"action": "break_link", "segment": "NOPE"})
    assert resp.status_code == 400 and resp.json()["code"] == "unknown_ref"
    resp = client.post(
        f"/sessions/{sid}/inject", json={"action": "ping", "node": "H1", "dst": "999.1.1.1"}
    )
    assert resp.status_code == 400 and resp.json()["code"] == "out_of_range"
    run_to_finish(client, sid)
    records = read_stream(client, sid)
    faults = [r for r in records if r["kind"] == "fault_applied" and r["action"] == "break_link"]
    assert len(faults) == 1


def test_set_param_changes_rip_tick_spacing(client):
    sid = create_session(client, "rip-line-3")
    resp = client.post(
        f"/sessions/{sid}/inject",
        json={"action": "set_param", "path": "rip.update_interval", "value": "10s"},
    )
    assert resp.status_code == 200
    run_to_finish(client, sid, timeout=30)
    records = read_stream(client, sid)
    ticks = [
        r["at"] for r in records
        if r["kind"] == "frame_sent" and r.get("rip_sender") == "10.2.1.1"
    ]
    gaps = {b - a for a, b in zip(ticks[2:], ticks[3:])}
    assert 10 * 10**6 in gaps  # post-change spacing
    assert 30 * 10**6 not in {g for g in gaps if g > 25 * 10**6}


def test_subscribers_get_identical_streams(client):
    sid = create_session(client, "rarp-boot")
    run_to_finish(client, sid)
    assert read_stream(client, sid) == read_stream(client, sid)


def test_stream_from_mid_sequence(client):
    sid = create_session(client, "arp-basic")
    run_to_finish(client, sid)
    full = read_stream(client, sid)
    tail = read_stream(client, sid, from_seq=10)
    assert tail == full[10:]


def test_seq_too_old_when_ring_evicted(client):
    sid = create_session(client, "arp-basic")
    run_to_finish(client, sid)
    session = client.app.state.manager.get(sid)
    session.lab.engine.trim_history(5)
    resp = client.get(f"/sessions/{sid}/events", params={"from_seq": 0})
    assert resp.status_code == 409
    assert resp.json()["code"] == "seq_too_old"


def test_snapshot_routes_match_folded_observations(client):
    sid = create_session(client, "rip-line-3")
    client.post(f"/sessions/{sid}/control", json={"cmd": "step", "n": 400})
    snap = client.get(f"/sessions/{sid}/snapshot").json()
    records = []
    session = client.app.state.manager.get(sid)
    records = [json.loads(S.dump_record(S.record_of(o))) for o in session.lab.engine.history]
    # fold route_changed records into expected per-node tables
    folded = {}
    for r in records:
        if r["kind"] != "route_changed":
            continue
        key = (r["node"], r["prefix"], r["prefix_len"], r["source"])
        if r["change"] == "delete":
            folded.pop(key, None)
        else:
            folded[key] = (r["metric"], r["next_hop"])
    got = {}
    for node_name, node in snap["nodes"].items():
        for route in node["routes"]:
            got[(node_name, route["prefix"], route["prefix_len"], route["source"])] = (
                route["metric"], route["next_hop"],
            )
    assert got == folded


def test_scenario_store_get_put(client):
    resp = client.get("/scenarios")
    assert "arp-basic" in resp.json()["scenarios"]
    resp = client.get("/scenarios/arp-basic")
    assert resp.status_code == 200
    assert json.loads(resp.text)["meta"]["name"] == "arp-basic"
    assert client.get("/scenarios/missing-one").status_code == 404
    resp = client.put("/scenarios/custom-x", content=catalog_text("arp-basic"))
    assert resp.status_code == 200
    assert client.get("/scenarios/custom-x").status_code == 200
    resp = client.put("/scenarios/bad-one", content="{}")
    assert resp.status_code == 400


def test_addendum_export_and_headless_replay(client):
    sid = create_session(client, "arp-basic")
    client.post(f"/sessions/{sid}/control", json={"cmd": "step", "n": 10})
    client.post(f"/sessions/{sid}/inject", json={"action": "set_noise", "segment": "S1", "p": 0.4})
    client.post(f"/sessions/{sid}/control", json={"cmd": "step", "n": 10})
    client.post(f"/sessions/{sid}/inject", json={"action": "break_link", "segment": "S1"})
    client.post(f"/sessions/{sid}/control", json={"cmd": "step", "n": 5})
    client.post(f"/sessions/{sid}/inject", json={"action": "restore_link", "segment": "S1"})
    run_to_finish(client, sid)
    interactive = read_stream(client, sid)
    bundle = client.get(f"/sessions/{sid}/addendum").json()
    assert len(bundle["addendum"]) == 3
    scn = S.load_catalog_scenario("arp-basic")
    lab = S.run_replay_bundle(scn, bundle)
    replayed = [json.loads(S.dump_record(S.record_of(o))) for o in lab.engine.history]
    assert replayed == interactive
