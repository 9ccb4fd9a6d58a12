"""The nine acceptance criteria, one test each.

Each test prints a PASS/FAIL line and records it for the terminal summary.
Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline.
"""

import csv
import io
import json
import random
import time
from contextlib import contextmanager
from dataclasses import replace

from conftest import ACCEPTANCE
from ricguard.cli import main
from ricguard.detectors import DetectorConfig, rule_oracle_classify
from ricguard.harness import evaluate_detector, generate_dataset, run_timeline_experiment, timeline_csv
from ricguard.kpm import DetectorKind, Label
from ricguard.pipeline import run_scenario
from ricguard.prompt import build_prompt
from ricguard.scenario import load_scenario


@contextmanager
def criterion(cid, title):
    info = {"detail": ""}
    try:
        yield info
    except BaseException:
        ACCEPTANCE[cid] = (False, title)
        print(f"\nFAIL C{cid} {title}")
        raise
    detail = f"{title} ({info['detail']})" if info["detail"] else title
    ACCEPTANCE[cid] = (True, detail)
    print(f"\nPASS C{cid} {detail}")


def brute_force(n, p):
    return "Malicious" if p > 312 * n else "Legitimate"


def test_c1_prompt_golden(golden_dir):
    with criterion(1, "prompt golden byte match") as c:
        t0 = time.perf_counter()
        got = build_prompt(1, 300).encode("utf-8")
        elapsed = time.perf_counter() - t0
        assert got == (golden_dir / "prompt_1_300.txt").read_bytes()
        assert b"TX Pack limits of 312 for 1 UE and 624 for 2 UEs" in got
        assert got.startswith(b"PLEASE ONLY OUTPUT IN A WORD")
        assert elapsed < 1.0
        c["detail"] = f"{elapsed * 1000:.2f} ms"


def test_c2_oracle_sweep():
    with criterion(2, "oracle exhaustive sweep") as c:
        t0 = time.perf_counter()
        cases = mismatches = 0
        for n in range(1, 11):
            for p in range(0, 4001):
                cases += 1
                if rule_oracle_classify(n, p).value != brute_force(n, p):
                    mismatches += 1
        elapsed = time.perf_counter() - t0
        assert cases == 40_010 and mismatches == 0
        assert elapsed < 1.0
        c["detail"] = f"{cases} cases, {mismatches} mismatches, {elapsed * 1000:.0f} ms"


def test_c3_equal_share():
    with criterion(3, "equal-share scheduling") as c:
        sc = load_scenario("paper_default")
        t0 = time.perf_counter()
        p = run_scenario(sc)
        elapsed = time.perf_counter() - t0
        onset = sc.attackers[0].attack_onset
        pre = [r for r in p.e2.ticks if r.time < onset]
        assert len({r.ue for r in pre}) == 3
        assert len(pre) == 3 * onset // sc.tick_ms
        worst = max(abs(r.achieved_mbps - 10.0) for r in pre)
        assert worst <= 0.3 + 1e-9
        assert elapsed < 5.0
        c["detail"] = f"max dev {worst:.2f} Mbps, 400 s run in {elapsed:.2f} s"


def test_c4_attack_and_recovery():
    with criterion(4, "attack and recovery timeline") as c:
        sc = load_scenario("paper_default")
        res = run_timeline_experiment(sc)
        p = res.pipeline
        assert res.attack_onset == 170_000
        assert 0 <= res.detection_time - res.attack_onset <= sc.report_interval_ms

        [rec] = p.ss.successful
        ack = rec.ack_time
        first_tick_after = min(r.time for r in p.e2.ticks if r.time >= ack)
        assert first_tick_after - ack <= sc.tick_ms
        for r in p.e2.ticks:
            if r.time < first_tick_after:
                continue
            if r.ue == res.attacker:
                assert r.achieved_mbps == 0.0
            else:
                assert abs(r.achieved_mbps - 10.0) <= 0.3 + 1e-9
        assert max(r.time for r in p.e2.ticks) == sc.duration_ms - sc.tick_ms

        hop = sc.hop_latency_ms
        assert rec.latency == 3 * hop
        assert rec.latency <= 5 * hop
        c["detail"] = (f"detect +{res.detection_time - res.attack_onset} ms, recovered {first_tick_after - ack} ms "
                       f"after ack, latency {rec.latency} ms = 3 hops")


def test_c5_static_ordering():
    with criterion(5, "oracle detects before static K=5") as c:
        sc = load_scenario("paper_default")
        oracle = run_timeline_experiment(sc)
        static = run_timeline_experiment(
            replace(sc, detector=replace(sc.detector, backend=DetectorKind.STATIC_THRESHOLD, confirmations=5))
        )
        lag = static.detection_time - oracle.detection_time
        assert lag == 4 * sc.report_interval_ms
        c["detail"] = f"oracle {oracle.detection_time} ms, static {static.detection_time} ms, lag {lag} ms"


def test_c6_accuracy_calibration():
    with criterion(6, "mock accuracy calibration") as c:
        samples, _ = generate_dataset(10_000, seed=2024)
        measured = []
        for target in (0.70, 0.87, 0.95, 0.99, 1.00):
            cfg = DetectorConfig(backend=DetectorKind.MOCK_LLM, accuracy=target, seed=17)
            r = evaluate_detector(samples, cfg)
            assert r.n_samples == 10_000
            assert abs(r.accuracy - target) <= 0.01, (target, r.accuracy)
            measured.append(f"{target:.2f}->{r.accuracy:.4f}")
        c["detail"] = ", ".join(measured)


def test_c7_dataset_integrity():
    with criterion(7, "dataset integrity") as c:
        samples, lines = generate_dataset(1000, seed=7)
        assert len(lines) == 1000
        bad = 0
        for line in lines:
            row = json.loads(line)
            n = int(row["instruction"].split("the following ")[1].split(" and ")[0])
            p = int(row["instruction"].split(" and ")[2].split(" meet")[0])
            bad += row["output"] != brute_force(n, p)
        assert bad == 0
        again = generate_dataset(1000, seed=7)[1]
        assert "\n".join(again).encode() == "\n".join(lines).encode()
        n_mal = sum(s.label is Label.MALICIOUS for s in samples)
        c["detail"] = f"1000/1000 consistent, {n_mal} malicious, seeded bytes identical"


def test_c8_determinism(tmp_path, capsys):
    with criterion(8, "determinism and replay") as c:
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert main(["simulate", "--no-figures", "--seed", "0", "--out", str(out)]) == 0
        for name in ("timeline.csv", "summary.json", "trace.jsonl"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
        assert main(["replay", str(outs[0] / "trace.jsonl")]) == 0
        assert "replay OK" in capsys.readouterr().out
        n = len((outs[0] / "trace.jsonl").read_text().splitlines()) - 1
        c["detail"] = f"3 artifacts byte-identical, replay verified {n} messages"


def test_c9_exactly_once():
    with criterion(9, "exactly-once mitigation over 10 seeds") as c:
        base = load_scenario("paper_default")
        onsets = []
        for seed in range(10):
            rnd = random.Random(seed)
            onset = rnd.randrange(10_000, 390_000, 50)
            attacker = rnd.choice([u.id for u in base.ues])
            ues = [
                replace(u, attacker=(u.id == attacker), attack_onset=onset if u.id == attacker else None)
                for u in base.ues
            ]
            p = run_scenario(replace(base, seed=seed, ues=ues))
            ok = [r for r in p.ss.successful]
            assert [r.ue for r in ok] == [attacker], (seed, [r.ue for r in ok])
            assert all(r.ue == attacker for r in p.ss.records)
            assert p.ss.quarantined == {attacker}
            onsets.append(onset)
        c["detail"] = f"onsets {min(onsets)}..{max(onsets)} ms, 10/10 runs one mitigation, 0 false quarantines"
