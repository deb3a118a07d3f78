"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Tolerances are pinned here, not calibrated elsewhere."""
import itertools
import json
import random
import string
import time
from contextlib import contextmanager

import numpy as np
import pytest

from glyphforge.classifier import (
    ClassifierParams,
    NormalizedGlyph,
    cluster_tokens,
    detect_mirror_pairs,
    glyph_similarity,
)
from glyphforge.cli import main
from glyphforge.dataset import PuzzleDocument, ScriptLine, decode_placeholders, encode_placeholders, validate_description
from glyphforge.harness import parse_answers, score_pairing, score_transliteration, aggregate_report, read_records
from glyphforge.raster import band_rows
from glyphforge.segmenter import SegmentationParams, segment_line

from conftest import line_with_blocks, make_occurrence, make_pattern, write_line_png
from test_segmenter import bridge_fixture, random_rect_line


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


def test_segmentation_oracle_equivalence():
    """1,000 generated lines segment to exactly the generator's rectangles."""
    with criterion("segmentation-oracle-equivalence"):
        rng = np.random.default_rng(101)
        params = SegmentationParams()
        cases = [random_rect_line(rng, params) for _ in range(1000)]
        start = time.perf_counter()
        results = [segment_line(r, params) for r, _ in cases]
        elapsed = time.perf_counter() - start
        agree = sum(1 for (_, truth), occs in zip(cases, results) if [o.box for o in occs] == truth)
        assert agree == 1000, f"only {agree}/1000 lines agreed with the generator"
        assert elapsed < 10.0, f"segmentation took {elapsed:.2f}s, budget is 10s"


def test_bridge_exception_behavioral():
    """50 two-block fixtures joined only by a top/bottom bar: 2 tokens with
    the exception on, 1 with it off."""
    with criterion("bridge-exception-behavior"):
        rng = np.random.default_rng(77)
        on = SegmentationParams()
        off = SegmentationParams(bridge_exception_enabled=False)
        passed = 0
        for i in range(50):
            height = int(rng.integers(16, 40))
            top, _ = band_rows(height, on.band_top_frac, on.band_bottom_frac)
            bar_rows = int(rng.integers(1, max(2, top + 1)))
            r = bridge_fixture(height=height, bar_at_top=i % 2 == 0, bar_rows=bar_rows)
            if len(segment_line(r, on)) == 2 and len(segment_line(r, off)) == 1:
                passed += 1
        assert passed == 50, f"only {passed}/50 fixtures behaved"


def test_placeholder_round_trip():
    """decode(encode(d)) is the identity on 1,000 random documents."""
    with criterion("placeholder-round-trip"):
        rnd = random.Random(202)
        failures = 0
        for _ in range(1000):
            lines, assignment, truth = [], {}, []
            for li in range(rnd.randint(1, 5)):
                lid = f"line_{li}"
                ids = [rnd.randrange(60) for _ in range(rnd.randint(1, 15))]
                lines.append(ScriptLine(lid, tuple(range(len(ids)))))
                assignment.update({(lid, i): cid for i, cid in enumerate(ids)})
                truth.append(ids)
            doc = PuzzleDocument(puzzle_id="rt", language_name="x", script_lines=lines)
            encoded = encode_placeholders(doc, assignment)
            if [decode_placeholders(text) for _, text in encoded] != truth:
                failures += 1
        assert failures == 0, f"{failures} round-trip failures"


def _planted_corpus(rng, k, copies=3, noise=0.03):
    exemplars = []
    while len(exemplars) < k:
        g = rng.random((32, 32)) < 0.5
        if all(
            glyph_similarity(NormalizedGlyph(32, g), NormalizedGlyph(32, e)) < 0.8 for e in exemplars
        ):
            exemplars.append(g)
    labels, grids = [], []
    for ci, ex in enumerate(exemplars):
        for _ in range(copies):
            g = ex.copy()
            flips = int(rng.integers(0, int(noise * g.size) + 1))
            idx = rng.choice(g.size, size=flips, replace=False)
            flat = g.ravel()
            flat[idx] = ~flat[idx]
            labels.append(ci)
            grids.append(g)
    occs = [("l", make_occurrence(g, index=i)) for i, g in enumerate(grids)]
    return occs, labels


def _partition(assignment, n):
    groups = {}
    for i in range(n):
        groups.setdefault(assignment[("l", i)], set()).add(i)
    return {frozenset(v) for v in groups.values()}


def test_clustering_recovery():
    """Planted classes with <=3% noise recover at tau=0.9 in >=99% of 200
    trials; tau=1.0 partitions exactly by grid equality in all trials."""
    with criterion("clustering-recovery"):
        rng = np.random.default_rng(303)
        ks = itertools.cycle(range(2, 21))
        recovered = 0
        exact_equal = 0
        trials = 200
        for _ in range(trials):
            k = next(ks)
            occs, labels = _planted_corpus(rng, k)
            _, assignment = cluster_tokens(occs, ClassifierParams(similarity_threshold=0.9))
            planted = {}
            for i, lab in enumerate(labels):
                planted.setdefault(lab, set()).add(i)
            if _partition(assignment, len(labels)) == {frozenset(v) for v in planted.values()}:
                recovered += 1

            _, exact_assignment = cluster_tokens(occs, ClassifierParams(similarity_threshold=1.0))
            by_grid = {}
            for lid, occ in occs:
                key = occ.raster.ink.tobytes()
                by_grid.setdefault(key, set()).add(occ.index_in_line)
            if _partition(exact_assignment, len(labels)) == {frozenset(v) for v in by_grid.values()}:
                exact_equal += 1
        assert recovered >= 0.99 * trials, f"recovered {recovered}/{trials}"
        assert exact_equal == trials, f"tau=1.0 grid-equality partition failed in {trials - exact_equal} trials"


def test_mirror_detection():
    """10 asymmetric glyphs + exact flips give exactly 10 pairs and no false
    pairs among 50 non-mirror distractors."""
    with criterion("mirror-detection"):
        rng = np.random.default_rng(404)
        tau = 0.95
        params = ClassifierParams(similarity_threshold=tau, mirror_detection_enabled=True)

        def fresh(existing):
            while True:
                g = rng.random((32, 32)) < 0.5
                ng = NormalizedGlyph(32, g)
                if glyph_similarity(ng, NormalizedGlyph(32, np.fliplr(g).copy())) >= 0.8:
                    continue
                if any(
                    glyph_similarity(ng, NormalizedGlyph(32, e)) >= 0.8
                    or glyph_similarity(ng, NormalizedGlyph(32, np.fliplr(e).copy())) >= 0.8
                    for e in existing
                ):
                    continue
                return g

        grids = []
        for _ in range(10):
            g = fresh(grids)
            grids.extend([g, np.fliplr(g).copy()])
        planted_pairs = [(i * 2, i * 2 + 1) for i in range(10)]
        for _ in range(50):
            grids.append(fresh(grids))
        occs = [("l", make_occurrence(g, index=i)) for i, g in enumerate(grids)]
        classes, _ = cluster_tokens(occs, ClassifierParams(similarity_threshold=1.0))
        pairs = detect_mirror_pairs(classes, params)
        assert pairs == planted_pairs, f"expected exactly the 10 planted pairs, got {pairs}"


def test_pairing_scorer_exhaustive():
    """score = fixed-point fraction for every permutation of sizes 2..6,
    and 6 correct of 12 scores 0.5, reported as 6/12."""
    with criterion("pairing-scorer-exhaustive"):
        for n in range(2, 7):
            letters = list(string.ascii_uppercase[:n])
            key = {i: letters[i] for i in range(n)}
            for perm in itertools.permutations(range(n)):
                parsed = {i: letters[perm[i]] for i in range(n)}
                fixed_points = sum(1 for i in range(n) if perm[i] == i)
                got = score_pairing(parsed, key)
                assert got.accuracy == fixed_points / n
                assert (got.correct, got.total) == (fixed_points, n)

        letters = list(string.ascii_uppercase[:12])
        key = {i: letters[i] for i in range(12)}
        response = "\n".join(
            f"token_{i}: {letters[i] if i < 6 else letters[(i + 3) % 12]}" for i in range(12)
        )
        parsed = parse_answers(response, "match")
        got = score_pairing(parsed.value, key)
        assert got.accuracy == 0.5
        assert got.as_count() == "6/12"


def test_transliteration_scorer_oracle():
    """Matches an independent DP oracle on 10,000 random pairs exactly."""
    with criterion("transliteration-scorer-oracle"):

        def dp_oracle(a, b):
            dp = list(range(len(b) + 1))
            for i in range(1, len(a) + 1):
                prev, dp[0] = dp[0], i
                for j in range(1, len(b) + 1):
                    prev, dp[j] = dp[j], min(dp[j] + 1, dp[j - 1] + 1, prev + (a[i - 1] != b[j - 1]))
            return dp[len(b)]

        rnd = random.Random(505)
        alphabet = "abcde "
        for _ in range(10000):
            pred = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(0, 12)))
            gold = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(1, 12)))
            ng = " ".join(gold.lower().split())
            if not ng:
                continue
            np_ = " ".join(pred.lower().split())
            expected = 1.0 - dp_oracle(np_, ng) / max(len(np_), len(ng))
            assert score_transliteration(pred, gold) == expected


def test_description_validator_boundary():
    """Accepts exactly <= 35 words and rejects 36."""
    with criterion("description-validator"):
        for n in range(1, 36):
            assert validate_description(" ".join(["w"] * n)).ok
        check = validate_description(" ".join(["w"] * 36))
        assert not check.ok and check.word_count == 36
        assert not validate_description("").ok


def _pipeline_outputs(tmp_path, tag, seed):
    rng = np.random.default_rng(606)  # same patterns for both runs
    src = tmp_path / f"src_{tag}"
    src.mkdir()
    patterns = [make_pattern(rng) for _ in range(10)]
    image_paths = []
    for li in range(2):
        p = src / f"line_{li}.png"
        write_line_png(p, patterns[li * 5 : (li + 1) * 5])
        image_paths.append(p)
    proj = tmp_path / f"proj_{tag}"
    assert main(["--project", str(proj), "segment"] + [str(p) for p in image_paths]) == 0
    assert main(["--project", str(proj), "classify", "--tau", "1.0"]) == 0
    k = len(json.loads((proj / "inventory.json").read_text())["classes"])
    assert k == 10
    rows = "\n".join(f"{i},synthetic glyph number {i} with a marked corner" for i in range(k))
    (proj / "descriptions.csv").write_text("class_id,description\n" + rows + "\n")
    assert main(["--project", str(proj), "pairing", "--seed", str(seed)]) == 0
    config = proj / "eval.json"
    config.write_text(json.dumps({"backends": {"mock40": {"type": "mock", "mode": "accuracy", "accuracy": 0.4}}}))
    bundle = str(proj / "runs" / "bundles" / "description-pairing.picture.json")
    assert (
        main(
            ["--project", str(proj), "--config", str(config), "eval", bundle, "--backend", "mock40", "--seed", str(seed)]
        )
        == 0
    )
    records = proj / "runs" / "records.jsonl"
    report = proj / "runs" / "report.json"
    assert main(["--project", str(proj), "score", str(records), "--report", str(report)]) == 0
    return records.read_bytes(), report.read_bytes(), records


def test_end_to_end_determinism_and_report_shape(tmp_path, capsys):
    """Identical seeds give byte-identical records and report; a scripted
    40%-accurate mock shows up as 40.0% in the rendered report."""
    with criterion("end-to-end-determinism"):
        a_records, a_report, records_path = _pipeline_outputs(tmp_path, "a", seed=9)
        b_records, b_report, _ = _pipeline_outputs(tmp_path, "b", seed=9)
        assert a_records == b_records, "records differ between identical runs"
        assert a_report == b_report, "reports differ between identical runs"
        report = aggregate_report(read_records(records_path))
        assert report.overall["pairing_accuracy"] == pytest.approx(0.4)
        assert report.overall["pairing_counts"] == "4/10"
        assert "40.0%" in report.render_table()


def test_primary_runs_without_secondary(tmp_path, rng):
    """The whole primary surface works with no UI bundle built."""
    with criterion("primary-standalone"):
        from fastapi.testclient import TestClient

        from glyphforge.service import create_app
        from test_project import build_project

        layout, _ = build_project(tmp_path, rng, lines=1)
        app = create_app(layout.root, ui_dir=tmp_path / "definitely-missing-dist")
        client = TestClient(app)
        assert client.get("/api/lines").status_code == 200
        assert client.get("/").status_code == 200
