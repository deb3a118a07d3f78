import json
from pathlib import Path

import pytest

from glyphforge.cli import main
from glyphforge.dataset import DescriptionRow, DescriptionTable, PuzzleDocument, Question, ScriptLine

from conftest import make_pattern, write_line_png


def seeded_images(tmp_path, rng, n_lines=2, n_patterns=3, glyphs_per_line=4):
    src = tmp_path / "src_images"
    src.mkdir(exist_ok=True)
    patterns = [make_pattern(rng) for _ in range(n_patterns)]
    paths = []
    for li in range(n_lines):
        picks = [patterns[(li + j) % n_patterns] for j in range(glyphs_per_line)]
        p = src / f"line_{li}.png"
        write_line_png(p, picks)
        paths.append(p)
    return paths


def write_puzzle(proj: Path, n_lines=2, refs_per_line=4):
    doc = PuzzleDocument(
        puzzle_id="cli-puzzle",
        language_name="synthetic",
        script_lines=[ScriptLine(f"line_{i}", tuple(range(refs_per_line))) for i in range(n_lines)],
        questions=[Question("multiple_choice", "Pick one.", "ZQ")],
        unicode_text=[f"ab cd {i}" for i in range(n_lines)],
    )
    path = proj / "puzzles" / "cli-puzzle.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    doc.save(path)
    return path


def write_descriptions(proj: Path, k: int):
    table = DescriptionTable(rows=[DescriptionRow(i, f"synthetic glyph number {i}") for i in range(k)])
    path = proj / "descriptions.csv"
    table.save_csv(path)
    return path


def run_pipeline(proj: Path, images, seed=7):
    assert main(["--project", str(proj), "segment"] + [str(p) for p in images]) == 0
    assert main(["--project", str(proj), "classify", "--tau", "1.0"]) == 0
    inventory = json.loads((proj / "inventory.json").read_text())
    k = len(inventory["classes"])
    puzzle = write_puzzle(proj, n_lines=len(images))
    write_descriptions(proj, k)
    assert main(["--project", str(proj), "build", str(puzzle), "--condition", "placeholder", "--seed", str(seed)]) == 0
    assert main(["--project", str(proj), "build", str(puzzle), "--condition", "picture", "--seed", str(seed)]) == 0
    assert main(["--project", str(proj), "pairing", "--seed", str(seed)]) == 0
    bundles = sorted(str(p) for p in (proj / "runs" / "bundles").glob("*.json"))
    assert main(["--project", str(proj), "eval"] + bundles + ["--backend", "mock", "--seed", str(seed)]) == 0
    assert (
        main(
            [
                "--project",
                str(proj),
                "score",
                str(proj / "runs" / "records.jsonl"),
                "--report",
                str(proj / "runs" / "report.json"),
            ]
        )
        == 0
    )


def test_segment_then_classify_three_distinct_glyphs(tmp_path, rng, capsys):
    images = seeded_images(tmp_path, rng, n_lines=1, n_patterns=3, glyphs_per_line=3)
    proj = tmp_path / "proj"
    assert main(["--project", str(proj), "segment"] + [str(p) for p in images]) == 0
    assert main(["--project", str(proj), "--format", "json", "classify", "--tau", "1.0"]) == 0
    payload = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert payload["classes"] == 3
    assert (proj / "inventory.json").is_file()


def test_full_pipeline_deterministic_across_fresh_projects(tmp_path, rng):
    images = seeded_images(tmp_path, rng)
    trees = []
    for run in ("a", "b"):
        proj = tmp_path / f"proj_{run}"
        run_pipeline(proj, images, seed=7)
        tree = {}
        for p in sorted((proj / "runs").rglob("*")):
            if p.is_file():
                tree[str(p.relative_to(proj))] = p.read_bytes()
        tree["inventory.json"] = (proj / "inventory.json").read_bytes()
        trees.append(tree)
    assert trees[0].keys() == trees[1].keys()
    for key in trees[0]:
        assert trees[0][key] == trees[1][key], f"{key} differs between identical runs"


def test_build_unicode_without_unicode_text_exits_2(tmp_path, rng, capsys):
    images = seeded_images(tmp_path, rng, n_lines=1)
    proj = tmp_path / "proj"
    assert main(["--project", str(proj), "segment"] + [str(p) for p in images]) == 0
    assert main(["--project", str(proj), "classify"]) == 0
    doc = PuzzleDocument(
        puzzle_id="nouni",
        language_name="synthetic",
        script_lines=[ScriptLine("line_0", (0, 1, 2, 3))],
    )
    puzzle = proj / "puzzles" / "nouni.json"
    doc.save(puzzle)
    code = main(["--project", str(proj), "build", str(puzzle), "--condition", "unicode"])
    assert code == 2
    assert "unicode_text" in capsys.readouterr().err


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["definitely-not-a-command"])
    assert exc.value.code == 1


def test_classify_without_segments_exits_2(tmp_path, capsys):
    code = main(["--project", str(tmp_path / "empty"), "classify"])
    assert code == 2
    err = capsys.readouterr().err
    assert "segment" in err  # actionable: names the missing step


def test_build_without_inventory_exits_2(tmp_path, rng, capsys):
    proj = tmp_path / "proj"
    proj.mkdir()
    puzzle = write_puzzle(proj)
    code = main(["--project", str(proj), "build", str(puzzle), "--condition", "placeholder"])
    assert code == 2
    assert "classify" in capsys.readouterr().err


def test_flag_precedence_cli_config_default(tmp_path, rng, capsys):
    images = seeded_images(tmp_path, rng, n_lines=1)
    config = tmp_path / "config.json"
    # config tau merges everything into one class; CLI tau keeps them apart
    config.write_text(json.dumps({"classify": {"tau": 0.05}}))

    def classes_with(argv):
        assert main(argv) == 0
        return json.loads(capsys.readouterr().out.splitlines()[-1])["classes"]

    proj = tmp_path / "p_default"
    assert main(["--project", str(proj), "segment"] + [str(p) for p in images]) == 0
    by_default = classes_with(["--project", str(proj), "--format", "json", "classify"])

    proj2 = tmp_path / "p_config"
    assert main(["--project", str(proj2), "segment"] + [str(p) for p in images]) == 0
    by_config = classes_with(
        ["--project", str(proj2), "--config", str(config), "--format", "json", "classify"]
    )

    proj3 = tmp_path / "p_cli"
    assert main(["--project", str(proj3), "segment"] + [str(p) for p in images]) == 0
    by_cli = classes_with(
        ["--project", str(proj3), "--config", str(config), "--format", "json", "classify", "--tau", "1.0"]
    )

    assert by_config == 1  # config overrides the 0.90 default
    assert by_cli == 3  # CLI overrides config
    assert by_default == 3  # default tau separates the three patterns


def test_config_env_var(tmp_path, rng, capsys, monkeypatch):
    images = seeded_images(tmp_path, rng, n_lines=1)
    config = tmp_path / "config.toml"
    config.write_text("[classify]\ntau = 0.05\n")
    monkeypatch.setenv("GLYPHFORGE_CONFIG", str(config))
    proj = tmp_path / "proj"
    assert main(["--project", str(proj), "segment"] + [str(p) for p in images]) == 0
    assert main(["--project", str(proj), "--format", "json", "classify"]) == 0
    payload = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert payload["classes"] == 1


def test_eval_all_failures_exits_3(tmp_path, rng, capsys):
    images = seeded_images(tmp_path, rng, n_lines=1)
    proj = tmp_path / "proj"
    assert main(["--project", str(proj), "segment"] + [str(p) for p in images]) == 0
    assert main(["--project", str(proj), "classify", "--tau", "1.0"]) == 0
    k = len(json.loads((proj / "inventory.json").read_text())["classes"])
    write_descriptions(proj, k)
    assert main(["--project", str(proj), "pairing", "--seed", "1"]) == 0
    bundle = next((proj / "runs" / "bundles").glob("*.json"))
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"backends": {"broken": {"type": "mock", "mode": "static", "fail_times": 999}}}))
    code = main(
        ["--project", str(proj), "--config", str(config), "eval", str(bundle), "--backend", "broken", "--retries", "0"]
    )
    assert code == 3
    # the failed record was still written, never silently skipped
    records = (proj / "runs" / "records.jsonl").read_text().strip().splitlines()
    assert len(records) == 1
    assert json.loads(records[0])["failed"] is True


def test_unknown_backend_exits_2(tmp_path, rng):
    images = seeded_images(tmp_path, rng, n_lines=1)
    proj = tmp_path / "proj"
    assert main(["--project", str(proj), "segment"] + [str(p) for p in images]) == 0
    code = main(["--project", str(proj), "eval", "nonexistent.json", "--backend", "nope"])
    assert code == 2


def test_score_outputs_report(tmp_path, rng, capsys):
    images = seeded_images(tmp_path, rng, n_lines=1)
    proj = tmp_path / "proj"
    run_pipeline(proj, images, seed=3)
    out = capsys.readouterr().out
    assert "pairing" in out
    report = json.loads((proj / "runs" / "report.json").read_text())
    assert report["overall"]["records"] == 3
    assert report["overall"]["pairing_counts"] is not None


def test_score_missing_records_exits_2(tmp_path, capsys):
    assert main(["--project", str(tmp_path), "score", str(tmp_path / "none.jsonl")]) == 2
    assert "eval" in capsys.readouterr().err
