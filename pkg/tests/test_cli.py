import subprocess
import sys

import pytest

from morphcf import engine
from morphcf.cli import main
from morphcf.cohort import FilterClause
from morphcf.dataio import Dataset, digest_of_tree
from morphcf.gateway import PredictionGateway

ECHO_09 = (
    f"{sys.executable} -u -c \"import sys,json\n"
    "for line in sys.stdin:\n"
    "    d=json.loads(line)\n"
    "    print(json.dumps({'id': d['id'], 'probability': 0.9}))\""
)


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def cli_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    assert run_cli("gen", "--subjects", "30", "--seed", "9", "--out", str(out)) == 0
    return out


@pytest.fixture(scope="module")
def id_files(cli_dataset, tmp_path_factory):
    ds = Dataset.load(cli_dataset)
    ones = [r.id for r in ds.records if r.predicted_label == 1]
    zeros = [r.id for r in ds.records if r.predicted_label == 0]
    d = tmp_path_factory.mktemp("ids")
    (d / "targets.txt").write_text("\n".join(ones[:5]) + "\n")
    (d / "sources.txt").write_text("\n".join(zeros[:8]) + "\n")
    return d / "targets.txt", d / "sources.txt"


def test_gen_deterministic(tmp_path):
    assert run_cli("gen", "--subjects", "6", "--seed", "3", "--out", str(tmp_path / "a")) == 0
    assert run_cli("gen", "--subjects", "6", "--seed", "3", "--out", str(tmp_path / "b")) == 0
    assert digest_of_tree(tmp_path / "a") == digest_of_tree(tmp_path / "b")


def test_gen_validation_exit_code(tmp_path, capsys):
    assert run_cli("gen", "--subjects", "1", "--seed", "3", "--out", str(tmp_path / "x")) == 2
    assert capsys.readouterr().err.startswith("error: validation:")


def test_missing_dataset_exit_code(tmp_path, capsys):
    code = run_cli("summarize", "--run", str(tmp_path / "missing"))
    assert code == 3
    assert capsys.readouterr().err.startswith("error: io:")


def test_recombine_and_summarize(cli_dataset, id_files, tmp_path):
    targets, sources = id_files
    run_dir = tmp_path / "run"
    assert run_cli(
        "recombine", "--dataset", str(cli_dataset), "--targets", str(targets),
        "--sources", str(sources), "--segments", "all", "--out", str(run_dir),
    ) == 0
    assert (run_dir / "run.json").exists()
    lines = (run_dir / "results.jsonl").read_text().strip().splitlines()
    assert len(lines) == 5 * 8 * 7

    csv_lines = (run_dir / "summary.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "segments,counterfactuals,unchanged,proportion"
    assert len(csv_lines) == 1 + 7


def test_cli_matches_library(cli_dataset, id_files, tmp_path, capsys):
    targets, sources = id_files
    run_dir = tmp_path / "run"
    run_cli("recombine", "--dataset", str(cli_dataset), "--targets", str(targets),
            "--sources", str(sources), "--segments", "rv_cavity", "--out", str(run_dir))
    capsys.readouterr()
    assert run_cli("summarize", "--run", str(run_dir)) == 0
    cli_csv = capsys.readouterr().out

    ds = Dataset.load(cli_dataset)
    c = ds.manifest.constants
    gw = PredictionGateway(alpha=c["alpha"], tau_c=c["tau_c"])
    t_ids = [line for line in targets.read_text().splitlines() if line]
    s_ids = [line for line in sources.read_text().splitlines() if line]
    from morphcf.core import SegmentSelection

    artifact = engine.run(t_ids, s_ids, [SegmentSelection(frozenset({3}))], gw, ds)
    assert cli_csv == engine.summary_csv(engine.summarize(artifact), ds.schema)


def test_summarize_by_matches_subgroup_oracle(cli_dataset, id_files, tmp_path, capsys):
    targets, sources = id_files
    run_dir = tmp_path / "run"
    run_cli("recombine", "--dataset", str(cli_dataset), "--targets", str(targets),
            "--sources", str(sources), "--segments", "all", "--out", str(run_dir))
    capsys.readouterr()
    assert run_cli("summarize", "--run", str(run_dir), "--by", "age=60:70") == 0
    cli_csv = capsys.readouterr().out

    ds = Dataset.load(cli_dataset)
    c = ds.manifest.constants
    gw = PredictionGateway(alpha=c["alpha"], tau_c=c["tau_c"])
    artifact = engine.read_run(run_dir, ds)
    rows = engine.subgroup_summarize(artifact, FilterClause("age", lo=60, hi=70), ds)
    assert cli_csv == engine.summary_csv(rows, ds.schema)


def test_eval_seg(cli_dataset, id_files, tmp_path, capsys):
    targets, sources = id_files
    run_dir = tmp_path / "run"
    run_cli("recombine", "--dataset", str(cli_dataset), "--targets", str(targets),
            "--sources", str(sources), "--segments", "all", "--out", str(run_dir))
    capsys.readouterr()
    out_csv = tmp_path / "fidelity.csv"
    assert run_cli("eval-seg", "--run", str(run_dir), "--sample", "10",
                   "--seed", "4", "--out", str(out_csv)) == 0
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0] == "label,dice,expected_px,observed_px,intersection_px"
    assert len(lines) == 4


def test_predict_with_external_model(tmp_path, capsys):
    run_cli("gen", "--subjects", "4", "--seed", "8", "--out", str(tmp_path / "ds"))
    assert run_cli("predict", "--dataset", str(tmp_path / "ds"),
                   "--model", f"cmd:{ECHO_09}") == 0
    ds = Dataset.load(tmp_path / "ds")
    assert all(r.probability == 0.9 and r.predicted_label == 1 for r in ds.records)


def test_transport_failure_exit_code(tmp_path, capsys):
    run_cli("gen", "--subjects", "3", "--seed", "8", "--out", str(tmp_path / "ds"))
    bad = f"{sys.executable} -c \"import sys; sys.exit(1)\""  # dies before answering
    code = run_cli("predict", "--dataset", str(tmp_path / "ds"), "--model", f"cmd:{bad}")
    assert code == 4
    assert capsys.readouterr().err.startswith("error: transport:")


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "morphcf.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "recombine" in proc.stdout
