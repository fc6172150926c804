import subprocess
import sys

from conftest import ROOT


def run_script(name, *args):
    return subprocess.run([sys.executable, str(ROOT / "scripts" / name), *args],
                          cwd=ROOT, capture_output=True, text=True, timeout=300)


def test_reproduce_accuracy(tmp_path):
    proc = run_script("reproduce_accuracy.py", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    assert len((tmp_path / "accuracy.csv").read_text().splitlines()) == 4
    assert {p.name for p in tmp_path.glob("*.svg")} == {"iris.svg", "digits.svg", "breast_cancer.svg"}


def test_run_benchmarks_quick(tmp_path):
    proc = run_script("run_benchmarks.py", "--quick", "--repetitions", "1", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    assert len(list(tmp_path.glob("*.csv"))) == 6
