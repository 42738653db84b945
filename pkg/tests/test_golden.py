"""Byte-for-byte comparison of CLI tables with the files in tests/golden.

Regenerate after an intended output change with
``python3 tests/test_golden.py``.
"""

import sys
from pathlib import Path

import pytest

from mgramp.cli import main

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"
INST = str(HERE / "data" / "tiny_instance.json")
FEEDER = str(HERE / "data" / "tiny_feeder.json")

CASES = {
    "tiny_schedule": (["schedule", INST, "--feeder", FEEDER, "--ramp-cap", "auto"],
                      ["tiny_schedule.csv", "tiny_schedule_utility.csv"]),
    "tiny_capability": (["capability", INST], ["tiny_capability.csv"]),
    "tiny_line_sweep": (["capability", INST, "--sweep", "2:10:2"], ["tiny_line_sweep.csv"]),
    "tiny_ramp_sweep": (["sweep-ramp", INST, "--feeder", FEEDER, "--deltas", "0,0.5,1,2,4",
                         "--ramp-cap", "3"], ["tiny_ramp_sweep.csv"]),
    "bundled_delta2": (["schedule", "bundled", "--feeder", "bundled", "--delta", "2"],
                       ["bundled_delta2.csv", "bundled_delta2_utility.csv"]),
}


def produce(name, outdir):
    argv, files = CASES[name]
    Path(outdir).mkdir(parents=True, exist_ok=True)
    main(argv + ["-o", str(Path(outdir) / files[0]), "--workers", "1"])
    return {f: (Path(outdir) / f).read_bytes() for f in files}


@pytest.mark.parametrize("name", sorted(CASES))
def test_matches_golden(name, tmp_path, capsys):
    first = produce(name, tmp_path / "a")
    second = produce(name, tmp_path / "b")
    assert first == second
    for fname, data in first.items():
        assert data == (GOLDEN / fname).read_bytes(), fname


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    for case in sorted(CASES):
        produce(case, GOLDEN)
    sys.exit(0)
