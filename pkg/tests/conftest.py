from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def synthetic_log_lines(motes=(1, 6, 9), hours=96, seed=7, every_s=300, skip_hours=(30,)):
    """Intel-lab style rows: a daily temperature cycle per mote plus noise.

    ``skip_hours`` are hour offsets with no readings (they become gaps). A
    few malformed rows are mixed in.
    """
    rng = np.random.default_rng(seed)
    start = datetime(2004, 2, 28, 0, 0, 0)
    lines = []
    epoch = 0
    for step in range(hours * 3600 // every_s):
        t = start + timedelta(seconds=step * every_s)
        if (step * every_s) // 3600 in skip_hours:
            continue
        epoch += 1
        for mote in motes:
            hour = step * every_s / 3600
            temp = 20 + mote * 0.1 + 3 * np.sin(2 * np.pi * hour / 24) + rng.normal(0, 0.3)
            if mote == 6 and step % 97 == 0:
                temp += 8.0
            ts = t + timedelta(microseconds=int(rng.integers(0, 999_999)))
            lines.append(f"{ts:%Y-%m-%d %H:%M:%S.%f} {epoch} {mote} {temp:.4f} "
                         f"{40 + rng.normal(0, 1):.4f} {45.08:.2f} {2.69 - step * 1e-5:.5f}")
    lines.insert(5, "2004-02-28 00:10:00.1 3 6 19.1")
    lines.insert(9, "2004-02-28 00:10:00.1 3 77 19.1 38.1 45.08 2.68")
    return lines


@pytest.fixture
def synthetic_log(tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("\n".join(synthetic_log_lines()) + "\n")
    return path


@pytest.fixture
def intel_head_lines():
    return (FIXTURES / "intel_head.txt").read_text().splitlines()
