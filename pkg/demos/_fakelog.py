"""Writes an Intel-lab formatted log with a few misbehaving motes, for the demos."""

from datetime import datetime, timedelta

import numpy as np


def write_fake_log(path, motes=range(1, 13), days=10, seed=0):
    rng = np.random.default_rng(seed)
    start = datetime(2004, 2, 28)
    with open(path, "w") as fh:
        for step in range(days * 24 * 120):  # one reading every 30 s
            t = start + timedelta(seconds=30 * step)
            hour = step / 120
            for mote in motes:
                if rng.random() < 0.3:  # radio losses
                    continue
                temp = 21 + 0.2 * mote + 2.5 * np.sin(2 * np.pi * hour / 24) + rng.normal(0, 0.2)
                if mote in (3, 6) and int(hour) % 37 == 5:
                    temp += 6 + mote                       # thermal spike
                if mote == 6 and int(hour) % 53 == 11:
                    temp -= 9                              # sudden drop
                fh.write(f"{t:%Y-%m-%d %H:%M:%S.%f} {step} {mote} {temp:.4f} "
                         f"{38 + rng.normal(0, 1):.4f} 45.08 {2.7 - step * 2e-6:.5f}\n")
        fh.write("2004-03-01 00:59:16.02785 2 6 19.98 37.09\n")
