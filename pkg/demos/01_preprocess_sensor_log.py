# %% [markdown]
# # Parsing and resampling a sensor log
#
# Pass the path of the Intel Berkeley lab `data.txt` as the first argument
# to run this on the real deployment; without it a small log in the same
# format is generated.

# %%
import sys
import tempfile
from pathlib import Path

from _fakelog import write_fake_log

from wsnmarkov.ingestion import build_series, parse_record, read_log, series_to_csv_text

if len(sys.argv) > 1:
    log_path = Path(sys.argv[1])
else:
    log_path = Path(tempfile.mkdtemp()) / "data.txt"
    write_fake_log(log_path)

# %% [markdown]
# A single row parses into a record; a broken row comes back as a rejection
# value carrying its reason.

# %%
print(parse_record("2004-02-28 00:59:16.02785 3 1 19.9884 37.0933 45.08 2.69964"))
print(parse_record("2004-02-28 00:59:16.02785 3 1 19.9884").reason.value)

# %%
records, summary = read_log(log_path)
print(summary.to_dict())

# %% [markdown]
# Hourly means for mote 6. Hours without any reading stay as gaps.

# %%
series = build_series(records, mote_id=6, feature="temperature", interval=3600)
print(f"{len(series)} hourly points, {len(series.gaps)} gaps")
print(series_to_csv_text(series).splitlines()[:6])
