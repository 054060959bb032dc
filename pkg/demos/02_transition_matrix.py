# %% [markdown]
# # Quantile states and the transition matrix

# %%
import tempfile
from pathlib import Path

import numpy as np
from _fakelog import write_fake_log

from wsnmarkov import (ChainSpec, MOTE6_TPM, build_transition_matrix, encode_series, fit_bins,
                       sample_chain)
from wsnmarkov.ingestion import build_series, read_log
from wsnmarkov.markov import TransitionMatrix

log_path = Path(tempfile.mkdtemp()) / "data.txt"
write_fake_log(log_path)
records, _ = read_log(log_path)
series = build_series(records, 6)

# %% [markdown]
# Five equal-mass states. Edges are the 20/40/60/80% quantiles
# (linear interpolation between order statistics).

# %%
binner = fit_bins(series.values, k=5)
print("edges:", np.round(binner.edges, 3))
segments = encode_series(binner, series)
print("segments:", [len(s) for s in segments])
print("state counts:", np.bincount(np.concatenate(segments), minlength=5))

# %%
tpm = build_transition_matrix(segments, k=5)
print(tpm.format_table())

# %% [markdown]
# The reference matrix for an HVAC-adjacent node, and how well 200k sampled
# transitions recover it.

# %%
print(TransitionMatrix.from_probs(MOTE6_TPM).format_table())
seq = sample_chain(ChainSpec(MOTE6_TPM, initial_state=0, seed=1), 200_001)
est = build_transition_matrix([seq], 5)
print("max abs error:", np.abs(est.probs - MOTE6_TPM).max())
