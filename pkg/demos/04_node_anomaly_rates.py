# %% [markdown]
# # Node-wise anomaly rates
#
# Every node gets its own bins and matrix fitted on the first 70% of its
# hours, and is scored on the remaining 30%. Rates are written as CSV for
# plotting elsewhere.

# %%
import tempfile
from pathlib import Path

from _fakelog import write_fake_log

from wsnmarkov.evaluation import rank_nodes, write_node_rates_csv, write_ranking_csv
from wsnmarkov.ingestion import motes_in, read_log
from wsnmarkov.markov import DetectorConfig
from wsnmarkov.pipeline import Split, detect_nodes, fit_model, rates_from_results, series_for_nodes

work = Path(tempfile.mkdtemp())
write_fake_log(work / "data.txt")
records, _ = read_log(work / "data.txt")
series = series_for_nodes(records, motes_in(records), "temperature", 3600)

# %%
split = Split(train_fraction=0.7)
template = fit_model(split.apply(series[6])[0], k=5, config=DetectorConfig(theta=0.05))
results = detect_nodes(series, template, split, refit=True, jobs=4)
rates, windows, anomalies = rates_from_results(results)
for mote in sorted(rates):
    print(f"mote {mote:2d}: {anomalies[mote]:3d}/{windows[mote]:3d} = {rates[mote]:5.2f}%")

# %%
top, bottom = rank_nodes(rates, n=5)
print("highest:", top)
print("lowest: ", bottom)
write_node_rates_csv(rates, windows, anomalies, work / "node_rates.csv")
write_ranking_csv(rates, work / "node_ranking.csv")
print("wrote", work / "node_rates.csv")
