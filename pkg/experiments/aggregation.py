"""
Sweep aggregation: per (estimator, budget) error statistics and subset
selection frequencies. Rows are sorted before reduction, so results do not
depend on the order trials finished in.
"""
import pandas as pd

QUANTILES = (0.05, 0.5, 0.95)

SUMMARY_COLUMNS = [
    "estimator",
    "budget",
    "trials",
    "mean_error",
    "q05_error",
    "q50_error",
    "q95_error",
    "mean_sup_error",
    "mean_m",
    "mean_n_exploit",
    "max_spent",
]


def trial_frame(rows) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows))
    if frame.empty:
        return frame
    return frame.sort_values(["estimator", "budget", "trial"], kind="stable").reset_index(drop=True)


def summarize(rows) -> pd.DataFrame:
    """
    One row per (estimator, budget).

    Columns: trials, mean and 5/50/95% quantiles of the weighted L2 error,
    mean sup error, mean m and N, largest spent budget, and for d=1 the mean
    relative errors of the risk metrics (``mean_rel_*``).
    """
    frame = trial_frame(rows)
    if frame.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    records = []
    rel_columns = sorted(column for column in frame.columns if column.startswith("rel_"))
    for (estimator, budget), group in frame.groupby(["estimator", "budget"], sort=True):
        errors = group["error"].astype(float)
        q05, q50, q95 = (float(errors.quantile(q)) for q in QUANTILES)
        record = {
            "estimator": estimator,
            "budget": budget,
            "trials": int(len(group)),
            "mean_error": float(errors.mean()),
            "q05_error": q05,
            "q50_error": q50,
            "q95_error": q95,
            "mean_sup_error": float(group["sup_error"].astype(float).mean()),
            "mean_m": float(pd.to_numeric(group["m"]).mean()) if group["m"].notna().any() else None,
            "mean_n_exploit": float(pd.to_numeric(group["n_exploit"]).mean()) if group["n_exploit"].notna().any() else None,
            "max_spent": float(group["spent"].max()),
        }
        for column in rel_columns:
            values = pd.to_numeric(group[column], errors="coerce")
            record[f"mean_{column}"] = float(values.mean()) if values.notna().any() else None
        records.append(record)
    return pd.DataFrame(records, columns=SUMMARY_COLUMNS + [f"mean_{column}" for column in rel_columns])


def selection_frequencies(rows) -> pd.DataFrame:
    """Share of trials selecting each subset, per cvMDL estimator and budget."""
    frame = trial_frame(rows)
    columns = ["estimator", "budget", "subset", "count", "frequency"]
    if frame.empty:
        return pd.DataFrame(columns=columns)
    frame = frame[frame["subset"].astype(str) != ""]
    if frame.empty:
        return pd.DataFrame(columns=columns)
    counts = frame.groupby(["estimator", "budget", "subset"], sort=True).size().rename("count").reset_index()
    totals = counts.groupby(["estimator", "budget"])["count"].transform("sum")
    counts["frequency"] = counts["count"] / totals
    return counts[columns]


def allocation_curve(rows) -> pd.DataFrame:
    """Mean and 5/50/95% error quantiles per exploration size m."""
    frame = pd.DataFrame(list(rows))
    columns = ["m", "trials", "mean_error", "q05_error", "q50_error", "q95_error"]
    if frame.empty:
        return pd.DataFrame(columns=columns)
    records = []
    for m, group in frame.sort_values(["m", "trial"], kind="stable").groupby("m", sort=True):
        errors = group["error"].astype(float)
        q05, q50, q95 = (float(errors.quantile(q)) for q in QUANTILES)
        records.append(
            {"m": int(m), "trials": int(len(group)), "mean_error": float(errors.mean()), "q05_error": q05, "q50_error": q50, "q95_error": q95}
        )
    return pd.DataFrame(records, columns=columns)
