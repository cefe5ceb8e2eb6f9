"""Report figures written to files through the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from .accounting import CATEGORIES  # noqa: E402


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_mean_prices(prices: pd.DataFrame, path: str | Path, title: str = "") -> Path:
    """Bar chart of the time-averaged price per AC node; ``prices`` is a prices CSV frame."""
    means = prices.groupby("node")["price"].mean().sort_values()
    means = means[~means.index.str.endswith("-DC")]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(means.index, means.values, color="#4c72b0")
    ax.set_ylabel("EUR/MWh")
    ax.set_title(title or "Mean node price")
    ax.tick_params(axis="x", rotation=60)
    return _save(fig, Path(path))


def plot_build_schedule(schedule: pd.DataFrame, path: str | Path) -> Path:
    """Built capacity per asset type and year."""
    df = schedule.copy()
    lines = df[df["variable"] == "alpha"].groupby("year")["value"].sum().rename("lines built")
    caps = df[df["variable"] != "alpha"].groupby(["year", "asset_type"])["value"].sum().unstack(fill_value=0.0)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    if len(caps):
        caps.plot(kind="bar", ax=ax1)
    ax1.set_ylabel("MW / MWh")
    ax1.set_title("Capacity")
    if len(lines):
        lines.plot(kind="bar", ax=ax2, color="#55a868")
    ax2.set_title("Candidate lines built")
    return _save(fig, Path(path))


def plot_redispatch_shares(shares: dict, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 3.5))
    bottom = 0.0
    for cat in CATEGORIES:
        v = shares.get(cat, 0.0)
        ax.bar(["re-dispatch"], [v], bottom=bottom, label=cat)
        bottom += v
    ax.set_ylabel("%")
    ax.legend(fontsize=8)
    return _save(fig, Path(path))


def plot_welfare(summary: pd.DataFrame, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(summary["name"], summary["social_welfare"], color="#8172b2")
    ax.set_ylabel("Social welfare")
    return _save(fig, Path(path))
