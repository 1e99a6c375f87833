"""Matplotlib renderings of the report artifacts (PNG files next to the CSVs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

UNIT_COLORS = {
    "e": "#8c564b", "n": "#7f4f24", "s": "#e6b422", "w": "#2ca02c",
    "b": "#1f77b4", "f": "#9467bd", "el": "#c5b0d5", "q": "#7f7f7f",
}

_RC = {
    "figure.figsize": (7.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}


def _color(unit):
    return UNIT_COLORS.get(unit, UNIT_COLORS.get(unit[:1], "#333333"))


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)


def plot_additions(plan, path) -> str:
    """Stacked capacity additions per year, one band per unit type."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        years = np.arange(1, plan.years + 1)
        bottom = np.zeros(plan.years)
        for unit in sorted(plan.additions_capacity):
            vals = np.asarray(plan.additions_capacity[unit], dtype=float)
            if not np.any(vals):
                continue
            ax.bar(years, vals, bottom=bottom, label=unit, color=_color(unit),
                   edgecolor="white", linewidth=0.4)
            bottom += vals
        ax.set_xlabel("planning year")
        ax.set_ylabel("capacity added (kW / kWh / kg)")
        ax.set_title("Capacity additions")
        ax.set_xticks(years)
        if bottom.any():
            ax.legend()
        return _save(fig, path)


def plot_cost_breakdown(report, path) -> str:
    """Capital / fuel / O&M NPC per technology for one scenario."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        techs = [t for t, v in report.cost.per_tech.items()
                 if v["capital"] + v["fuel"] + v["om"] > 0]
        x = np.arange(len(techs))
        comps = ("capital", "fuel", "om")
        colors = ("#4c72b0", "#c44e52", "#55a868")
        bottom = np.zeros(len(techs))
        for comp, color in zip(comps, colors):
            vals = np.array([report.cost.per_tech[t][comp] for t in techs]) / 1e6
            ax.bar(x, vals, bottom=bottom, label=comp, color=color)
            bottom += vals
        ax.set_xticks(x)
        ax.set_xticklabels(techs, rotation=20, ha="right")
        ax.set_ylabel("NPC (million $)")
        ax.set_title(f"Cost breakdown, scenario {report.scenario_id}")
        ax.legend()
        return _save(fig, path)


def plot_reductions(rows, path) -> str:
    """Grouped reductions versus BAU across scenarios (cost, O&M, fuel, GHG)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        labels = [r["scenario"] for r in rows]
        metrics = (("total_cost_pct", "total cost"), ("om_pct", "O&M"),
                   ("fuel_pct", "fuel"), ("ghg_pct", "GHG"))
        x = np.arange(len(labels))
        width = 0.2
        for k, (key, name) in enumerate(metrics):
            ax.bar(x + (k - 1.5) * width, [r[key] for r in rows], width, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.axhline(0, color="black", linewidth=0.8)
        ax.set_ylabel("reduction vs BAU (%)")
        ax.set_title("Reductions relative to the base case")
        ax.legend()
        return _save(fig, path)


def plot_dispatch(plan, problem, year: int, path) -> str:
    """Hourly operation for one year: stacked supply, load line, storage states."""
    with plt.rc_context(_RC):
        fig, (ax, ax2) = plt.subplots(
            2, 1, sharex=True, figsize=(8.0, 5.5),
            gridspec_kw={"height_ratios": [3, 1]})
        hours = np.arange(1, plan.hours + 1)
        y = year - 1

        supply = []
        diesel = np.zeros(plan.hours)
        for uid, arr in sorted(plan.dispatch.items()):
            if uid in ("s", "w", "f"):
                supply.append((uid, arr[y]))
            else:
                diesel += arr[y]
        stack = [("diesel", diesel)] + supply
        if plan.batt_discharge is not None:
            stack.append(("batt dch", plan.batt_discharge[y]))
        labels = [name for name, _ in stack]
        ax.stackplot(hours, [v for _, v in stack], labels=labels, alpha=0.85)
        if problem is not None:
            growth = problem.assumptions.load_growth
            load = np.asarray(problem.profiles.load.values) * (1 + growth) ** y
            ax.plot(hours, load, color="black", linewidth=1.2, label="load")
            draw = load.copy()
            if plan.batt_charge is not None:
                draw = draw + plan.batt_charge[y]
            if plan.el_consumption is not None:
                draw = draw + plan.el_consumption[y]
            ax.plot(hours, draw, color="black", linewidth=0.8, linestyle="--",
                    label="load + storage draw")
        ax.set_ylabel("kW")
        ax.set_title(f"Hourly operation, year {year}")
        ax.legend(ncol=3, loc="upper right")

        if plan.batt_soc is not None:
            ax2.plot(hours, plan.batt_soc[y], color=UNIT_COLORS["b"], label="battery kWh")
        if plan.tank_soc is not None:
            ax2.plot(hours, plan.tank_soc[y], color=UNIT_COLORS["q"], label="tank kg")
        ax2.set_xlabel("representative hour")
        ax2.set_ylabel("stored")
        if plan.batt_soc is not None or plan.tank_soc is not None:
            ax2.legend(ncol=2)
        return _save(fig, path)
