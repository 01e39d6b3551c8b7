"""
SVG line plots of aggregated return curves
"""
import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

logger = logging.getLogger(__name__)

# fixed ids and no timestamp keep repeated renders byte-identical
matplotlib.rcParams["svg.hashsalt"] = "smooth-rl"

LABELS = {"legendre_lsvi": "Leg", "monomial_lsvi": "Poly", "legendre_eleanor": "Leg-Eleanor", "onehot_lsvi": "Tab"}


def curve_label(algorithm: str, degree: int) -> str:
    """Leg(3), Poly(4), ..."""
    prefix = LABELS.get(algorithm, algorithm)
    return prefix if algorithm == "onehot_lsvi" else f"{prefix}({degree})"


def plot_curves(aggregate: pd.DataFrame, out_path: Union[str, Path], title: Optional[str] = None) -> Path:
    """
    Draw mean episodic return with its confidence band, one line per (algorithm, degree)

    Args:
        aggregate: Rows of env, algo, degree, episode, mean, ci_lo, ci_hi
        out_path: Destination .svg file
        title: Figure title (defaults to the environment names)

    Returns:
        Path of the written file
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (env, algorithm, degree), curve in aggregate.groupby(["env", "algo", "degree"], sort=False):
        curve = curve.sort_values("episode")
        label = curve_label(algorithm, degree)
        if aggregate["env"].nunique() > 1:
            label = f"{env}: {label}"
        line, = ax.plot(curve["episode"], curve["mean"], label=label, linewidth=1.2)
        ax.fill_between(curve["episode"], curve["ci_lo"], curve["ci_hi"], color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("Episode")
    ax.set_ylabel("Episodic return")
    ax.set_title(title or ", ".join(str(env) for env in aggregate["env"].unique()))
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote plot {out_path}")
    return out_path
