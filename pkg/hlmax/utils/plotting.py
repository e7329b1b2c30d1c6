"""
Plotting
Self-contained SVG figures for p-sweeps and field profiles
"""
import io
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from hlmax.utils.io_utils import write_atomic
from hlmax.utils.logger import setup_logger

logger = setup_logger(__name__)

# 800 x 500 px viewBox at 72 dpi
FIGSIZE = (800 / 72, 500 / 72)
DPI = 72

_RC = {
    "svg.fonttype": "none",
    "svg.hashsalt": "hlmax",
    "font.size": 11,
}


def _render(fig: Figure) -> str:
    buffer = io.StringIO()
    with matplotlib.rc_context(_RC):
        FigureCanvasSVG(fig)
        fig.savefig(buffer, format="svg", metadata={"Date": None, "Creator": None})
    return buffer.getvalue()


def _new_figure(title: str, xlabel: str, ylabel: str):
    fig = Figure(figsize=FIGSIZE, dpi=DPI)
    ax = fig.add_subplot(1, 1, 1)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def sweep_svg(p_values: Sequence[float],
              normalized: Sequence[float],
              maximal: float,
              title: str = "Normalized integral-function vs p") -> str:
    """
    Line plot of normalized I_{p,w}f(x) against log2 p

    Args:
        p_values: Finite exponents (infinite ones are skipped)
        normalized: Normalized values, one per exponent
        maximal: Measured Mf(x), drawn as a horizontal asymptote
        title: Figure title

    Returns:
        SVG document
    """
    pairs = [(math.log2(p), v) for p, v in zip(p_values, normalized) if math.isfinite(p)]
    fig, ax = _new_figure(title, "log2 p", "I / ||w||^(1/p)")

    if pairs:
        xs, ys = zip(*pairs)
        ax.plot(xs, ys, marker="o", color="#1f77b4", label="normalized")
    ax.axhline(maximal, color="#d62728", linestyle="--", label=f"Mf(x) = {maximal:.6g}")
    ax.legend(loc="lower right")
    return _render(fig)


def profile_svg(coords: Sequence[float],
                values: Sequence[float],
                errors: Optional[Sequence[float]] = None,
                title: str = "Profile",
                ylabel: str = "value") -> str:
    """
    Line plot of a field along a geodesic segment

    Args:
        coords: Signed geodesic coordinates
        values: Field values
        errors: Optional error bounds, drawn as a band
        title: Figure title
        ylabel: Y axis label

    Returns:
        SVG document
    """
    fig, ax = _new_figure(title, "geodesic coordinate", ylabel)
    ax.plot(coords, values, color="#1f77b4")
    if errors is not None:
        lo = [v - e for v, e in zip(values, errors)]
        hi = [v + e for v, e in zip(values, errors)]
        ax.fill_between(coords, lo, hi, color="#1f77b4", alpha=0.2, linewidth=0)
    return _render(fig)


def save_svg(svg: str, path: Union[Path, str]):
    """Write an SVG document atomically"""
    write_atomic(path, svg)
    logger.info(f"Plot written to {path}")
