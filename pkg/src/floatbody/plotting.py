"""SVG figure of a body section: contour solid, water envelope dashed.

Output is byte-reproducible: the SVG id salt is fixed and no creation date
is written.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PARAMS = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 10,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "floatbody",
    "svg.fonttype": "path",
    "figure.figsize": (4.0, 4.0),
}


def envelope_curve(envelope, n=401):
    """Closed envelope in the x-y plane, reflected across x = 0.

    ``(a, b)(sin Phi)`` for Phi in [0, pi/2] traces one quarter; the
    body's mirror symmetry supplies the rest.
    """
    phi = np.sin(np.linspace(0.0, 0.5 * np.pi, n))
    a, b = envelope.a(phi), envelope.b(phi)
    x = np.concatenate([a, -a[::-1]])
    y = np.concatenate([b, b[::-1]])
    return x, y


def plot_section(contour, envelope=None, path=None, title=None):
    """Draw the meridian section (both halves) and the envelope.

    The envelope is skipped when it degenerates to a point (the sphere).
    Returns the figure; with ``path`` it is also written as SVG and closed.
    """
    with plt.rc_context(PARAMS):
        fig, ax = plt.subplots()
        x = np.concatenate([contour.x, -contour.x[::-1]])
        y = np.concatenate([contour.y, contour.y[::-1]])
        ax.plot(x, y, "-", color="k", label="contour")
        if envelope is not None and envelope.delta > 0.0:
            ex, ey = envelope_curve(envelope)
            ax.plot(ex, ey, "--", color="0.35", label="water envelope")
        ax.set_aspect("equal")
        ax.set_xlabel("$x$")
        ax.set_ylabel("$y$")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right", frameon=False, fontsize=7)
        fig.tight_layout()
        if path is not None:
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
    return fig
