"""Figure rendering for simulation CSV logs.

Consumes only files (trajectory and field CSVs written by the simulation
package); no in-process coupling, so figures can be regenerated from any
archived run.  Three figure kinds: a trajectory with a shaded uncertainty
band, a scalar-field heatmap panel with optional landmark markers, and a
multi-run comparison time series against a shaded safe range.
"""

from trajplots.render import (
    PlotJob,
    read_field_csv,
    read_trajectory_csv,
    render,
)

__all__ = ["PlotJob", "render", "read_trajectory_csv", "read_field_csv"]
