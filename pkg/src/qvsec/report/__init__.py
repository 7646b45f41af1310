from .charts import PALETTE, color_for, heatmap_svg, qv_curve_svg, scatter_svg, separator_count
from .svg import Svg, read_metadata
from .tables import (CsvSchemaError, centroids_csv, curve_csv, elbow_csv, membership_csv,
                     read_curve_csv, read_scan_csv, read_summary_csv, scan_csv, summary_csv, to_csv)

__all__ = [
    "PALETTE", "CsvSchemaError", "Svg", "centroids_csv", "color_for", "curve_csv", "elbow_csv",
    "heatmap_svg", "membership_csv", "qv_curve_svg", "read_curve_csv", "read_metadata", "read_scan_csv",
    "read_summary_csv", "scan_csv", "scatter_svg", "separator_count", "summary_csv", "to_csv",
]
