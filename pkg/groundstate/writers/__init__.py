"""Writers for CSV tables and YAML reports."""

from groundstate.writers.csv_files import (
    AUDIT_HEADER,
    SCAN_HEADER,
    THETA_HEADER,
    atomic_write_text,
    format_value,
    read_fields_csv,
    scan_rows,
    write_fields_csv,
    write_rows_csv,
    write_trace_csv,
)
from groundstate.writers.reports import render_report, write_report

__all__ = [
    "AUDIT_HEADER",
    "SCAN_HEADER",
    "THETA_HEADER",
    "atomic_write_text",
    "format_value",
    "read_fields_csv",
    "scan_rows",
    "write_fields_csv",
    "write_rows_csv",
    "write_trace_csv",
    "render_report",
    "write_report",
]
