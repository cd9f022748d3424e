"""
Comparison table export: JSON, styled Excel workbook and rendered PNG
Best value of each metric column is set in bold.
"""
import io
import json
from pathlib import Path
from typing import Optional, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import openpyxl
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side

from app.models.evaluation import ComparisonTable, TableRow


def _fmt(value: Optional[float], std: Optional[float] = None) -> str:
    if value is None:
        return "-"
    return f"{value:.3f} ± {std:.3f}" if std is not None else f"{value:.3f}"


class TableExporter:
    """
    Writes benchmark and ablation tables.
    """

    HEADERS = [
        "Model",
        "MAE",
        "RMSE",
        "Runs",
        "Parameters",
        "Trainable",
        "Reference MAE",
        "Reference RMSE",
        "Status",
    ]

    # Column widths for readability
    COLUMN_WIDTHS = {
        'A': 24,   # Model
        'B': 10,   # MAE
        'C': 10,   # RMSE
        'D': 8,    # Runs
        'E': 14,   # Parameters
        'F': 14,   # Trainable
        'G': 15,   # Reference MAE
        'H': 15,   # Reference RMSE
        'I': 40    # Status
    }

    def __init__(self):
        self.header_fill = PatternFill(
            start_color="366092",
            end_color="366092",
            fill_type="solid"
        )
        self.header_font = Font(bold=True, color="FFFFFF", size=11)
        self.border = Border(
            left=Side(style='thin'),
            right=Side(style='thin'),
            top=Side(style='thin'),
            bottom=Side(style='thin')
        )

    # ============ Excel ============

    def to_workbook(self, table: ComparisonTable) -> bytes:
        """
        Build an .xlsx workbook for a table.

        Args:
            table: Comparison table

        Returns:
            Excel file as bytes
        """
        wb = openpyxl.Workbook()
        ws = wb.active
        ws.title = table.title[:31] or "Results"

        self._write_headers(ws)
        best = {"mae": table.best("mae"), "rmse": table.best("rmse")}
        for row, entry in enumerate(table.rows, start=2):
            self._write_row(ws, row, entry, best)
        self._set_column_widths(ws)

        output = io.BytesIO()
        wb.save(output)
        output.seek(0)
        return output.getvalue()

    def _write_headers(self, ws) -> None:
        for col, header in enumerate(self.HEADERS, start=1):
            cell = ws.cell(row=1, column=col)
            cell.value = header
            cell.fill = self.header_fill
            cell.font = self.header_font
            cell.alignment = Alignment(horizontal='center', vertical='center')
            cell.border = self.border

    def _write_row(self, ws, row: int, entry: TableRow, best: dict) -> None:
        ws.cell(row=row, column=1, value=entry.name).border = self.border
        for col, column in ((2, "mae"), (3, "rmse")):
            cell = ws.cell(row=row, column=col, value=getattr(entry, column))
            cell.number_format = '0.000'
            cell.border = self.border
            if best[column] == entry.name:
                cell.font = Font(bold=True)
        ws.cell(row=row, column=4, value=entry.runs).border = self.border
        ws.cell(row=row, column=5, value=entry.parameters).border = self.border
        ws.cell(row=row, column=6, value=entry.trainable_parameters).border = self.border
        for col, value in ((7, entry.reference_mae), (8, entry.reference_rmse)):
            cell = ws.cell(row=row, column=col, value=value)
            cell.number_format = '0.000'
            cell.border = self.border
        status = entry.status if entry.error is None else f"{entry.status}: {entry.error}"
        ws.cell(row=row, column=9, value=status).border = self.border

    def _set_column_widths(self, ws) -> None:
        for col, width in self.COLUMN_WIDTHS.items():
            ws.column_dimensions[col].width = width

    # ============ JSON and PNG ============

    def to_json(self, table: ComparisonTable) -> str:
        payload = table.model_dump(mode="json")
        payload["best"] = {"mae": table.best("mae"), "rmse": table.best("rmse")}
        return json.dumps(payload, indent=2)

    def render_png(self, table: ComparisonTable, path: Union[str, Path]) -> Path:
        """Matplotlib rendering of name/MAE/RMSE/status with bold best values"""
        path = Path(path)
        cells = [
            [r.name, _fmt(r.mae, r.mae_std), _fmt(r.rmse, r.rmse_std), r.status]
            for r in table.rows
        ]
        fig, ax = plt.subplots(figsize=(8, 0.5 + 0.4 * len(cells)))
        ax.axis("off")
        rendered = ax.table(cellText=cells, colLabels=["Model", "MAE", "RMSE", "Status"], loc="center")
        rendered.auto_set_font_size(False)
        rendered.set_fontsize(10)
        for col in range(4):
            rendered[0, col].get_text().set_fontweight("bold")
        for col, column in ((1, "mae"), (2, "rmse")):
            name = table.best(column)
            for i, r in enumerate(table.rows, start=1):
                if r.name == name:
                    rendered[i, col].get_text().set_fontweight("bold")
        ax.set_title(table.title)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
        return path

    def export(self, table: ComparisonTable, out_dir: Union[str, Path], stem: str) -> dict[str, Path]:
        """
        Write <stem>.json, <stem>.xlsx and <stem>.png.

        Returns:
            Mapping format -> path written
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "json": out_dir / f"{stem}.json",
            "xlsx": out_dir / f"{stem}.xlsx",
            "png": out_dir / f"{stem}.png",
        }
        paths["json"].write_text(self.to_json(table), encoding="utf-8")
        paths["xlsx"].write_bytes(self.to_workbook(table))
        self.render_png(table, paths["png"])
        return paths


# Singleton instance
_table_exporter: Optional[TableExporter] = None


def get_table_exporter() -> TableExporter:
    """Get or create the table exporter singleton"""
    global _table_exporter
    if _table_exporter is None:
        _table_exporter = TableExporter()
    return _table_exporter
