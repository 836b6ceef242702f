"""
CSV and JSON export of run results.
"""
import json
from abc import ABC, abstractmethod
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd


class DataExporter(ABC):
    """Abstract base class for result exporters."""

    def __init__(self, output_dir: Union[str, Path]):
        """
        Initialize exporter with output directory.

        Args:
            output_dir: Directory to save exported files
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    @abstractmethod
    def export(self, data: Any, filename: str, **kwargs) -> Path:
        """
        Export data to file.

        Args:
            data: Data to export
            filename: Name of output file without extension
            **kwargs: Additional export options

        Returns:
            Path to exported file
        """


class CSVExporter(DataExporter):
    """Export tables to CSV files."""

    def export(self, data: Any, filename: str, **kwargs) -> Path:
        """Export a DataFrame, a list of ``to_dict`` objects or a dict of rows."""
        filepath = self.output_dir / f"{filename}.csv"

        if isinstance(data, pd.DataFrame):
            frame = data
        elif isinstance(data, list) and data and hasattr(data[0], 'to_dict'):
            frame = pd.DataFrame([self._flatten_dict(item.to_dict()) for item in data])
        elif isinstance(data, list):
            frame = pd.DataFrame([self._flatten_dict(row) for row in data])
        elif isinstance(data, dict):
            frame = self._dict_frame(data)
        else:
            raise ValueError(f"Unsupported data type: {type(data)}")

        frame.to_csv(filepath, index=False, float_format=kwargs.get('float_format'))
        return filepath

    def _dict_frame(self, data: Dict) -> pd.DataFrame:
        rows = []
        for key, value in data.items():
            if isinstance(value, dict):
                rows.append({'key': key, **self._flatten_dict(value)})
            else:
                rows.append({'key': key, 'value': value})
        return pd.DataFrame(rows)

    def _flatten_dict(self, d: Dict, parent_key: str = '', sep: str = '_') -> Dict:
        """Flatten nested dictionary."""
        items = []
        for k, v in d.items():
            new_key = f"{parent_key}{sep}{k}" if parent_key else k
            if isinstance(v, dict):
                items.extend(self._flatten_dict(v, new_key, sep=sep).items())
            elif isinstance(v, list):
                items.append((new_key, json.dumps(v)))
            else:
                items.append((new_key, v))
        return dict(items)


class JSONExporter(DataExporter):
    """Export results to JSON files."""

    def export(self, data: Any, filename: str, **kwargs) -> Path:
        """Export data to JSON file."""
        filepath = self.output_dir / f"{filename}.json"
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(self._make_serializable(data), f, indent=kwargs.get('indent', 2))
            f.write("\n")
        return filepath

    def _make_serializable(self, obj: Any) -> Any:
        """Convert object to JSON-serializable format."""
        if isinstance(obj, pd.DataFrame):
            return self._make_serializable(obj.to_dict(orient='records'))
        elif hasattr(obj, 'to_dict'):
            return self._make_serializable(obj.to_dict())
        elif isinstance(obj, dict):
            return {str(k): self._make_serializable(v) for k, v in obj.items()}
        elif isinstance(obj, (list, tuple)):
            return [self._make_serializable(item) for item in obj]
        elif isinstance(obj, Enum):
            return obj.value
        elif isinstance(obj, np.ndarray):
            return self._make_serializable(obj.tolist())
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, (float, np.floating)):
            # NaN is not valid JSON
            return float(obj) if np.isfinite(obj) else None
        else:
            return obj

