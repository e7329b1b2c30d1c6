"""
I/O Utilities
CSV and JSON serialization with atomic file replacement
"""
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from hlmax.errors import ParseError
from hlmax.utils.logger import setup_logger

logger = setup_logger(__name__)


def format_float(value: float) -> str:
    """Shortest decimal text that round-trips to the same double"""
    return repr(float(value))


def _csv_cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """
    Render rows as CSV text

    Args:
        header: Column names
        rows: Row values; floats use shortest round-trip text

    Returns:
        CSV document
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buffer.getvalue()


def read_csv_rows(source: Union[Path, str]) -> List[Dict[str, str]]:
    """
    Read a CSV file with a header row

    Args:
        source: File path

    Returns:
        List of row dictionaries (string values)
    """
    try:
        with open(source, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ParseError(f"CSV file {source} has no header", str(source))
            return [dict(row) for row in reader]
    except OSError as e:
        raise ParseError(f"Cannot read CSV file {source}: {e}", str(source)) from e


def _json_float(value: float) -> str:
    if math.isnan(value):
        return '"nan"'
    if math.isinf(value):
        return '"inf"' if value > 0 else '"-inf"'
    text = format(value, ".17g")
    # keep floats recognizable as floats
    if all(ch not in text for ch in ".en"):
        text += ".0"
    return text


def dumps_report(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """
    Serialize report data to JSON with 17 significant digits per float

    The json module always prints the shortest repr, so the document is
    assembled here. Dictionary keys keep insertion order.

    Args:
        obj: Nested dicts, lists and scalars
        indent: Spaces per nesting level

    Returns:
        JSON text
    """
    pad = " " * (indent * (_level + 1))
    close = " " * (indent * _level)

    if obj is None or isinstance(obj, (bool, str, int)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, float):
        return _json_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps_report(v, indent, _level + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{dumps_report(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"

    # numpy scalars and similar
    if hasattr(obj, "item"):
        return dumps_report(obj.item(), indent, _level)
    raise TypeError(f"Cannot serialize {type(obj).__name__}")


def write_atomic(path: Union[Path, str], text: str):
    """
    Write a text file atomically (temp file in the same directory, then rename)

    Args:
        path: Destination path
        text: File contents
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=str(target.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise

    logger.debug(f"Wrote {len(text)} bytes to {target}")


def emit(text: str, path: Optional[Union[Path, str]], stream=None):
    """
    Write text to a file atomically, or to a stream when no path is given

    Args:
        text: Document
        path: Optional destination file
        stream: Fallback stream (stdout when None)
    """
    if path:
        write_atomic(path, text)
    else:
        (stream or sys.stdout).write(text)
