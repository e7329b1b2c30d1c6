"""
hlmax Utilities Package
Logging, timing, serialization and plotting helpers
"""
from .logger import setup_logger, package_logger, LoggerContext
from .metrics import TimingCollector, StageTimer
from .io_utils import csv_text, dumps_report, write_atomic

__all__ = [
    'setup_logger',
    'package_logger',
    'LoggerContext',
    'TimingCollector',
    'StageTimer',
    'csv_text',
    'dumps_report',
    'write_atomic',
]
