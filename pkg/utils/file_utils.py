"""
File utilities for workspace storage and canonical JSON
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Union

from config.settings import AppSettings


class FileUtils:
    """Utilities for file operations"""

    @staticmethod
    def read_bytes(file_path: Union[str, Path]) -> bytes:
        with open(file_path, "rb") as handle:
            return handle.read()

    @staticmethod
    def read_text(file_path: Union[str, Path]) -> str:
        with open(file_path, "r", encoding=AppSettings.DEFAULT_ENCODING) as handle:
            return handle.read()

    @staticmethod
    def write_atomic(file_path: Union[str, Path], data: bytes) -> None:
        """Write bytes through a temp file and rename, so readers never see partial files"""
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    @staticmethod
    def append_line(file_path: Union[str, Path], line: str) -> None:
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding=AppSettings.DEFAULT_ENCODING, newline="\n") as handle:
            handle.write(line.rstrip("\n") + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    @staticmethod
    def sha256_hex(data: bytes) -> str:
        return hashlib.sha256(data).hexdigest()


class CanonicalJson:
    """Canonical JSON text used for identifiers and manifests"""

    @staticmethod
    def dumps(value: Any) -> str:
        """Sorted keys, no whitespace, UTF-8 text, shortest round-trip floats.

        Raises:
            TypeError/ValueError: value holds non-serializable or non-finite data
        """
        return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)

    @staticmethod
    def dump_pretty(value: Any) -> str:
        """Stable, human-readable document with LF endings"""
        return json.dumps(value, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


class ConfigManager:
    """Load JSON documents such as manifests, plans and question files"""

    @staticmethod
    def load_json(file_path: Union[str, Path]) -> Dict[str, Any]:
        with open(file_path, "r", encoding=AppSettings.DEFAULT_ENCODING) as handle:
            return json.load(handle)
