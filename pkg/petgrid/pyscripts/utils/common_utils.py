"""Common utility functions for file operations, logging, hashing and JSON lines."""

import glob
import hashlib
import json
import logging
import os
import sys
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import chardet

NIFTI_EXTENSIONS = (".nii.gz", ".nii")


def setup_logger(name, level=logging.INFO):
    """Function to setup a logger that outputs to stdout"""
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(formatter)
    logger = logging.getLogger(name)
    logger.setLevel(level)
    if logger.hasHandlers():
        logger.handlers.clear()
    logger.addHandler(handler)
    logger.propagate = False
    return logger


def set_package_log_level(level, package: str = "petgrid") -> None:
    """Set level on the package logger and every already-created logger below it."""
    for name in list(logging.root.manager.loggerDict):
        if name == package or name.startswith(package + "."):
            logging.getLogger(name).setLevel(level)
    logging.getLogger(package).setLevel(level)


def expand_input_paths(input_path: str) -> list[str]:
    """
    Expand input path(s) to a sorted list of file paths.

    Supports:
    - Single directory path
    - Comma-separated multiple paths
    - Glob patterns (*, ?, [])

    Args:
        input_path (str): Input path or pattern. Can be:
            - Single directory: "/data/reports"
            - Multiple directories: "/site_a/reports,/site_b/reports"
            - Glob pattern: "/data/*/reports/*.txt"

    Returns:
        list[str]: Matching file paths, sorted so runs are reproducible.
    """
    all_files = []
    seen_files = set()

    for path in input_path.split(','):
        path = path.strip()
        if not path:
            continue

        if any(char in path for char in ('*', '?', '[')):
            matched_paths = sorted(glob.glob(path, recursive=True))
            _add_files_from_paths(matched_paths, all_files, seen_files)
        else:
            _add_files_from_paths([path], all_files, seen_files)

    return sorted(all_files)


def _add_files_from_paths(paths: list[str], all_files: list[str], seen_files: set[str]) -> None:
    """Add files from a list of paths, avoiding duplicates."""
    for path in paths:
        if path in seen_files:
            continue
        if os.path.isfile(path):
            all_files.append(path)
            seen_files.add(path)
        elif os.path.isdir(path):
            for file_path in list_files_recursively(path):
                if file_path not in seen_files:
                    all_files.append(file_path)
                    seen_files.add(file_path)


def list_files_recursively(input_dir: str) -> list[str]:
    """
    Recursively list all files in the specified directory.

    Args:
        input_dir (str): The directory to search for files.

    Returns:
        list[str]: A sorted list of file paths.
    """
    all_files = []
    for root, _, files in os.walk(input_dir):
        for file in files:
            file_path = os.path.join(root, file)
            if os.path.isfile(file_path):
                all_files.append(file_path)
    return sorted(all_files)


def get_file_content(input_file_path: str, encoding: str | None = None) -> tuple[str, str]:
    """
    Returns the content of a specified file as a string along with its encoding.

    Args:
        input_file_path (str): The path of the file to read.
        encoding (str | None): The encoding to use for reading the file. If not specified, chardet.detect is used.

    Returns:
        tuple[str, str]: A tuple containing the file content and its encoding.
    """
    with open(input_file_path, 'rb') as file:
        raw_data = file.read()
        if encoding is None:
            result = chardet.detect(raw_data)
            encoding = result['encoding'] or 'utf-8'  # Use 'utf-8' if encoding detection fails
        content = raw_data.decode(encoding, errors='replace')
    return content, encoding


def sanitize_filename(filename: str) -> str:
    """Sanitize filename by removing or replacing invalid characters."""
    invalid_chars = '<>:"/\\|?* '
    for char in invalid_chars:
        filename = filename.replace(char, '_')
    return filename


def file_stem(path: str | Path) -> str:
    """File name without directory and without a .nii.gz / .nii / single suffix."""
    name = Path(path).name
    for extension in NIFTI_EXTENSIONS:
        if name.endswith(extension):
            return name[: -len(extension)]
    return Path(name).stem


def find_nifti(directory: str | Path, stem: str) -> Path | None:
    """Return `<directory>/<stem>.nii.gz` or `.nii` if either exists."""
    for extension in NIFTI_EXTENSIONS:
        candidate = Path(directory) / f"{stem}{extension}"
        if candidate.is_file():
            return candidate
    return None


def file_digest(path: str | Path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, 'rb') as file:
        for chunk in iter(lambda: file.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def content_hash(payload: Any, length: int = 12) -> str:
    """Short SHA-256 digest of a JSON-serializable payload (keys sorted)."""
    text = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:length]


def write_json(path: str | Path, payload: Any) -> None:
    """Write JSON with sorted keys and a trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding='utf-8')


def read_json(path: str | Path) -> Any:
    """Read a UTF-8 JSON file."""
    return json.loads(Path(path).read_text(encoding='utf-8'))


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    """Write one JSON object per line. Returns the number of rows written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        for row in rows:
            file.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> list[dict]:
    """Read a JSON lines file, skipping blank lines."""
    rows = []
    with open(path, 'r', encoding='utf-8') as file:
        for line in file:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
