"""
Atomic file output and content digests.

Every file metarec produces goes through this module so that a crashed or
interrupted command never leaves a half written table or bundle behind.
"""

import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Any, Iterator, Union

import pandas as pd
from Cryptodome.Hash import SHA256

TPath = Union[str, Path]

log = logging.getLogger(__name__)


def dumps_json(obj: Any) -> str:
    # sorted keys keep repeated runs byte-identical
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


@contextmanager
def atomic_open(path: TPath, mode: str = "w") -> Iterator[IO[Any]]:
    """Open a temp file next to path; it replaces path only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fp:
            yield fp
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    log.debug("wrote %s", path)


def write_text(path: TPath, text: str) -> None:
    with atomic_open(path) as fp:
        fp.write(text)


def write_json(path: TPath, obj: Any) -> None:
    write_text(path, dumps_json(obj))


def read_json(path: TPath) -> Any:
    with open(path, encoding="utf-8") as fp:
        return json.load(fp)


def write_frame(path: TPath, frame: pd.DataFrame) -> None:
    with atomic_open(path) as fp:
        frame.to_csv(fp, index=False, lineterminator="\n")


def file_digest(path: TPath) -> str:
    h = SHA256.new()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@contextmanager
def atomic_directory(path: TPath) -> Iterator[Path]:
    """Yield an empty staging directory that is renamed to path on success.

    An existing directory at path is replaced only once the new one is
    complete.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    retired = None
    if path.exists():
        retired = Path(tempfile.mkdtemp(prefix=f".{path.name}.old.", dir=path.parent))
        os.replace(path, retired / path.name)
    os.replace(staging, path)
    if retired is not None:
        shutil.rmtree(retired, ignore_errors=True)
    log.debug("committed directory %s", path)
