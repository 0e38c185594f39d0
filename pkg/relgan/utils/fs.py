r"""
Path helpers over fsspec. Run directories, datasets and checkpoints go through
these functions, so any fsspec protocol works wherever a path is accepted.
"""

import os
from typing import List, Tuple, Union

import fsspec
from fsspec.core import url_to_fs

PathLike = Union[str, os.PathLike]


def _resolve(path: PathLike) -> Tuple[fsspec.AbstractFileSystem, str]:
    filesystem, _ = url_to_fs(str(path))
    return filesystem, str(path)


def get_basename(path: PathLike) -> str:
    """Last component of a file or directory path, trailing separators ignored."""
    filesystem, path = _resolve(path)
    return path.rstrip(filesystem.sep).split(filesystem.sep)[-1]


def exists(path: PathLike) -> bool:
    filesystem, path = _resolve(path)
    return filesystem.exists(path)


def exists_and_not_empty(path: PathLike) -> bool:
    """Whether `path` is a directory holding at least one entry."""
    filesystem, path = _resolve(path)
    return filesystem.exists(path) and len(filesystem.ls(path)) > 0


def mkdir(path: PathLike, exist_ok: bool = True) -> None:
    filesystem, path = _resolve(path)
    filesystem.mkdirs(path, exist_ok=exist_ok)


def rm(path: PathLike, recursive: bool = False) -> None:
    filesystem, path = _resolve(path)
    filesystem.rm(path, recursive=recursive)


def join(*paths: PathLike) -> str:
    r"""
    Join path components with the separator of the first component's
    filesystem. Only the first component loses its trailing separator.
    """
    head, *tail = [str(p) for p in paths]
    filesystem, _ = _resolve(head)
    return filesystem.sep.join([head.rstrip(filesystem.sep), *tail])


def list_files(path: PathLike, extension: str) -> List[str]:
    """Sorted paths of the files directly under `path` whose name ends with `extension` (any case)."""
    filesystem, path = _resolve(path)
    suffix = extension.lower()
    entries = filesystem.ls(path, detail=True)
    return sorted(
        str(e["name"]) for e in entries if e["type"] == "file" and str(e["name"]).lower().endswith(suffix)
    )


def read_bytes(path: PathLike) -> bytes:
    with fsspec.open(str(path), "rb") as f:
        return f.read()


def write_bytes(path: PathLike, data: bytes) -> None:
    """Write a whole file, creating its parent directory first."""
    filesystem, path = _resolve(path)
    parent = path.rstrip(filesystem.sep).rpartition(filesystem.sep)[0]
    if parent:
        filesystem.mkdirs(parent, exist_ok=True)
    with fsspec.open(path, "wb") as f:
        f.write(data)


def read_text(path: PathLike) -> str:
    return read_bytes(path).decode("utf-8")


def write_text(path: PathLike, text: str) -> None:
    write_bytes(path, text.encode("utf-8"))
