"""Lecture / écriture des fichiers matrice.

Format binaire MTXB (canonique) : magic ``b"MTXB"``, version u32, lignes u64,
colonnes u64 (petit-boutiste), puis lignes×colonnes flottants binary64
petit-boutistes en ordre ligne par ligne. Le format texte (première ligne
« lignes colonnes », puis les valeurs séparées par des blancs) est accepté en
lecture pour les fixtures écrites à la main.
"""
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from app.errors import MatrixFormatError

logger = logging.getLogger(__name__)

MAGIC = b"MTXB"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
_PAYLOAD_DTYPE = np.dtype("<f8")

PathLike = Union[str, Path]


def encode_matrix(a: np.ndarray) -> bytes:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise MatrixFormatError(f"only 2-D matrices can be encoded, got {a.ndim}-D")
    if not np.all(np.isfinite(a)):
        raise MatrixFormatError("matrix contains non-finite values")
    rows, cols = a.shape
    return _HEADER.pack(MAGIC, VERSION, rows, cols) + np.ascontiguousarray(a, dtype=_PAYLOAD_DTYPE).tobytes()


def decode_matrix(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise MatrixFormatError(f"truncated header: {len(data)} bytes")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise MatrixFormatError(f"unsupported MTXB version {version}")
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"invalid dimensions {rows}x{cols}")
    expected = rows * cols * _PAYLOAD_DTYPE.itemsize
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise MatrixFormatError(f"payload is {len(payload)} bytes, expected {expected}")
    a = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(a)):
        raise MatrixFormatError("payload contains non-finite values")
    return a


def _parse_text(text: str) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise MatrixFormatError("text matrix needs a 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        values = np.array([float(t) for t in tokens[2:]], dtype=np.float64)
    except ValueError as e:
        raise MatrixFormatError(f"invalid text matrix: {e}") from e
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"invalid dimensions {rows}x{cols}")
    if values.size != rows * cols:
        raise MatrixFormatError(f"expected {rows * cols} values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise MatrixFormatError("text matrix contains non-finite values")
    return values.reshape(rows, cols)


def parse_matrix_bytes(data: bytes) -> np.ndarray:
    """Décode un contenu MTXB, ou texte à défaut de magic"""
    if data[:4] == MAGIC:
        return decode_matrix(data)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MatrixFormatError("neither an MTXB file nor a text matrix") from e
    return _parse_text(text)


def read_matrix(path: PathLike) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise MatrixFormatError(f"cannot read {path}: {e}") from e
    a = parse_matrix_bytes(data)
    logger.debug(f"Read {a.shape[0]}x{a.shape[1]} matrix from {path}")
    return a


def write_matrix(path: PathLike, a: np.ndarray) -> None:
    """Écrit ``a`` au format MTXB (octets identiques pour une même matrice)"""
    Path(path).write_bytes(encode_matrix(a))
    logger.debug(f"Wrote {a.shape[0]}x{a.shape[1]} matrix to {path}")
