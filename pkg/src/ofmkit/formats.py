"""File formats: binary PGM (P5), grayscale PFM, Middlebury .flo, CSV matrices.

Intensities live in [0, 1] in memory.  PGM quantizes to 8 or 16 bits
(16-bit samples are big-endian per the netpbm spec); PFM keeps float32
and uses the format's bottom-to-top row order with a negative scale for
little-endian data.  Flow fields use the Middlebury .flo layout:
float32 magic 202021.25, int32 width/height, then row-major interleaved
(vx, vy) float32 pairs, all little-endian.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .image import FlowField, Image

FLO_MAGIC = 202021.25


class FormatError(ValueError):
    """Malformed or unsupported file content."""


def write_pgm(path: str | os.PathLike, image: Image, maxval: int = 255) -> None:
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    q = np.round(np.clip(image.data, 0.0, 1.0) * maxval)
    q = q.astype(">u2" if maxval == 65535 else "u1")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n{maxval}\n".encode("ascii"))
        fh.write(q.tobytes())


def _read_pnm_tokens(fh: io.BufferedReader, count: int) -> list[bytes]:
    tokens: list[bytes] = []
    while len(tokens) < count:
        ch = fh.read(1)
        if not ch:
            raise FormatError("truncated PNM header")
        if ch.isspace():
            continue
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = fh.read(1)
            continue
        tok = ch
        while True:
            ch = fh.read(1)
            if not ch or ch.isspace():
                break
            tok += ch
        tokens.append(tok)
    return tokens


def read_pgm(path: str | os.PathLike) -> Image:
    with open(path, "rb") as fh:
        if fh.read(2) != b"P5":
            raise FormatError(f"{path}: not a binary PGM (P5) file")
        w, h, maxval = (int(t) for t in _read_pnm_tokens(fh, 3))
        if maxval not in (255, 65535):
            raise FormatError(f"{path}: unsupported PGM maxval {maxval}")
        dtype = ">u2" if maxval == 65535 else "u1"
        raw = fh.read(w * h * np.dtype(dtype).itemsize)
        if len(raw) != w * h * np.dtype(dtype).itemsize:
            raise FormatError(f"{path}: truncated PGM payload")
        data = np.frombuffer(raw, dtype=dtype).reshape(h, w)
    return Image(data.astype(np.float64) / maxval)


def write_pfm(path: str | os.PathLike, image: Image) -> None:
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{image.width} {image.height}\n-1.0\n".encode("ascii"))
        fh.write(image.data[::-1].astype("<f4").tobytes())


def read_pfm(path: str | os.PathLike) -> Image:
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind != b"Pf":
            raise FormatError(f"{path}: not a grayscale PFM (Pf) file")
        w, h = (int(t) for t in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        raw = fh.read(w * h * 4)
        if len(raw) != w * h * 4:
            raise FormatError(f"{path}: truncated PFM payload")
        data = np.frombuffer(raw, dtype=dtype).reshape(h, w)[::-1]
    return Image(data.astype(np.float64))


def read_image(path: str | os.PathLike) -> Image:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".pgm":
        return read_pgm(path)
    if ext == ".pfm":
        return read_pfm(path)
    raise FormatError(f"{path}: unsupported image extension {ext!r} (expected .pgm or .pfm)")


def write_image(path: str | os.PathLike, image: Image, maxval: int = 65535) -> None:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".pgm":
        write_pgm(path, image, maxval)
    elif ext == ".pfm":
        write_pfm(path, image)
    else:
        raise FormatError(f"{path}: unsupported image extension {ext!r} (expected .pgm or .pfm)")


def write_flo(path: str | os.PathLike, flow: FlowField) -> None:
    h, w = flow.shape
    with open(path, "wb") as fh:
        fh.write(np.float32(FLO_MAGIC).tobytes())
        fh.write(np.array([w, h], dtype="<i4").tobytes())
        inter = np.empty((h, w, 2), dtype="<f4")
        inter[:, :, 0] = flow.vx
        inter[:, :, 1] = flow.vy
        fh.write(inter.tobytes())


def read_flo(path: str | os.PathLike) -> FlowField:
    with open(path, "rb") as fh:
        magic = np.frombuffer(fh.read(4), dtype="<f4")
        if magic.size != 1 or magic[0] != np.float32(FLO_MAGIC):
            raise FormatError(f"{path}: bad .flo magic (got {magic!r})")
        w, h = np.frombuffer(fh.read(8), dtype="<i4")
        if w <= 0 or h <= 0:
            raise FormatError(f"{path}: bad .flo dimensions {w}x{h}")
        raw = fh.read(int(w) * int(h) * 8)
        if len(raw) != w * h * 8:
            raise FormatError(f"{path}: truncated .flo payload")
        inter = np.frombuffer(raw, dtype="<f4").reshape(int(h), int(w), 2)
    return FlowField(inter[:, :, 0].astype(np.float64), inter[:, :, 1].astype(np.float64))


def write_matrix_csv(path: str | os.PathLike, matrix: np.ndarray) -> None:
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), delimiter=",", fmt="%.17g")


def read_matrix_csv(path: str | os.PathLike) -> np.ndarray:
    try:
        out = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed CSV matrix ({exc})") from exc
    return out
