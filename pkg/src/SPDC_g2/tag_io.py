import io
import logging
import os
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .errors import TagFormatError
from .timetag_model import ChannelId, TagRecord

logger = logging.getLogger(__name__)

# Little-endian: magic, version, reserved, duration (ps); then u8 channel and u64 timestamp (ps) per tag
MAGIC = b"BG2T"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")
RECORD_DTYPE = np.dtype([("channel", "<u1"), ("timestamp", "<u8")])

TEXT_COLUMNS = ["channel", "timestamp_ps"]
DURATION_PREFIX = "# duration_ps="

BINARY_SUFFIXES = (".bg2t", ".bin")
TEXT_SUFFIXES = (".csv", ".txt")

PathLike = Union[str, os.PathLike]


def encode_binary(record: TagRecord) -> bytes:
    """
    Encodes a record in the binary tag format.

    Args:
        record (TagRecord): The record to encode.

    Returns:
        bytes: The encoded record.
    """
    body = np.empty(len(record), dtype=RECORD_DTYPE)
    body["channel"] = record.channels
    body["timestamp"] = record.timestamps
    return HEADER.pack(MAGIC, VERSION, 0, record.duration) + body.tobytes()


def decode_binary(payload: bytes) -> TagRecord:
    """
    Decodes a record from the binary tag format. The tags are kept in file order.

    Args:
        payload (bytes): The file contents.

    Returns:
        TagRecord: The decoded record, flagged as imported.

    Raises:
        TagFormatError: If the header is invalid or the body is truncated.
    """

    if len(payload) < HEADER.size:
        raise TagFormatError("The file is shorter than the 16-byte header.")

    magic, version, _, duration = HEADER.unpack_from(payload)

    if magic != MAGIC:
        raise TagFormatError(f"Bad magic {magic!r}, expected {MAGIC!r}.")

    if version != VERSION:
        raise TagFormatError(f"Unsupported format version {version}.")

    body = payload[HEADER.size:]
    if len(body) % RECORD_DTYPE.itemsize:
        raise TagFormatError("The file ends in the middle of a tag record.")

    tags = np.frombuffer(body, dtype=RECORD_DTYPE)

    if tags.size and tags["channel"].max() > ChannelId.C:
        raise TagFormatError("The file contains an unknown channel identifier.")

    if tags.size and tags["timestamp"].max() > np.iinfo(np.int64).max:
        raise TagFormatError("A timestamp does not fit in a signed 64-bit integer.")

    return TagRecord(
        tags["channel"],
        tags["timestamp"].astype(np.int64),
        int(duration),
        {"creation_mode": "imported"},
    )


def write_binary(record: TagRecord, path: PathLike) -> None:
    """
    Writes a record to a binary tag file.
    """
    Path(path).write_bytes(encode_binary(record))
    logger.info(f"Wrote {len(record)} tags to {path}")


def read_binary(path: PathLike) -> TagRecord:
    """
    Reads a record from a binary tag file.
    """
    return decode_binary(Path(path).read_bytes())


def write_text(record: TagRecord, path: PathLike) -> None:
    """
    Writes a record as CSV with a leading duration comment line.
    """
    frame = pd.DataFrame(
        {
            "channel": [ChannelId(c).name for c in record.channels.tolist()],
            "timestamp_ps": record.timestamps,
        },
        columns=TEXT_COLUMNS,
    )

    with open(path, "w", newline="", encoding="utf-8") as file:
        file.write(f"{DURATION_PREFIX}{record.duration}\n")
        frame.to_csv(file, index=False, lineterminator="\n")

    logger.info(f"Wrote {len(record)} tags to {path}")


def read_text(path: PathLike, duration: Optional[int] = None) -> TagRecord:
    """
    Reads a record from a CSV tag file.

    Args:
        path (PathLike): The file to read.
        duration (int, optional): Acquisition span. Defaults to the duration comment line, or to the last timestamp + 1.

    Returns:
        TagRecord: The record, in file order, flagged as imported.

    Raises:
        TagFormatError: If the columns or the channel labels are invalid.
    """

    text = Path(path).read_text(encoding="utf-8")

    # Duration comment line
    first_line = text.split("\n", 1)[0].strip()
    if duration is None and first_line.startswith(DURATION_PREFIX):
        try:
            duration = int(first_line[len(DURATION_PREFIX):])
        except ValueError:
            raise TagFormatError(f"Invalid duration line '{first_line}'.") from None

    try:
        frame = pd.read_csv(io.StringIO(text), comment="#", dtype={"channel": str, "timestamp_ps": "int64"})
    except (ValueError, pd.errors.ParserError) as e:
        raise TagFormatError(f"Could not parse {path}: {e}") from None

    if list(frame.columns) != TEXT_COLUMNS:
        raise TagFormatError(f"Expected the columns {TEXT_COLUMNS}, found {list(frame.columns)}.")

    try:
        channels = [ChannelId.from_label(label) for label in frame["channel"]]
    except ValueError as e:
        raise TagFormatError(str(e)) from None

    timestamps = frame["timestamp_ps"].to_numpy(dtype=np.int64)

    if duration is None:
        duration = int(timestamps.max()) + 1 if timestamps.size else 0

    return TagRecord(channels, timestamps, duration, {"creation_mode": "imported"})


def write_record(record: TagRecord, path: PathLike) -> None:
    """
    Writes a record, choosing the format from the file suffix (.bg2t/.bin or .csv/.txt).
    """
    suffix = Path(path).suffix.lower()
    if suffix in TEXT_SUFFIXES:
        write_text(record, path)
    elif suffix in BINARY_SUFFIXES:
        write_binary(record, path)
    else:
        raise TagFormatError(f"Unknown tag file suffix '{suffix}'. Use one of {BINARY_SUFFIXES + TEXT_SUFFIXES}.")


def read_record(path: PathLike) -> TagRecord:
    """
    Reads a record, choosing the format from the file suffix (.bg2t/.bin or .csv/.txt).
    """
    suffix = Path(path).suffix.lower()
    if suffix in TEXT_SUFFIXES:
        return read_text(path)
    if suffix in BINARY_SUFFIXES:
        return read_binary(path)
    raise TagFormatError(f"Unknown tag file suffix '{suffix}'. Use one of {BINARY_SUFFIXES + TEXT_SUFFIXES}.")
