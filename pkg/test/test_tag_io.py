import pytest
import numpy as np

from src.SPDC_g2.errors import TagFormatError
from src.SPDC_g2.simulator import simulate
from src.SPDC_g2.source_config import SourceConfig
from src.SPDC_g2.tag_io import (
    HEADER,
    MAGIC,
    decode_binary,
    encode_binary,
    read_record,
    write_record,
)
from src.SPDC_g2.timetag_model import TagRecord


@pytest.fixture
def record():
    config = SourceConfig(pair_rate=2e6, duration=200_000_000, dead_time=0, seed=3)
    return simulate(config)


def test_binary_layout(record):
    """
    Test the binary layout: a 16-byte header followed by 9-byte tag records.
    """

    payload = encode_binary(record)

    assert HEADER.size == 16
    assert payload[:4] == MAGIC
    assert len(payload) == 16 + 9 * len(record)


@pytest.mark.parametrize("suffix", [".bg2t", ".csv"])
def test_file_round_trip(record, tmp_path, suffix):
    """
    Test that writing and reading back a record preserves tags and duration in both formats.
    """

    path = tmp_path / f"tags{suffix}"
    write_record(record, path)
    loaded = read_record(path)

    assert loaded.same_tags(record)
    assert loaded.meta["creation_mode"] == "imported"


def test_binary_rejects_bad_magic(record):
    """
    Test that a payload with the wrong magic is rejected.
    """

    payload = b"XXXX" + encode_binary(record)[4:]

    with pytest.raises(TagFormatError, match="magic"):
        decode_binary(payload)


def test_binary_rejects_truncation(record):
    """
    Test that a payload cut in the middle of a tag is rejected, as is a short header.
    """

    payload = encode_binary(record)

    with pytest.raises(TagFormatError):
        decode_binary(payload[:-1])

    with pytest.raises(TagFormatError):
        decode_binary(payload[:10])


def test_binary_rejects_unknown_version():
    """
    Test that a future format version is rejected.
    """

    payload = HEADER.pack(MAGIC, 2, 0, 10)

    with pytest.raises(TagFormatError, match="version"):
        decode_binary(payload)


def test_binary_rejects_unknown_channel():
    """
    Test that a channel identifier beyond C is rejected.
    """

    tag = np.zeros(1, dtype=[("channel", "<u1"), ("timestamp", "<u8")])
    tag["channel"] = 5

    with pytest.raises(TagFormatError, match="channel"):
        decode_binary(HEADER.pack(MAGIC, 1, 0, 10) + tag.tobytes())


def test_text_format(tmp_path):
    """
    Test the text layout and that the duration falls back to the last timestamp + 1.
    """

    path = tmp_path / "tags.csv"
    write_record(TagRecord.from_arrays([0, 2], [1, 7], duration=20), path)

    lines = path.read_text().splitlines()
    assert lines == ["# duration_ps=20", "channel,timestamp_ps", "A,1", "C,7"]

    bare = tmp_path / "bare.csv"
    bare.write_text("channel,timestamp_ps\nB,4\nA,9\n")
    loaded = read_record(bare)

    assert loaded.duration == 10
    assert [tag.channel.name for tag in loaded] == ["B", "A"]


def test_text_rejects_unknown_channel(tmp_path):
    """
    Test that a channel label outside {A, B, C} is rejected.
    """

    path = tmp_path / "bad.csv"
    path.write_text("channel,timestamp_ps\nD,4\n")

    with pytest.raises(TagFormatError):
        read_record(path)


def test_unknown_suffix(tmp_path, record):
    """
    Test that files without a known suffix are refused.
    """
    with pytest.raises(TagFormatError):
        write_record(record, tmp_path / "tags.xyz")
