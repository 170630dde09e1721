import hashlib
import logging
import os
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import pandas as pd

from . import __version__
from .errors import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

MANIFEST_SUFFIX = ".manifest"
TOOL_NAME = "SPDC_g2"

# Written in CSV files in place of NaN
NA_REP = "undefined"


def file_digest(path: PathLike) -> str:
    """
    Returns the sha256 digest of a file's bytes.
    """
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for chunk in iter(lambda: file.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(artifact: PathLike) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + MANIFEST_SUFFIX)


@dataclass(frozen=True)
class RunManifest:
    """
    Everything needed to re-run a command and get the same artifacts.

    Args:
        subcommand (str): The CLI subcommand.
        argv (Sequence[str]): The full argument list, subcommand included.
        seed (int, optional): Master seed of the run.
        parameters (Mapping[str, str]): Resolved options (bin width, number of samples, ...).
        config (Mapping[str, str]): Snapshot of the source configuration, if one was used.
        inputs (Sequence[str]): Input paths.
        input_digests (Sequence[str]): sha256 of every input.
        outputs (Sequence[str]): Output paths.
        version (str): Version of the package that produced the run.
    """

    subcommand: str
    argv: tuple = ()
    seed: Optional[int] = None
    parameters: Mapping[str, str] = field(default_factory=dict)
    config: Mapping[str, str] = field(default_factory=dict)
    inputs: tuple = ()
    input_digests: tuple = ()
    outputs: tuple = ()
    version: str = __version__

    def __post_init__(self):
        object.__setattr__(self, "argv", tuple(str(arg) for arg in self.argv))
        object.__setattr__(self, "parameters", {str(k): str(v) for k, v in self.parameters.items()})
        object.__setattr__(self, "config", {str(k): str(v) for k, v in self.config.items()})
        object.__setattr__(self, "inputs", tuple(str(path) for path in self.inputs))
        object.__setattr__(self, "input_digests", tuple(self.input_digests))
        object.__setattr__(self, "outputs", tuple(str(path) for path in self.outputs))

    @classmethod
    def for_run(
        cls,
        subcommand: str,
        argv: Sequence[str],
        seed: Optional[int] = None,
        parameters: Optional[Mapping] = None,
        config=None,
        inputs: Sequence[PathLike] = (),
        outputs: Sequence[PathLike] = (),
    ) -> "RunManifest":
        """
        Builds a manifest, hashing the inputs and snapshotting the configuration.
        """
        return cls(
            subcommand=subcommand,
            argv=tuple(argv),
            seed=seed,
            parameters=dict(parameters or {}),
            config={key: repr(config[key]) for key in config} if config is not None else {},
            inputs=tuple(inputs),
            input_digests=tuple(file_digest(path) for path in inputs),
            outputs=tuple(outputs),
        )

    def _content_lines(self) -> list:
        lines = [f"subcommand={self.subcommand}", f"version={self.version}", f"seed={self.seed}"]
        lines += [f"param.{key}={value}" for key, value in sorted(self.parameters.items())]
        lines += [f"config.{key}={value}" for key, value in self.config.items()]
        lines += [f"input_sha256={digest}" for digest in self.input_digests]
        return lines

    def digest(self) -> str:
        """
        Returns a short digest of the fields that determine the outputs. File paths and the
        command line are left out.
        """
        text = "\n".join(self._content_lines()) + "\n"
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    def to_text(self) -> str:
        lines = [f"# {TOOL_NAME} run manifest", f"argv={shlex.join(self.argv)}"]
        lines += self._content_lines()
        lines += [f"input={path}" for path in self.inputs]
        lines += [f"output={path}" for path in self.outputs]
        lines.append(f"digest={self.digest()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        """
        Parses manifest text.

        Raises:
            ConfigError: If a line is malformed or the stored digest does not match the content.
        """

        values = {"parameters": {}, "config": {}, "inputs": [], "input_digests": [], "outputs": []}
        stored_digest = None

        for number, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"Manifest line {number}: expected key=value, got '{line}'.")

            key, value = line.split("=", 1)

            if key.startswith("param."):
                values["parameters"][key[len("param."):]] = value
            elif key.startswith("config."):
                values["config"][key[len("config."):]] = value
            elif key == "argv":
                values["argv"] = tuple(shlex.split(value))
            elif key == "seed":
                values["seed"] = None if value == "None" else int(value)
            elif key in ("subcommand", "version"):
                values[key] = value
            elif key == "input":
                values["inputs"].append(value)
            elif key == "input_sha256":
                values["input_digests"].append(value)
            elif key == "output":
                values["outputs"].append(value)
            elif key == "digest":
                stored_digest = value
            else:
                raise ConfigError(f"Manifest line {number}: unknown key '{key}'.")

        if "subcommand" not in values:
            raise ConfigError("The manifest has no subcommand.")

        manifest = cls(**values)

        if stored_digest is not None and stored_digest != manifest.digest():
            raise ConfigError(f"The manifest digest {stored_digest} does not match its content ({manifest.digest()}).")

        return manifest

    def write(self) -> list:
        """
        Writes the manifest next to every output.

        Returns:
            list[Path]: The manifest paths.
        """

        paths = []
        for output in self.outputs:
            path = manifest_path(output)
            with open(path, "w", encoding="utf-8", newline="\n") as file:
                file.write(self.to_text())
            paths.append(path)
            logger.info(f"Wrote manifest {path}")

        return paths

    @classmethod
    def read(cls, path: PathLike) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as file:
            return cls.from_text(file.read())


def csv_header(manifest: RunManifest) -> str:
    """
    Returns the comment line that opens every CSV output.
    """
    return f"# {TOOL_NAME} {manifest.version} manifest={manifest.digest()}\n"


def write_csv(frame: pd.DataFrame, path: PathLike, manifest: RunManifest) -> Path:
    """
    Writes a table as CSV after the manifest comment line. NaN cells are written as 'undefined'.
    """

    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write(csv_header(manifest))
        frame.to_csv(file, index=False, na_rep=NA_REP, lineterminator="\n")

    logger.info(f"Wrote {len(frame)} rows to {path}")

    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    """
    Reads a CSV output back ('undefined' cells become NaN).
    """
    return pd.read_csv(path, comment="#", na_values=[NA_REP])
