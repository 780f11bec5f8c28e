import json
import logging
import os
import sys

import pandas as pd

_log = logging.getLogger(__name__)

# full double precision, so tables can be read back without loss
FLOAT_FORMAT = "%.17g"


class OutputExporter:
    """The class implements a general exporter for the tables a subcommand produces.

    Tables are collected by `process` and only written by `__exit__` when no exception was raised,
    so a failed run leaves no partial output behind.
    """

    def __init__(self, path: str | None = None):
        self._path = path
        self._tables: dict[str, list[pd.DataFrame]] = {}
        self._constants: dict[str, float] = {}

        if path is not None:
            directory = os.path.dirname(os.path.abspath(path))
            if not os.path.exists(directory):
                os.makedirs(directory)

    def __enter__(self):
        """Overridable."""
        self._tables.clear()
        self._constants.clear()
        return self

    def __exit__(self, exception_type, exception, traceback):  # noqa: ANN001
        if exception_type is None:
            self.write()
        else:
            _log.debug(f"Not writing {self._path or 'stdout'}: {exception_type.__name__}.")

    def process(self, name: str, table: pd.DataFrame, constants: dict[str, float] | None = None, prefix: str | None = None) -> None:
        """Collect a table and the named constants it was computed from.

        Args:
            name: Key of the table, usually the subcommand.
            table: The rows to emit.
            constants: Scalar constants behind the table. Defaults to None.
            prefix: Prepended as "<prefix>.<name>" to the constant names, to keep them apart
                when several reports are emitted at once. Defaults to None.
        """
        self._tables.setdefault(name, []).append(table)
        for key, value in (constants or {}).items():
            self._constants[f"{prefix}.{key}" if prefix else key] = value

    def table(self, name: str) -> pd.DataFrame:
        return pd.concat(self._tables[name], ignore_index=True)

    def write(self) -> None:
        """Overridable."""


class CsvOutputExporter(OutputExporter):
    """Writes every collected table as CSV, to a file or to stdout when no path is given."""

    def write(self) -> None:
        for name in self._tables:
            table = self.table(name)
            if self._path is None:
                table.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            else:
                table.to_csv(self._path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
                _log.info(f"Wrote {len(table)} rows to {self._path}.")


class JsonSidecarExporter(OutputExporter):
    """Writes the collected constants as one flat JSON object of name to number."""

    def __init__(self, path: str):
        super().__init__(path)

    def write(self) -> None:
        constants = {key: float(value) for key, value in self._constants.items()}
        with open(self._path, "w", encoding="utf-8") as f:
            json.dump(constants, f, sort_keys=True, indent=2)
            f.write("\n")
        _log.info(f"Wrote {len(constants)} constants to {self._path}.")


class HDF5OutputExporter(OutputExporter):
    """Saves every collected table in an hdf5 file, one key per table name.

    The file is opened in append mode, so tables of different subcommands can share a file.
    The user can read any of them back into a Pandas dataframe with `pd.read_hdf(path, key=name)`.
    """

    def __init__(self, path: str):
        super().__init__(path)

    def write(self) -> None:
        for name in self._tables:
            self.table(name).to_hdf(self._path, key=name, mode="a")
            _log.info(f"Stored table {name!r} in {self._path}.")


class OutputExporterCollection:
    """It allows a series of output exporters to be used at the same time."""

    def __init__(self, *args: OutputExporter):
        self._output_exporters = args

    def __enter__(self):
        for output_exporter in self._output_exporters:
            output_exporter.__enter__()

        return self

    def __exit__(self, exception_type, exception, traceback):  # noqa: ANN001
        for output_exporter in self._output_exporters:
            output_exporter.__exit__(exception_type, exception, traceback)

    def process(self, name: str, table: pd.DataFrame, constants: dict[str, float] | None = None, prefix: str | None = None) -> None:
        for output_exporter in self._output_exporters:
            output_exporter.process(name, table, constants, prefix)

    def __iter__(self):
        return iter(self._output_exporters)
