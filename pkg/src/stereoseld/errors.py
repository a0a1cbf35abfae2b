"""Error taxonomy shared by the file codecs and the CLI."""


class DataError(Exception):
    """Inputs are structurally valid but unusable (wrong rate, missing pair, misaligned streams)."""


class FormatError(Exception):
    """A file does not parse: bad magic, truncation, malformed rows."""
