"""Common exception base for all ladderforge data and usage errors."""


class LadderforgeError(Exception):
    """Base class for every error raised on bad inputs or bad data.

    The CLI maps this family to exit code 2; anything else escaping a
    command is treated as an internal bug (exit code 3).
    """
