
class ConfigError(ValueError):
    """
    Raised when a source configuration, a count model or a command-line value is invalid.
    """


class TagFormatError(ValueError):
    """
    Raised when a tag file cannot be decoded.
    """


class RecordRangeError(ValueError):
    """
    Raised when a binning window falls outside the acquisition span of a record.
    """
