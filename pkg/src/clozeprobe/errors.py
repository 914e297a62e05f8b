"""Exception types shared across the package."""


class ClozeprobeError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(ClozeprobeError):
    """Bad configuration: unknown relation, missing template, bad pair table."""


class TemplateError(ClozeprobeError):
    """Malformed template: missing or duplicated placeholder."""


class CapabilityError(ClozeprobeError):
    """Requested operation is unsupported by the scorer's capabilities."""


class TransportError(ClozeprobeError):
    """Remote scorer request failed after retries."""


class DatasetParseError(ClozeprobeError):
    """A dataset file violates its expected schema.

    ``path`` holds a JSON-path-like locator of the offending node.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{message} (at {path})" if path else message)
        self.path = path
