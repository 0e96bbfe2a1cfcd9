"""Exception types with stable error codes shared by the CLI and the service."""


class CorepickError(Exception):
    """Base error. `code` is a stable machine-greppable slug; `kind` is either
    "validation" (CLI exit 1) or "io" (CLI exit 2)."""

    kind = "validation"

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code

    @property
    def message(self) -> str:
        return self.args[0]


class InputError(CorepickError):
    """Invalid arguments, malformed file contents, broken contracts."""


class StorageError(CorepickError):
    """Operating-system level read/write failures."""

    kind = "io"
