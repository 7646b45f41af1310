class CaseError(ValueError):
    """Base class for case-file ingestion failures."""


class CaseSyntaxError(CaseError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CaseReferenceError(CaseError):
    def __init__(self, message: str, bus: int):
        self.bus = bus
        super().__init__(message)


class CaseSchemaError(CaseError):
    def __init__(self, message: str, path: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class CaseValidationError(CaseError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))
