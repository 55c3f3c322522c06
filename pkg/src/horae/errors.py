"""Exception hierarchy shared by every horae module."""


class HoraeError(Exception):
    pass


class DanglingReference(HoraeError):
    def __init__(self, name):
        super().__init__(f"dangling reference: {name!r}")
        self.name = name


class DuplicateId(HoraeError):
    def __init__(self, name, what="id"):
        super().__init__(f"duplicate {what}: {name!r}")
        self.name = name


class DuplicateRuleId(DuplicateId):
    def __init__(self, name):
        super().__init__(name, "rule id")


class ParseError(HoraeError):
    """Lexical or syntactic error with a source span and the expected token kinds."""

    def __init__(self, message, span, expected=(), src=None):
        self.message = message
        self.span = span
        self.expected = list(expected)
        location = ""
        if src is not None:
            line = src.count("\n", 0, span[0]) + 1
            col = span[0] - (src.rfind("\n", 0, span[0]) + 1) + 1
            location = f"{line}:{col}: "
            self.line, self.column = line, col
        detail = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{location}{message}{detail}")


class PartialInterpretation(HoraeError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"interpretation is missing: {', '.join(self.missing)}")


class FormulaTooLarge(HoraeError):
    pass


class ClauseBudgetExceeded(FormulaTooLarge):
    pass


class TooManyEvents(HoraeError):
    pass


class PolarityConflict(HoraeError):
    def __init__(self, event_a, event_b, trace):
        self.event_a = event_a
        self.event_b = event_b
        self.trace = list(trace)
        steps = " ; ".join(f"{a} {'=' if rel > 0 else '= not'} {b}" for a, b, rel in self.trace)
        super().__init__(f"polarity conflict between {event_a} and {event_b}: {steps}")


class IncompleteAbstraction(HoraeError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"abstraction does not cover: {', '.join(self.missing)}")


class SchemaError(HoraeError):
    def __init__(self, index, reason):
        self.index = index
        self.reason = reason
        super().__init__(f"record {index}: {reason}")


class LengthMismatch(SchemaError):
    pass


class RelationParseError(HoraeError):
    def __init__(self, message, position=None):
        self.position = position
        super().__init__(message if position is None else f"{message} at offset {position}")


class LetterOutOfRange(RelationParseError):
    def __init__(self, letter, event_count):
        self.letter = letter
        self.event_count = event_count
        super().__init__(f"letter {letter!r} out of range for {event_count} events")


class UnevenRaterCounts(HoraeError):
    pass


class DegenerateAgreement(HoraeError):
    pass


class BackendError(HoraeError):
    pass


class EmptyExtraction(HoraeError):
    pass


class AssemblyError(HoraeError):
    pass
