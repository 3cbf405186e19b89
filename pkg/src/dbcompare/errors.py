"""Exception hierarchy shared by every layer of the package."""


class DBCError(Exception):
    """Base class for all errors raised by dbcompare."""


class BackendMismatch(DBCError):
    """Operands belong to different group backends."""


class CapabilityUnavailable(DBCError):
    """The backend refuses the operation (inversion on a sealed group)."""


class MalformedEncoding(DBCError, ValueError):
    """A byte string is not a canonical encoding."""


class SessionConsumed(DBCError):
    """An issuance session was finished more than once."""


class RoleError(DBCError, ValueError):
    """A key, token or session was used in the wrong protocol role."""


class OracleFailed(DBCError):
    """An oracle handed to a reduction declined to answer."""


class UnknownSession(DBCError):
    """An envelope refers to a session the recipient does not know."""


class SchemaViolation(DBCError):
    """An envelope payload does not decode under its message type."""


class ScriptInvalid(DBCError, ValueError):
    """A scenario script could not be parsed or is inconsistent."""


class RealmExhausted(DBCError):
    """An authority realm has handed out every element of its group."""
