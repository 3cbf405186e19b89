"""Double blind comparisons over pluggable finite groups."""

from .errors import (
    BackendMismatch, CapabilityUnavailable, DBCError, MalformedEncoding, OracleFailed,
    RealmExhausted, RoleError, SchemaViolation, ScriptInvalid, SessionConsumed, UnknownSession,
)
from .groups import (
    AdditiveGroup, GroupDescriptor, GroupElement, MultiplicativeGroup, SealedGroup,
    SymmetricGroup, decode_element, get_group,
)
from .protocol import (
    AuthorityResponse, Challenge, ComparerToken, IssuanceSession, PrivateKey, Role,
    SubmitterToken, authority_issue_left, authority_issue_right, compare, comparer_begin,
    comparer_finish, decode_message, encode_message, issue_comparer_token, issue_submitter_token,
    keygen, make_challenge, split_submitter_token, submitter_begin, submitter_finish,
)

__version__ = '0.1.0'
