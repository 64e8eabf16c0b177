"""The embedded delegation handshake, proxy store, renewal sweep, and the
external-MyProxy baseline simulator."""

from lgrid.delegation.messages import (
    Ack,
    CsrReply,
    DelegationMessage,
    Fault,
    Init,
    MessageError,
    SignedProxy,
    decode_frame,
    decode_message,
    encode_frame,
    encode_message,
    read_frame,
)
from lgrid.delegation.transcript import Transcript, private_key_needles, scan_for_key_material
from lgrid.delegation.session import (
    DelegationServer,
    DelegationSession,
    PeerIdentity,
    SessionState,
)
from lgrid.delegation.client import DelegationFault, InProcessChannel, client_delegate
from lgrid.delegation.store import ProxyStore, StoredProxy, StoreError
from lgrid.delegation.renewal import RenewalAction, RenewalPolicy, renew_if_needed

__all__ = [
    "DelegationMessage",
    "Init",
    "CsrReply",
    "SignedProxy",
    "Ack",
    "Fault",
    "MessageError",
    "encode_message",
    "decode_message",
    "encode_frame",
    "decode_frame",
    "read_frame",
    "Transcript",
    "private_key_needles",
    "scan_for_key_material",
    "DelegationServer",
    "DelegationSession",
    "SessionState",
    "PeerIdentity",
    "client_delegate",
    "InProcessChannel",
    "DelegationFault",
    "ProxyStore",
    "StoredProxy",
    "StoreError",
    "RenewalPolicy",
    "RenewalAction",
    "renew_if_needed",
]
