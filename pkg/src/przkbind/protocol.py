"""The binding session protocol: prover, verifier, and key derivation.

A session is a four-message exchange between the twin (D) and the
physical entity (P), followed by a closing verdict from D:

    D -> P  commit          alpha = g^r
    P -> D  challenge       c bound to (alpha, zeta) plus a fresh nonce
    D -> P  response        z = r + c * sk_d  (knowledge of sk_d)
    P -> D  identity proof  h_sp plus an ephemeral share R_p = g^{r_p}
    D -> P  verdict         binding confirmed / abort reason

P accepts the twin iff g^z == alpha * pk_d^c; D accepts the entity iff
g^h_sp == pk_p. Both sides then derive the same session key from the
static-ephemeral shared point (pk_p * R_p)^{sk_d} == pk_d^{h_sp + r_p}
hashed together with zeta. Keys are derived silently; the closing
verdict is a notification, not a key-confirmation round.

The challenge hashes a fresh 32-byte session nonce along with alpha and
zeta, so a replayed (alpha, z) meets a different challenge in every new
session and the verification equation rejects it.

Both state machines follow a strict phase order; any verification
failure is terminal and erases ephemeral secrets.
"""

from __future__ import annotations

import json
import struct
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

from .groups import (
    Element,
    Group,
    GroupError,
    hash_h1_bytes,
    hash_to_scalar,
    scalar_inv,
    scalar_random,
    scalar_random_nonzero,
)
from .identity import EntityKeys, TwinKeyPair
from .registration import BindingRecord, verify_record


class ProtocolError(Exception):
    """Base class for protocol-layer errors."""


class SessionError(ProtocolError):
    """A session operation was invoked out of phase."""


class BindingMismatch(ProtocolError):
    """The supplied binding record fails validation for this party."""


class ExtractionError(ProtocolError):
    """Transcript pair does not permit secret extraction."""


class WireError(ValueError):
    """Malformed wire bytes."""


class Reason(Enum):
    BAD_PROOF = 1
    BAD_IDENTITY = 2
    DEGENERATE_COMMITMENT = 3
    OUT_OF_ORDER = 4
    TIMEOUT = 5


class Phase(Enum):
    IDLE = "idle"
    COMMITMENT_SENT = "commitment_sent"
    CHALLENGED = "challenged"
    RESPONSE_SENT = "response_sent"
    RESPONSE_RECEIVED = "response_received"
    IDENTITY_VERIFIED = "identity_verified"
    KEY_ESTABLISHED = "key_established"
    FAILED = "failed"

    @property
    def terminal(self) -> bool:
        return self in (Phase.KEY_ESTABLISHED, Phase.FAILED)


class VerificationFailure(ProtocolError):
    """Raised by operations whose failure carries a verdict reason."""

    def __init__(self, reason: Reason, detail: str = ""):
        super().__init__(detail or reason.name)
        self.reason = reason


@dataclass(frozen=True)
class Commit:
    alpha: Element


@dataclass(frozen=True)
class Challenge:
    c: int


@dataclass(frozen=True)
class Response:
    z: int


@dataclass(frozen=True)
class IdentityProof:
    h_sp: int
    r_p_pub: Element


@dataclass(frozen=True)
class Verdict:
    accept: bool
    reason: Optional[Reason] = None


Message = Union[Commit, Challenge, Response, IdentityProof, Verdict]


@dataclass(frozen=True)
class SessionKey:
    k_pd: bytes = field(repr=False)


@dataclass
class OpCounts:
    """Per-party operation tally used by the overhead/energy metrics."""

    group_exp: int = 0
    group_mul: int = 0
    hash: int = 0

    def as_dict(self) -> dict:
        return {"group_exp": self.group_exp, "group_mul": self.group_mul, "hash": self.hash}

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(
            self.group_exp + other.group_exp,
            self.group_mul + other.group_mul,
            self.hash + other.hash,
        )


# -- wire format ----------------------------------------------------------
# 1-byte tag | 4-byte big-endian payload length | field encodings in order.

TAG_COMMIT = 0x01
TAG_CHALLENGE = 0x02
TAG_RESPONSE = 0x03
TAG_IDENTITY_PROOF = 0x04
TAG_VERDICT = 0x05


def encode_message(group: Group, msg: Message) -> bytes:
    if isinstance(msg, Commit):
        tag, payload = TAG_COMMIT, group.encode(msg.alpha)
    elif isinstance(msg, Challenge):
        tag, payload = TAG_CHALLENGE, group.encode_scalar(msg.c)
    elif isinstance(msg, Response):
        tag, payload = TAG_RESPONSE, group.encode_scalar(msg.z)
    elif isinstance(msg, IdentityProof):
        tag = TAG_IDENTITY_PROOF
        payload = group.encode_scalar(msg.h_sp) + group.encode(msg.r_p_pub)
    elif isinstance(msg, Verdict):
        tag = TAG_VERDICT
        payload = bytes([1 if msg.accept else 0, msg.reason.value if msg.reason else 0])
    else:
        raise WireError(f"unknown message type: {type(msg).__name__}")
    return bytes([tag]) + struct.pack(">I", len(payload)) + payload


def decode_message(group: Group, data: bytes) -> Message:
    if len(data) < 5:
        raise WireError("truncated message header")
    tag = data[0]
    (length,) = struct.unpack(">I", data[1:5])
    payload = data[5:]
    if len(payload) != length:
        raise WireError("payload length mismatch")
    try:
        if tag == TAG_COMMIT:
            _expect_len(payload, group.element_size)
            return Commit(group.decode(payload))
        if tag == TAG_CHALLENGE:
            _expect_len(payload, group.scalar_size)
            return Challenge(group.decode_scalar(payload))
        if tag == TAG_RESPONSE:
            _expect_len(payload, group.scalar_size)
            return Response(group.decode_scalar(payload))
        if tag == TAG_IDENTITY_PROOF:
            _expect_len(payload, group.scalar_size + group.element_size)
            h_sp = group.decode_scalar(payload[: group.scalar_size])
            r_p_pub = group.decode(payload[group.scalar_size:])
            return IdentityProof(h_sp, r_p_pub)
        if tag == TAG_VERDICT:
            _expect_len(payload, 2)
            accept = payload[0] == 1
            if payload[0] not in (0, 1):
                raise WireError("bad verdict flag")
            reason = None
            if payload[1]:
                try:
                    reason = Reason(payload[1])
                except ValueError:
                    raise WireError("bad verdict reason") from None
            return Verdict(accept, reason)
    except GroupError as exc:
        raise WireError(str(exc)) from exc
    raise WireError(f"unknown message tag: {tag:#x}")


def _expect_len(payload: bytes, size: int) -> None:
    if len(payload) != size:
        raise WireError(f"bad payload size: {len(payload)} != {size}")


# -- pure relations --------------------------------------------------------


def schnorr_response(group: Group, r: int, c: int, sk_d: int) -> int:
    """The prover's response z = r + c * sk_d mod q."""
    return (r + c * sk_d) % group.q


def schnorr_verify(
    group: Group,
    pk_d: Element,
    alpha: Element,
    c: int,
    z: int,
    ops: Optional[OpCounts] = None,
) -> bool:
    """The verification equation g^z == alpha * pk_d^c."""
    lhs = group.exp(group.g, z)
    rhs = group.mul(alpha, group.exp(pk_d, c))
    if ops is not None:
        ops.group_exp += 2
        ops.group_mul += 1
    return lhs == rhs


def identity_check(group: Group, pk_p: Element, h_sp: int, ops: Optional[OpCounts] = None) -> bool:
    """The identity equation g^h_sp == pk_p; the zero scalar is rejected."""
    if h_sp % group.q == 0:
        return False
    result = group.exp(group.g, h_sp) == pk_p
    if ops is not None:
        ops.group_exp += 1
    return result


def derive_session_key(group: Group, shared: Element, zeta: bytes) -> SessionKey:
    """Session key = 32-byte challenge-family hash of (shared point, zeta)."""
    return SessionKey(hash_h1_bytes(group.encode(shared), zeta))


# -- transcripts -----------------------------------------------------------


@dataclass
class Transcript:
    """The public view of one session: message values and timestamps.

    Holds only values an eavesdropper sees; never ephemeral secrets,
    secret keys, or the identity secret.
    """

    alpha: Optional[Element] = None
    c: Optional[int] = None
    z: Optional[int] = None
    h_sp: Optional[int] = None
    r_p_pub: Optional[Element] = None
    verdict: Optional[Verdict] = None
    timestamps: List[Tuple[str, float]] = field(default_factory=list)

    def note(self, msg: Message, at_ms: float) -> None:
        if isinstance(msg, Commit):
            label, values = "commit", {"alpha": msg.alpha}
        elif isinstance(msg, Challenge):
            label, values = "challenge", {"c": msg.c}
        elif isinstance(msg, Response):
            label, values = "response", {"z": msg.z}
        elif isinstance(msg, IdentityProof):
            label, values = "identity_proof", {"h_sp": msg.h_sp, "r_p_pub": msg.r_p_pub}
        elif isinstance(msg, Verdict):
            label, values = "verdict", {"verdict": msg}
        else:
            raise TypeError(f"not a protocol message: {type(msg).__name__}")
        for attr, value in values.items():
            setattr(self, attr, value)
        self.timestamps.append((label, at_ms))

    def to_dict(self, group: Group) -> dict:
        def enc(x):
            return group.encode(x).hex() if x is not None else None

        verdict = None
        if self.verdict is not None:
            verdict = {
                "accept": self.verdict.accept,
                "reason": self.verdict.reason.name if self.verdict.reason else None,
            }
        return {
            "alpha": enc(self.alpha),
            "c": self.c,
            "z": self.z,
            "h_sp": self.h_sp,
            "r_p_pub": enc(self.r_p_pub),
            "verdict": verdict,
            "timestamps": [[label, ms] for label, ms in self.timestamps],
        }

    def to_json(self, group: Group) -> str:
        return json.dumps(self.to_dict(group))


# -- session state machines -------------------------------------------------


class _Session:
    """State shared by both parties' machines."""

    def __init__(self, group: Group, binding: BindingRecord, rng):
        if not verify_record(group, binding):
            raise BindingMismatch("binding record fails zeta recomputation")
        self.group = group
        self.binding = binding
        self.zeta = binding.zeta
        self.rng = rng
        self.phase = Phase.IDLE
        self.failure: Optional[Reason] = None
        self.peer_verdict: Optional[Verdict] = None
        self.ops = OpCounts()
        self._key: Optional[SessionKey] = None

    @property
    def session_key(self) -> Optional[SessionKey]:
        return self._key

    def _require_phase(self, expected: Phase) -> None:
        if self.phase is not expected:
            raise SessionError(f"operation requires phase {expected.name}, in {self.phase.name}")

    def _fail(self, reason: Reason) -> None:
        self.phase = Phase.FAILED
        self.failure = reason
        self._erase()

    def timeout(self) -> None:
        """Simulator-injected timeout event; terminal unless already done."""
        if not self.phase.terminal:
            self._fail(Reason.TIMEOUT)

    def _erase(self) -> None:
        raise NotImplementedError

    def ephemeral_debug(self) -> str:
        raise NotImplementedError

    def receive(self, msg: Message) -> List[Message]:
        """Feed one message; returns this party's replies.

        Failed sessions accept no further input; established sessions
        only record a late verdict. Unexpected message types fail the
        session with an out-of-order verdict.
        """
        if self.phase is Phase.FAILED:
            return []
        if isinstance(msg, Verdict):
            self.peer_verdict = msg
            if not msg.accept and not self.phase.terminal:
                self._fail(msg.reason or Reason.OUT_OF_ORDER)
            return []
        if self.phase is Phase.KEY_ESTABLISHED:
            return []
        return self._dispatch(msg)

    def receive_bytes(self, raw: bytes) -> List[Message]:
        """Decode wire bytes and feed them; malformed bytes fail the session."""
        try:
            msg = decode_message(self.group, raw)
        except WireError:
            if self.phase.terminal:
                return []
            reason = self._malformed_reason()
            self._fail(reason)
            return [Verdict(False, reason)]
        return self.receive(msg)

    def _dispatch(self, msg: Message) -> List[Message]:
        raise NotImplementedError

    def _out_of_order(self) -> List[Message]:
        self._fail(Reason.OUT_OF_ORDER)
        return [Verdict(False, Reason.OUT_OF_ORDER)]

    def _malformed_reason(self) -> Reason:
        return Reason.OUT_OF_ORDER


class EntitySession(_Session):
    """Physical-entity side: challenges the twin's proof, then proves its
    own identity and contributes the ephemeral key share."""

    def __init__(self, group: Group, keys: EntityKeys, binding: BindingRecord, rng):
        super().__init__(group, binding, rng)
        if binding.pk_p != keys.pk_p:
            raise BindingMismatch("binding record is for a different physical key")
        if binding.pk_d == group.identity:
            raise BindingMismatch("twin public key must not be the identity element")
        self.keys = keys
        self.twin_pk = binding.pk_d
        self.schnorr_verified = False
        self._alpha: Optional[Element] = None
        self._c: Optional[int] = None
        self._r_p: Optional[int] = None

    def challenge(self, commit: Commit) -> Challenge:
        """Issue a challenge bound to the commitment, zeta, and a fresh nonce."""
        self._require_phase(Phase.IDLE)
        if not self.group.is_member(commit.alpha) or commit.alpha == self.group.identity:
            self._fail(Reason.DEGENERATE_COMMITMENT)
            raise VerificationFailure(Reason.DEGENERATE_COMMITMENT, "degenerate commitment")
        nonce = self.rng.randbytes(32)
        c = hash_to_scalar(self.group, self.group.encode(commit.alpha), self.zeta, nonce)
        self.ops.hash += 1
        self._alpha = commit.alpha
        self._c = c
        self.phase = Phase.CHALLENGED
        return Challenge(c)

    def verify_response(self, resp: Response) -> bool:
        """Check the verification equation; failure is terminal."""
        self._require_phase(Phase.CHALLENGED)
        ok = schnorr_verify(self.group, self.twin_pk, self._alpha, self._c, resp.z, self.ops)
        if not ok:
            self._fail(Reason.BAD_PROOF)
            return False
        self.schnorr_verified = True
        self.phase = Phase.RESPONSE_RECEIVED
        return True

    def identity_proof(self) -> IdentityProof:
        """Reveal the identity hash and a fresh ephemeral share g^{r_p}."""
        self._require_phase(Phase.RESPONSE_RECEIVED)
        self._r_p = scalar_random_nonzero(self.group, self.rng)
        r_p_pub = self.group.exp(self.group.g, self._r_p)
        self.ops.group_exp += 1
        self.phase = Phase.IDENTITY_VERIFIED
        return IdentityProof(self.keys.h_sp, r_p_pub)

    def derive_key(self) -> SessionKey:
        """Session key from pk_d^{h_sp + r_p} and zeta; erases r_p."""
        self._require_phase(Phase.IDENTITY_VERIFIED)
        exponent = (self.keys.h_sp + self._r_p) % self.group.q
        shared = self.group.exp(self.twin_pk, exponent)
        self.ops.group_exp += 1
        self.ops.hash += 1
        self._key = derive_session_key(self.group, shared, self.zeta)
        self.phase = Phase.KEY_ESTABLISHED
        self._erase()
        return self._key

    def _dispatch(self, msg: Message) -> List[Message]:
        if isinstance(msg, Commit):
            if self.phase is not Phase.IDLE:
                return self._out_of_order()
            try:
                return [self.challenge(msg)]
            except VerificationFailure as vf:
                return [Verdict(False, vf.reason)]
        if isinstance(msg, Response):
            if self.phase is not Phase.CHALLENGED:
                return self._out_of_order()
            if not self.verify_response(msg):
                return [Verdict(False, Reason.BAD_PROOF)]
            proof = self.identity_proof()
            self.derive_key()
            return [proof]
        return self._out_of_order()

    def _erase(self) -> None:
        self._r_p = None

    def ephemeral_debug(self) -> str:
        return "erased" if self._r_p is None else "held"

    def _malformed_reason(self) -> Reason:
        if self.phase is Phase.IDLE:
            return Reason.DEGENERATE_COMMITMENT
        if self.phase is Phase.CHALLENGED:
            return Reason.BAD_PROOF
        return Reason.OUT_OF_ORDER


class TwinSession(_Session):
    """Digital-twin side: proves knowledge of sk_d, verifies the entity's
    identity hash, and derives the session key from the ephemeral share."""

    def __init__(self, group: Group, twin: TwinKeyPair, binding: BindingRecord, rng):
        super().__init__(group, binding, rng)
        if binding.pk_d != twin.pk_d:
            raise BindingMismatch("binding record is for a different twin key")
        if binding.pk_p == group.identity:
            raise BindingMismatch("entity public key must not be the identity element")
        self.twin = twin
        self.entity_pk = binding.pk_p
        self.identity_verified = False
        self._r: Optional[int] = None
        self._r_p_pub: Optional[Element] = None

    def commit(self) -> Commit:
        """Open the session with a fresh commitment alpha = g^r.

        The nonce is drawn nonzero: a zero nonce would commit to the
        identity element, which verifiers reject as degenerate.
        """
        self._require_phase(Phase.IDLE)
        self._r = scalar_random_nonzero(self.group, self.rng)
        alpha = self.group.exp(self.group.g, self._r)
        self.ops.group_exp += 1
        self.phase = Phase.COMMITMENT_SENT
        return Commit(alpha)

    def respond(self, ch: Challenge) -> Response:
        """Answer the challenge with z = r + c * sk_d; r is erased."""
        self._require_phase(Phase.COMMITMENT_SENT)
        if not 0 <= ch.c < self.group.q:
            raise GroupError(f"challenge scalar out of range: {ch.c}")
        z = schnorr_response(self.group, self._r, ch.c, self.twin.sk_d)
        self._r = None
        self.phase = Phase.RESPONSE_SENT
        return Response(z)

    def verify_identity(self, proof: IdentityProof) -> bool:
        """Check g^h_sp == pk_p; failure (or a zero h_sp) is terminal."""
        self._require_phase(Phase.RESPONSE_SENT)
        if not self.group.is_member(proof.r_p_pub):
            self._fail(Reason.BAD_IDENTITY)
            return False
        ok = identity_check(self.group, self.entity_pk, proof.h_sp, self.ops)
        if not ok:
            self._fail(Reason.BAD_IDENTITY)
            return False
        self.identity_verified = True
        self._r_p_pub = proof.r_p_pub
        self.phase = Phase.IDENTITY_VERIFIED
        return True

    def derive_key(self) -> SessionKey:
        """Session key from (pk_p * R_p)^{sk_d} and zeta."""
        self._require_phase(Phase.IDENTITY_VERIFIED)
        combined = self.group.mul(self.entity_pk, self._r_p_pub)
        shared = self.group.exp(combined, self.twin.sk_d)
        self.ops.group_mul += 1
        self.ops.group_exp += 1
        self.ops.hash += 1
        self._key = derive_session_key(self.group, shared, self.zeta)
        self.phase = Phase.KEY_ESTABLISHED
        self._erase()
        return self._key

    def _dispatch(self, msg: Message) -> List[Message]:
        if isinstance(msg, Challenge):
            if self.phase is not Phase.COMMITMENT_SENT:
                return self._out_of_order()
            return [self.respond(msg)]
        if isinstance(msg, IdentityProof):
            if self.phase is not Phase.RESPONSE_SENT:
                return self._out_of_order()
            if not self.verify_identity(msg):
                return [Verdict(False, Reason.BAD_IDENTITY)]
            self.derive_key()
            return [Verdict(True)]
        return self._out_of_order()

    def _erase(self) -> None:
        self._r = None

    def ephemeral_debug(self) -> str:
        return "erased" if self._r is None else "held"

    def _malformed_reason(self) -> Reason:
        if self.phase is Phase.RESPONSE_SENT:
            return Reason.BAD_IDENTITY
        return Reason.OUT_OF_ORDER


def run_interactive_session(entity: EntitySession, twin: TwinSession) -> Transcript:
    """Drive one in-memory session to a terminal state; returns the
    eavesdropper's transcript (zero virtual latency)."""
    transcript = Transcript()
    first = twin.commit()
    transcript.note(first, 0.0)
    queue = deque([(entity, first)])
    while queue:
        recipient, msg = queue.popleft()
        replies = recipient.receive(msg)
        peer = twin if recipient is entity else entity
        for reply in replies:
            transcript.note(reply, 0.0)
            queue.append((peer, reply))
    return transcript


# -- non-interactive mode ----------------------------------------------------


def fiat_shamir_prove(
    group: Group, sk_d: int, zeta: bytes, pk_d: Element, rng
) -> Tuple[Element, int]:
    """Produce a non-interactive proof (alpha, z) with the challenge
    derived locally from (alpha, zeta, pk_d)."""
    r = scalar_random(group, rng)
    alpha = group.exp(group.g, r)
    c = hash_to_scalar(group, group.encode(alpha), zeta, group.encode(pk_d))
    return alpha, schnorr_response(group, r, c, sk_d)


def fiat_shamir_verify(group: Group, pk_d: Element, zeta: bytes, alpha: Element, z: int) -> bool:
    """Recompute the local challenge and check the verification equation.

    Unlike the interactive challenger, this accepts an identity-element
    commitment: the zero nonce is a valid (if wasteful) prover choice and
    completeness holds for every nonce.
    """
    if not group.is_member(alpha):
        return False
    if not group.is_member(pk_d) or pk_d == group.identity:
        return False
    c = hash_to_scalar(group, group.encode(alpha), zeta, group.encode(pk_d))
    return schnorr_verify(group, pk_d, alpha, c, z)


def extract_secret(group: Group, t1: Transcript, t2: Transcript) -> int:
    """Special-soundness extractor: two accepting transcripts that share a
    commitment but differ in challenge reveal sk_d."""
    if t1.alpha != t2.alpha:
        raise ExtractionError("transcripts do not share a commitment")
    if t1.c == t2.c:
        raise ExtractionError("challenges are equal; no extraction possible")
    dz = (t1.z - t2.z) % group.q
    dc = (t1.c - t2.c) % group.q
    return dz * scalar_inv(group, dc) % group.q
