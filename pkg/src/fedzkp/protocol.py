"""Wire protocol: the credential proof run between two processes.

One JSON object per line over a byte stream, binary payloads hex-encoded,
permutations as 32-bit little-endian indices.  The prover speaks first:

    HELLO -> AGG_INPUT -> (VALIDITY_RESULT) ->
        [ COMMIT -> (CHALLENGE) -> RESPONSE -> (ROUND_RESULT) ] x d
    -> (SESSION_RESULT)

parenthesized messages flow verifier-to-prover, the rest prover-to-
verifier.  Every message carries the session id and a per-sender
sequence number that must strictly increase; round-scoped messages also
carry the round index.  Anything malformed or out of order draws an
ERROR reply and closes the session as rejected.  A torn connection is
an abort, which is deliberately distinct from a reject: it says nothing
about the credential.

Both session classes are sans-io: feed() maps one incoming line to a
list of outgoing lines, so tests can drive them without sockets and a
transcript is just the lines in order.  The TCP endpoints at the bottom
add the plumbing.
"""
from __future__ import annotations

import json
import socket
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .commitments import DEFAULT_COMMIT_BITS, Commitment
from .gf2 import BitMatrix, BitVec, Permutation, hamming_distance
from .lpn import Credential, PublicInput, XlpnParams
from .sigma import (
    Challenge,
    RoundMessage1,
    RoundResponse,
    prover_commit,
    prover_respond,
    verifier_challenge,
    verifier_check_round,
)
from .watermark import AggregatedInput, hash_watermark, select_component

PROVER_TYPES = ("HELLO", "AGG_INPUT", "COMMIT", "RESPONSE")
VERIFIER_TYPES = ("VALIDITY_RESULT", "CHALLENGE", "ROUND_RESULT", "SESSION_RESULT")
ALL_TYPES = PROVER_TYPES + VERIFIER_TYPES + ("ERROR",)

MAX_LINE_BYTES = 64 * 1024 * 1024


class ProtocolError(Exception):
    """Malformed or out-of-order wire data."""


class TransportError(Exception):
    """Connection failed mid-session; not a verdict on the credential."""


@dataclass(frozen=True)
class SessionSummary:
    session_id: str
    client: Optional[int]
    accepted: bool
    aborted: bool
    reason: str
    rounds_passed: int


def _encode(msg: dict) -> str:
    return json.dumps(msg, separators=(",", ":"))


def _decode(line: str) -> dict:
    if len(line) > MAX_LINE_BYTES:
        raise ProtocolError("line too long")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"bad json: {exc.msg}") from None
    if not isinstance(msg, dict):
        raise ProtocolError("message is not an object")
    if msg.get("type") not in ALL_TYPES:
        raise ProtocolError(f"unknown message type {msg.get('type')!r}")
    if not isinstance(msg.get("session"), str):
        raise ProtocolError("missing session id")
    if not isinstance(msg.get("seq"), int):
        raise ProtocolError("missing sequence number")
    return msg


def _int_field(msg: dict, key: str, lo=None, hi=None) -> int:
    v = msg.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ProtocolError(f"field {key!r} must be an integer")
    if lo is not None and v < lo or hi is not None and v > hi:
        raise ProtocolError(f"field {key!r} out of range")
    return v


def _hex_field(msg: dict, key: str) -> bytes:
    v = msg.get(key)
    if not isinstance(v, str):
        raise ProtocolError(f"field {key!r} must be a hex string")
    try:
        return bytes.fromhex(v)
    except ValueError:
        raise ProtocolError(f"field {key!r} is not valid hex") from None


def _opt_hex(msg: dict, key: str) -> Optional[bytes]:
    return None if msg.get(key) is None else _hex_field(msg, key)


def encode_msg1(msg1: RoundMessage1) -> dict:
    return {"C0": msg1.C0.c.hex(), "C1": msg1.C1.c.hex(), "C2": msg1.C2.c.hex(),
            "l_com": msg1.C0.l_com}


def decode_msg1(body: dict) -> RoundMessage1:
    l_com = _int_field(body, "l_com", lo=1)
    return RoundMessage1(*(Commitment(_hex_field(body, k), l_com)
                           for k in ("C0", "C1", "C2")))


def encode_response(resp: RoundResponse) -> dict:
    out = {"c": resp.c}
    if resp.pi is not None:
        out["pi"] = resp.pi.to_bytes().hex()
    for k in ("t0", "t1", "t2"):
        v = getattr(resp, k)
        if v is not None:
            out[k] = v.to_bytes().hex()
    for k in ("d0", "d1", "d2"):
        v = getattr(resp, k)
        if v is not None:
            out[k] = v.hex()
    return out


def decode_response(body: dict, m: int) -> RoundResponse:
    c = _int_field(body, "c", lo=0, hi=2)
    pi_raw = _opt_hex(body, "pi")
    try:
        pi = None if pi_raw is None else Permutation.from_bytes(pi_raw)
        ts = [None if (raw := _opt_hex(body, k)) is None else BitVec.from_bytes(raw, m)
              for k in ("t0", "t1", "t2")]
    except ValueError as exc:
        raise ProtocolError(str(exc)) from None
    return RoundResponse(c, pi, ts[0], ts[1], ts[2],
                         _opt_hex(body, "d0"), _opt_hex(body, "d1"), _opt_hex(body, "d2"))


def encode_aggregate(agg: AggregatedInput, params: XlpnParams) -> dict:
    return {"m": agg.m, "l": agg.l,
            "tau_num": params.tau.numerator, "tau_den": params.tau.denominator,
            "parts": [{"A": p.A.to_bytes().hex(), "y": p.y.to_bytes().hex()}
                      for p in agg.parts]}


def decode_aggregate(body: dict) -> tuple:
    m = _int_field(body, "m", lo=1)
    l = _int_field(body, "l", lo=1)
    num = _int_field(body, "tau_num", lo=0)
    den = _int_field(body, "tau_den", lo=1)
    try:
        params = XlpnParams(m=m, l=l, tau=Fraction(num, den))
    except ValueError as exc:
        raise ProtocolError(str(exc)) from None
    raw_parts = body.get("parts")
    if not isinstance(raw_parts, list) or not raw_parts:
        raise ProtocolError("aggregate carries no client inputs")
    parts = []
    for entry in raw_parts:
        if not isinstance(entry, dict):
            raise ProtocolError("aggregate part must be an object")
        try:
            parts.append(PublicInput(
                A=BitMatrix.from_bytes(_hex_field(entry, "A"), m, l),
                y=BitVec.from_bytes(_hex_field(entry, "y"), m)))
        except ValueError as exc:
            raise ProtocolError(str(exc)) from None
    agg = AggregatedInput(parts=tuple(parts), m=m, l=l, K=len(parts))
    return agg, params


class VerifierSession:
    """Sans-io verifier side of one proof session.

    Holds the watermark extracted from the local model and the security
    parameters the verifier insists on; everything else arrives over the
    wire.  feed() never raises on peer input: bad lines turn into an
    ERROR reply and a rejected session.
    """

    def __init__(self, h_extracted: BitVec, err_n: int, d: int,
                 rng: np.random.Generator, l_com: int = DEFAULT_COMMIT_BITS):
        if d < 1:
            raise ValueError("need at least one round")
        if not 0 <= err_n <= len(h_extracted):
            raise ValueError("near-collision threshold out of range")
        self.h = h_extracted
        self.err_n = err_n
        self.d = d
        self.rng = rng
        self.l_com = l_com
        self.state = "HELLO"
        self.session_id: Optional[str] = None
        self.client: Optional[int] = None
        self.round = 0
        self.reason = ""
        self.accepted = False
        self.transcript: list = []
        self._seq_out = 0
        self._seq_in = -1
        self._pub: Optional[PublicInput] = None
        self._w: Optional[int] = None
        self._msg1: Optional[RoundMessage1] = None
        self._challenge: Optional[Challenge] = None

    @property
    def done(self) -> bool:
        return self.state == "DONE"

    def _send(self, mtype: str, body: dict) -> str:
        msg = {"type": mtype, "session": self.session_id or "?",
               "seq": self._seq_out, **body}
        self._seq_out += 1
        line = _encode(msg)
        self.transcript.append(line)
        return line

    def _fail(self, reason: str) -> list:
        self.state = "DONE"
        self.accepted = False
        self.reason = reason
        return [self._send("ERROR", {"message": reason})]

    def feed(self, line: str) -> list:
        self.transcript.append(line.rstrip("\n"))
        try:
            msg = _decode(line)
        except ProtocolError as exc:
            return self._fail(str(exc))
        try:
            return self._step(msg)
        except ProtocolError as exc:
            return self._fail(str(exc))

    def _step(self, msg: dict) -> list:
        if self.done:
            raise ProtocolError("session already closed")
        if msg["seq"] <= self._seq_in:
            raise ProtocolError("sequence number did not increase")
        self._seq_in = msg["seq"]
        if self.session_id is None:
            self.session_id = msg["session"]
        elif msg["session"] != self.session_id:
            raise ProtocolError("session id changed mid-stream")

        mtype = msg["type"]
        if mtype != {"HELLO": "HELLO", "AGG_INPUT": "AGG_INPUT",
                     "COMMIT": "COMMIT", "RESPONSE": "RESPONSE"}.get(self.state):
            raise ProtocolError(f"unexpected {mtype} in state {self.state}")

        if mtype == "HELLO":
            self.client = _int_field(msg, "client", lo=0)
            rounds = _int_field(msg, "rounds", lo=1)
            if rounds != self.d:
                raise ProtocolError(f"verifier runs {self.d} rounds, peer asked {rounds}")
            self.state = "AGG_INPUT"
            return []

        if mtype == "AGG_INPUT":
            agg, params = decode_aggregate(msg)
            if self.client >= agg.K:
                raise ProtocolError("client index outside the aggregate")
            fresh = hash_watermark(agg, len(self.h))
            dist = hamming_distance(self.h, fresh.h)
            ok = dist < self.err_n
            out = [self._send("VALIDITY_RESULT", {"accepted": ok, "distance": dist})]
            if not ok:
                self.state = "DONE"
                self.reason = "aggregate does not match the embedded watermark"
                out.append(self._send("SESSION_RESULT",
                                      {"accepted": False, "rounds_passed": 0}))
                return out
            self._pub = select_component(agg, self.client)
            self._w = params.w
            self.state = "COMMIT"
            return out

        if mtype == "COMMIT":
            if _int_field(msg, "round", lo=0) != self.round:
                raise ProtocolError("wrong round index")
            self._msg1 = decode_msg1(msg)
            self._challenge = verifier_challenge(self.rng)
            self.state = "RESPONSE"
            return [self._send("CHALLENGE", {"round": self.round,
                                             "c": self._challenge.c})]

        # RESPONSE
        if _int_field(msg, "round", lo=0) != self.round:
            raise ProtocolError("wrong round index")
        resp = decode_response(msg, self._pub.A.rows)
        ok = verifier_check_round(self._pub, self._msg1, self._challenge, resp, self._w)
        out = [self._send("ROUND_RESULT", {"round": self.round, "accepted": ok})]
        if not ok:
            self.state = "DONE"
            self.reason = f"round {self.round} rejected"
            out.append(self._send("SESSION_RESULT",
                                  {"accepted": False, "rounds_passed": self.round}))
            return out
        self.round += 1
        if self.round == self.d:
            self.state = "DONE"
            self.accepted = True
            self.reason = "all rounds accepted"
            out.append(self._send("SESSION_RESULT",
                                  {"accepted": True, "rounds_passed": self.d}))
            return out
        self.state = "COMMIT"
        return out

    def summary(self) -> SessionSummary:
        return SessionSummary(session_id=self.session_id or "?", client=self.client,
                              accepted=self.accepted, aborted=False,
                              reason=self.reason, rounds_passed=self.round)


class ProverSession:
    """Sans-io prover side: owns a credential and argues one aggregate slot.

    The credential is taken on faith here; whether it actually opens the
    claimed slot comes out in the protocol, not in a local precheck.
    """

    def __init__(self, cred: Credential, agg: AggregatedInput, params: XlpnParams,
                 client: int, d: int, rng: np.random.Generator,
                 l_com: int = DEFAULT_COMMIT_BITS):
        if not 0 <= client < agg.K:
            raise ValueError("client index outside the aggregate")
        if d < 1:
            raise ValueError("need at least one round")
        self.cred = cred
        self.agg = agg
        self.params = params
        self.client = client
        self.d = d
        self.rng = rng
        self.l_com = l_com
        self.pub = select_component(agg, client)
        self.session_id = rng.bytes(8).hex()
        self.state = "START"
        self.round = 0
        self.accepted = False
        self.reason = ""
        self.transcript: list = []
        self._seq_out = 0
        self._seq_in = -1
        self._round_state = None

    @property
    def done(self) -> bool:
        return self.state == "DONE"

    def _send(self, mtype: str, body: dict) -> str:
        msg = {"type": mtype, "session": self.session_id,
               "seq": self._seq_out, **body}
        self._seq_out += 1
        line = _encode(msg)
        self.transcript.append(line)
        return line

    def _commit(self) -> str:
        self._round_state, msg1 = prover_commit(self.pub, self.cred, self.rng,
                                                self.l_com)
        return self._send("COMMIT", {"round": self.round, **encode_msg1(msg1)})

    def start(self) -> list:
        if self.state != "START":
            raise ProtocolError("session already started")
        self.state = "VALIDITY"
        return [
            self._send("HELLO", {"client": self.client, "rounds": self.d}),
            self._send("AGG_INPUT", encode_aggregate(self.agg, self.params)),
        ]

    def _fail(self, reason: str) -> list:
        self.state = "DONE"
        self.accepted = False
        self.reason = reason
        return [self._send("ERROR", {"message": reason})]

    def feed(self, line: str) -> list:
        self.transcript.append(line.rstrip("\n"))
        try:
            msg = _decode(line)
        except ProtocolError as exc:
            return self._fail(str(exc))
        try:
            return self._step(msg)
        except ProtocolError as exc:
            return self._fail(str(exc))

    def _step(self, msg: dict) -> list:
        if self.done or self.state == "START":
            raise ProtocolError("no verifier message expected now")
        if msg["seq"] <= self._seq_in:
            raise ProtocolError("sequence number did not increase")
        self._seq_in = msg["seq"]
        if msg["session"] != self.session_id:
            raise ProtocolError("reply for a different session")

        mtype = msg["type"]
        if mtype == "ERROR":
            self.state = "DONE"
            self.reason = f"verifier error: {msg.get('message', '')}"
            return []
        expected = {"VALIDITY": "VALIDITY_RESULT", "CHALLENGE": "CHALLENGE",
                    "ROUND_RESULT": "ROUND_RESULT", "SESSION_RESULT": "SESSION_RESULT"}
        if mtype != expected.get(self.state):
            raise ProtocolError(f"unexpected {mtype} in state {self.state}")

        if mtype == "VALIDITY_RESULT":
            if not msg.get("accepted"):
                self.state = "SESSION_RESULT"
                self.reason = "aggregate failed the validity check"
                return []
            self.state = "CHALLENGE"
            return [self._commit()]

        if mtype == "CHALLENGE":
            if _int_field(msg, "round", lo=0) != self.round:
                raise ProtocolError("challenge for the wrong round")
            ch = Challenge(_int_field(msg, "c", lo=0, hi=2))
            resp = prover_respond(self._round_state, ch)
            self.state = "ROUND_RESULT"
            return [self._send("RESPONSE", {"round": self.round,
                                            **encode_response(resp)})]

        if mtype == "ROUND_RESULT":
            if _int_field(msg, "round", lo=0) != self.round:
                raise ProtocolError("result for the wrong round")
            if not msg.get("accepted"):
                self.state = "SESSION_RESULT"
                self.reason = f"round {self.round} rejected"
                return []
            self.round += 1
            if self.round == self.d:
                self.state = "SESSION_RESULT"
                return []
            self.state = "CHALLENGE"
            return [self._commit()]

        # SESSION_RESULT
        self.state = "DONE"
        self.accepted = bool(msg.get("accepted"))
        if not self.reason:
            self.reason = "accepted" if self.accepted else "rejected"
        return []


def _serve_session(conn, make_session, transcript_path=None) -> SessionSummary:
    session = None
    try:
        with conn, conn.makefile("r", encoding="utf-8", newline="\n") as rd, \
                conn.makefile("w", encoding="utf-8", newline="\n") as wr:
            session = make_session()
            while not session.done:
                line = rd.readline()
                if not line:
                    raise TransportError("connection closed mid-session")
                for reply in session.feed(line):
                    wr.write(reply + "\n")
                wr.flush()
    except (OSError, TransportError) as exc:
        if session is not None and session.done:
            pass  # result already settled; the tail write just failed
        else:
            return SessionSummary(
                session_id=(session.session_id if session else None) or "?",
                client=session.client if session else None,
                accepted=False, aborted=True, reason=str(exc),
                rounds_passed=session.round if session else 0)
    finally:
        if session is not None and transcript_path is not None:
            with open(transcript_path, "a") as fh:
                for line in session.transcript:
                    fh.write(line + "\n")
    return session.summary()


def run_verifier_endpoint(host: str, port: int, h_extracted: BitVec, err_n: int,
                          d: int, rng: np.random.Generator,
                          l_com: int = DEFAULT_COMMIT_BITS, max_sessions: int = 1,
                          transcript_path=None, ready=None, port_box=None,
                          timeout: float = 120.0) -> list:
    """Serve proof sessions one at a time; returns their summaries.

    Binds, accepts max_sessions connections sequentially, runs one
    session per connection.  `ready` (a threading.Event) fires once the
    socket listens, so a test can start the prover without racing;
    `port_box` (a list) receives the bound port, for port=0 callers.
    """
    summaries = []
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(1)
        srv.settimeout(timeout)
        if port_box is not None:
            port_box.append(srv.getsockname()[1])
        if ready is not None:
            ready.set()
        for _ in range(max_sessions):
            try:
                conn, _addr = srv.accept()
            except socket.timeout:
                break
            conn.settimeout(timeout)
            summaries.append(_serve_session(
                conn,
                lambda: VerifierSession(h_extracted, err_n, d, rng, l_com),
                transcript_path))
    return summaries


def run_prover_endpoint(host: str, port: int, cred: Credential,
                        agg: AggregatedInput, params: XlpnParams, client: int,
                        d: int, rng: np.random.Generator,
                        l_com: int = DEFAULT_COMMIT_BITS,
                        transcript_path=None, timeout: float = 120.0) -> bool:
    """Connect, prove, return the verifier's verdict.

    Raises TransportError when the connection dies before a verdict;
    that is an abort, not a rejection.
    """
    session = ProverSession(cred, agg, params, client, d, rng, l_com)
    try:
        with socket.create_connection((host, port), timeout=timeout) as conn, \
                conn.makefile("r", encoding="utf-8", newline="\n") as rd, \
                conn.makefile("w", encoding="utf-8", newline="\n") as wr:
            for line in session.start():
                wr.write(line + "\n")
            wr.flush()
            while not session.done:
                line = rd.readline()
                if not line:
                    raise TransportError("connection closed mid-session")
                for reply in session.feed(line):
                    wr.write(reply + "\n")
                wr.flush()
    except OSError as exc:
        raise TransportError(str(exc)) from None
    finally:
        if transcript_path is not None:
            with open(transcript_path, "a") as fh:
                for line in session.transcript:
                    fh.write(line + "\n")
    return session.accepted
