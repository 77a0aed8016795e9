"""Prefix arithmetic and route origin validation against validated ROA payloads.

Validation follows RFC 6811: a route is NotFound when no VRP covers its prefix,
Valid when a covering VRP matches both origin and length, Invalid otherwise.
"""
from __future__ import annotations

import csv
import enum
import ipaddress
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

MAX_LENGTH = {4: 32, 6: 128}


class AddressFamilyMismatch(ValueError):
    """Raised when an operation mixes IPv4 and IPv6 prefixes."""


@dataclass(frozen=True, order=True)
class IpPrefix:
    """An IP prefix in canonical form (host bits zeroed).

    ``value`` holds the full-width network address as an integer.
    """

    version: int
    value: int
    length: int

    def __post_init__(self) -> None:
        if self.version not in MAX_LENGTH:
            raise ValueError(f"unknown address family: {self.version}")
        width = MAX_LENGTH[self.version]
        if not 0 <= self.length <= width:
            raise ValueError(f"prefix length {self.length} out of range for IPv{self.version}")
        if not 0 <= self.value < (1 << width):
            raise ValueError("address out of range")
        if self.value & ((1 << (width - self.length)) - 1):
            raise ValueError(f"host bits set in {self.value:#x}/{self.length}")

    @classmethod
    def parse(cls, text: str, strict: bool = True) -> "IpPrefix":
        """Parse ``a.b.c.d/len`` or an IPv6 prefix.

        With ``strict=False`` host bits are silently zeroed.
        """
        net = ipaddress.ip_network(text.strip(), strict=strict)
        return cls(net.version, int(net.network_address), net.prefixlen)

    @property
    def width(self) -> int:
        return MAX_LENGTH[self.version]

    def key(self, length: int | None = None) -> int:
        """The first ``length`` bits of the address as an integer."""
        if length is None:
            length = self.length
        return self.value >> (self.width - length)

    def supernet(self, length: int) -> "IpPrefix":
        if length > self.length:
            raise ValueError("supernet must be shorter")
        return IpPrefix(self.version, self.key(length) << (self.width - length), length)

    def __str__(self) -> str:
        if self.version == 4:
            addr = ipaddress.IPv4Address(self.value)
        else:
            addr = ipaddress.IPv6Address(self.value)
        return f"{addr}/{self.length}"

    def __repr__(self) -> str:
        return f"IpPrefix('{self}')"


def as_prefix(p: IpPrefix | str) -> IpPrefix:
    return p if isinstance(p, IpPrefix) else IpPrefix.parse(p)


def covers(outer: IpPrefix, inner: IpPrefix) -> bool:
    """True iff ``outer`` contains ``inner`` (identity included)."""
    if outer.version != inner.version:
        raise AddressFamilyMismatch(f"{outer} and {inner} are from different address families")
    if outer.length > inner.length:
        return False
    return inner.key(outer.length) == outer.key()


def parse_asn(text: str | int) -> int:
    """Accept ``64500``, ``"64500"`` or ``"AS64500"``."""
    if isinstance(text, int):
        asn = text
    else:
        s = text.strip()
        if s[:2].upper() == "AS":
            s = s[2:]
        asn = int(s)
    if not 0 <= asn < 2**32:
        raise ValueError(f"AS number out of range: {text}")
    return asn


@dataclass(frozen=True, order=True)
class Vrp:
    """A validated ROA payload: (prefix, max length, origin AS)."""

    prefix: IpPrefix
    max_length: int
    asn: int

    def __post_init__(self) -> None:
        if not self.prefix.length <= self.max_length <= self.prefix.width:
            raise ValueError(
                f"max length {self.max_length} invalid for {self.prefix}"
            )

    @classmethod
    def make(cls, prefix: IpPrefix | str, asn: int | str, max_length: int | None = None) -> "Vrp":
        """Build a VRP; a missing max length defaults to the prefix length."""
        p = as_prefix(prefix)
        return cls(p, p.length if max_length is None else int(max_length), parse_asn(asn))

    def matches(self, origin: int, prefix: IpPrefix) -> bool:
        # AS0 VRPs never authorize anything
        return self.asn != 0 and self.asn == origin and prefix.length <= self.max_length

    def __str__(self) -> str:
        return f"{self.prefix}-{self.max_length} AS{self.asn}"


class ValidationState(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    NOT_FOUND = "not-found"

    @property
    def is_invalid(self) -> bool:
        return self is ValidationState.INVALID

    def __str__(self) -> str:
        return self.value


class RoaSet:
    """Immutable collection of VRPs indexed for covering-prefix lookup.

    Duplicate VRPs are dropped on construction.
    """

    __slots__ = ("_vrps", "_members", "_index", "_lengths")

    def __init__(self, vrps: Iterable[Vrp] = ()) -> None:
        unique = sorted(set(vrps))
        self._vrps: tuple[Vrp, ...] = tuple(unique)
        self._members = frozenset(unique)
        index: dict[tuple[int, int], dict[int, list[Vrp]]] = {}
        for v in unique:
            bucket = index.setdefault((v.prefix.version, v.prefix.length), {})
            bucket.setdefault(v.prefix.key(), []).append(v)
        self._index = {k: {kk: tuple(vv) for kk, vv in b.items()} for k, b in index.items()}
        self._lengths = {
            ver: sorted(length for (v, length) in self._index if v == ver) for ver in MAX_LENGTH
        }

    def covering(self, prefix: IpPrefix) -> list[Vrp]:
        """Every VRP whose prefix covers ``prefix``, least specific first."""
        out: list[Vrp] = []
        for length in self._lengths[prefix.version]:
            if length > prefix.length:
                break
            out.extend(self._index[(prefix.version, length)].get(prefix.key(length), ()))
        return out

    def with_changes(self, add: Iterable[Vrp] = (), remove: Iterable[Vrp] = ()) -> "RoaSet":
        gone = set(remove)
        return RoaSet([v for v in self._vrps if v not in gone] + list(add))

    def __iter__(self) -> Iterator[Vrp]:
        return iter(self._vrps)

    def __len__(self) -> int:
        return len(self._vrps)

    def __contains__(self, vrp: object) -> bool:
        return vrp in self._members

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RoaSet) and self._vrps == other._vrps

    def __hash__(self) -> int:
        return hash(self._vrps)

    def __repr__(self) -> str:
        return f"RoaSet({len(self)} VRPs)"

    @classmethod
    def from_csv(cls, stream: TextIO) -> "RoaSet":
        """Read ``prefix,maxlen,asn`` rows; blank maxlen means prefix length."""
        reader = csv.DictReader(stream)
        missing = {"prefix", "maxlen", "asn"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"VRP CSV lacks columns: {sorted(missing)}")
        vrps = []
        for lineno, row in enumerate(reader, start=2):
            try:
                maxlen = row["maxlen"].strip() if row["maxlen"] else ""
                vrps.append(Vrp.make(row["prefix"], row["asn"], int(maxlen) if maxlen else None))
            except (ValueError, AttributeError) as exc:
                raise ValueError(f"line {lineno}: bad VRP row {row!r}: {exc}") from exc
        return cls(vrps)

    def to_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["prefix", "maxlen", "asn"])
        for v in self._vrps:
            w.writerow([str(v.prefix), v.max_length, f"AS{v.asn}"])


def validate_with_witness(
    origin: int, prefix: IpPrefix, roas: RoaSet
) -> tuple[ValidationState, Vrp | None]:
    """Validate a route and return the smallest matching VRP when Valid."""
    covering = roas.covering(prefix)
    if not covering:
        return ValidationState.NOT_FOUND, None
    matching = [v for v in covering if v.matches(origin, prefix)]
    if matching:
        return ValidationState.VALID, min(matching)
    return ValidationState.INVALID, None


def validate(origin: int, prefix: IpPrefix, roas: RoaSet) -> ValidationState:
    return validate_with_witness(origin, prefix, roas)[0]
