"""User-pair keys, per-block state shuffling and combined scattering matrices."""
from __future__ import annotations

import hashlib
import json
import os
import stat
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidSubsetSize, IoFailure, ShapeMismatch, ValidationError
from .foldylax import ScatteringMatrix

# domain tags keep the server's random streams apart
_SHUFFLE_DOMAIN = 0x5348
_KEY_DOMAIN = 0x4B45


@dataclass(frozen=True, eq=False)
class UserKey:
    q: int
    q_prime: int
    block: int
    subset: tuple[int, ...]
    coefficients: np.ndarray
    key_id: str
    seed: int

    def __post_init__(self):
        if not self.subset:
            raise InvalidSubsetSize("key subset must not be empty")
        if len(set(self.subset)) != len(self.subset):
            raise ValidationError("key subset indices must be distinct")
        if len(self.coefficients) != len(self.subset):
            raise ShapeMismatch("one coefficient per subset member required")

    @property
    def phases(self) -> np.ndarray:
        """C such that coefficient = |coefficient| exp(-j C pi), C in (-1, 1]."""
        c = -np.angle(self.coefficients) / np.pi
        return np.where(c <= -1.0, c + 2.0, c)

    def to_dict(self) -> dict:
        return {
            "key_id": self.key_id,
            "q": self.q,
            "q_prime": self.q_prime,
            "block": self.block,
            "subset": list(self.subset),
            "coefficients": [[z.real, z.imag] for z in self.coefficients.tolist()],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UserKey":
        c = np.asarray(d["coefficients"], dtype=np.float64).reshape(-1, 2)
        return cls(int(d["q"]), int(d["q_prime"]), int(d["block"]), tuple(int(i) for i in d["subset"]),
                   c[:, 0] + 1j * c[:, 1], str(d["key_id"]), int(d["seed"]))

    def with_coefficients(self, coefficients, key_id: str | None = None) -> "UserKey":
        coefficients = np.asarray(coefficients, dtype=np.complex128)
        return UserKey(self.q, self.q_prime, self.block, self.subset, coefficients,
                       key_id or _key_id(self.q, self.q_prime, self.block, self.seed, coefficients),
                       self.seed)


def _key_id(q, q_prime, block, seed, extra=None) -> str:
    h = hashlib.sha256(f"{q}:{q_prime}:{block}:{seed}".encode())
    if extra is not None:
        h.update(np.ascontiguousarray(extra, dtype="<c16").tobytes())
    return h.hexdigest()[:32]


def phase_coefficients(phases) -> np.ndarray:
    """exp(-j C pi) for each C."""
    return np.exp(-1j * np.pi * np.asarray(phases, dtype=np.float64))


def generate_key(q: int, q_prime: int, block: int, L: int, subset_size: int, seed: int,
                 modulus_range: tuple[float, float] | None = None) -> UserKey:
    """Random state subset plus random complex coefficients.

    Phases are exp(-j C pi) with C uniform on (-1, 1]. With ``modulus_range``
    the coefficients also get a uniform random modulus.
    """
    if not 1 <= subset_size <= L:
        raise InvalidSubsetSize(f"subset size {subset_size} outside 1..{L}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _KEY_DOMAIN]))
    subset = tuple(sorted(int(i) + 1 for i in rng.choice(L, size=subset_size, replace=False)))
    c = -rng.uniform(-1.0, 1.0, size=subset_size)
    coeffs = phase_coefficients(c)
    if modulus_range is not None:
        coeffs = coeffs * rng.uniform(*modulus_range, size=subset_size)
    return UserKey(q, q_prime, block, subset, coeffs, _key_id(q, q_prime, block, seed), int(seed))


def key_from_phases(q: int, q_prime: int, block: int, subset: Sequence[int], phases, seed: int = 0) -> UserKey:
    """Key with explicitly chosen coefficients exp(-j C pi)."""
    coeffs = phase_coefficients(phases)
    return UserKey(q, q_prime, block, tuple(int(i) for i in subset), coeffs,
                   _key_id(q, q_prime, block, seed, coeffs), int(seed))


def derive_key_seed(key_seed: int, q: int, q_prime: int, block: int, counter: int = 0) -> int:
    """Per-transaction key seed split off the server's key stream."""
    ss = np.random.SeedSequence([int(key_seed), q, q_prime, block, counter])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class BlockSchedule:
    """Secret permutation of state indices for one block.

    The permutation is deliberately kept out of ``repr`` and has no
    serialisation; it only ever exists inside the encryption server.
    """

    __slots__ = ("block", "_perm")

    def __init__(self, block: int, permutation: Sequence[int]):
        perm = tuple(int(i) for i in permutation)
        if sorted(perm) != list(range(1, len(perm) + 1)):
            raise ValidationError("schedule must be a permutation of 1..L")
        self.block = block
        self._perm = perm

    @property
    def L(self) -> int:
        return len(self._perm)

    @property
    def permutation(self) -> tuple[int, ...]:
        return self._perm

    def physical(self, logical: int) -> int:
        """Physical state realising logical index ``logical`` (both 1-based)."""
        return self._perm[logical - 1]

    def __repr__(self):
        return f"BlockSchedule(block={self.block}, L={self.L}, <hidden>)"

    def __reduce__(self):
        raise TypeError("BlockSchedule is not serialisable")


def shuffle_block(block: int, L: int, server_seed: int) -> BlockSchedule:
    if L < 1:
        raise ValidationError("L must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(server_seed), _SHUFFLE_DOMAIN, int(block)]))
    return BlockSchedule(block, rng.permutation(L) + 1)


def combine_states(matrices: Sequence, key: UserKey) -> ScatteringMatrix:
    """K_qq' = sum_l C_l SM_l over the key's subset (matrices in subset order)."""
    if len(matrices) != len(key.coefficients):
        raise ShapeMismatch(f"{len(matrices)} matrices for {len(key.coefficients)} coefficients")
    arrays = [np.asarray(getattr(m, "entries", m)) for m in matrices]
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ShapeMismatch("scattering matrices differ in shape")
    out = np.zeros(shape, dtype=np.complex128)
    for c, a in zip(key.coefficients, arrays):
        out += c * a
    return ScatteringMatrix(out, provenance=f"key:{key.key_id}")


class KeyStore:
    """JSON array of key records on disk; one writer at a time."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._keys: dict[str, UserKey] = {}
        if self.path is not None and self.path.exists():
            try:
                records = json.loads(self.path.read_text())
            except (OSError, ValueError) as exc:
                raise IoFailure(f"cannot read key store {self.path}: {exc}") from None
            for rec in records:
                key = UserKey.from_dict(rec)
                self._keys[key.key_id] = key

    def __contains__(self, key_id):
        return key_id in self._keys

    def __len__(self):
        return len(self._keys)

    def __iter__(self):
        return iter(self._keys.values())

    def get(self, key_id: str) -> UserKey | None:
        return self._keys.get(key_id)

    def add(self, key: UserKey) -> None:
        self._keys[key.key_id] = key

    def save(self) -> None:
        if self.path is None:
            raise IoFailure("in-memory key store has no path")
        records = [k.to_dict() for k in sorted(self._keys.values(), key=lambda k: k.key_id)]
        _atomic_write(self.path, json.dumps(records, indent=1) + "\n")


def _atomic_write(path: Path, text: str, mode: int | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        if mode is not None:
            os.chmod(tmp, mode)
        os.replace(tmp, path)
    except OSError as exc:
        Path(tmp).unlink(missing_ok=True)
        raise IoFailure(f"cannot write {path}: {exc}") from None


def write_server_secret(path: str | os.PathLike, server_seed: int) -> None:
    """Provision the server seed file, readable by the owner only."""
    _atomic_write(Path(path), f"{int(server_seed)}\n", mode=0o600)


def read_server_secret(path: str | os.PathLike) -> int:
    p = Path(path)
    try:
        st = p.stat()
        text = p.read_text().strip()
    except OSError as exc:
        raise IoFailure(f"cannot read server secret {p}: {exc}") from None
    if st.st_mode & (stat.S_IRWXG | stat.S_IRWXO):
        warnings.warn(f"server secret {p} is accessible to group/others", stacklevel=2)
    try:
        return int(text)
    except ValueError:
        raise IoFailure(f"server secret {p} is not an integer") from None


def seed_fingerprint(seed: int) -> str:
    return hashlib.sha256(f"seed:{int(seed)}".encode()).hexdigest()[:16]


def unique_key_ids(keys: Iterable[UserKey]) -> bool:
    ids = [k.key_id for k in keys]
    return len(ids) == len(set(ids))
