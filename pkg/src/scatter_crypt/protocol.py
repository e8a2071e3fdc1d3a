"""Cloud-encryptor workflow: encrypt for a user pair, issue receipts, decrypt.

The server owns the scattering matrices of the L physical states, the key
store, the secret per-block shuffle and the user credentials. Ciphertexts
never carry key material.
"""
from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AuthFailure, DigestMismatch, DimensionMismatch, UnknownReceipt, UnknownUser, ValidationError,
)
from .holography import (
    DEFAULT_RC, CiphertextHologram, check_carrier, demodulate, hologram_record, passband_basis,
)
from .inversion import DEFAULT_EPSILON_REL, decompose, synthesize_incident
from .keyring import (
    KeyStore, UserKey, combine_states, derive_key_seed, generate_key, shuffle_block,
)
from .metrics import normalize
from .scene import Scene, sample_plane
from .store import decode_complex, decode_real, digest, encode_complex, encode_real
from .wavefield import ReferenceWave, reference_field

FIELD = "field"
HOLOGRAM = "hologram"
MODES = (FIELD, HOLOGRAM)


@dataclass(frozen=True, eq=False)
class PlaintextImage:
    pixels: np.ndarray
    source: str = ""

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 2:
            raise DimensionMismatch("plaintext must be a 2-D image")
        if not np.isfinite(p).all() or p.min() < 0 or p.max() > 1:
            raise ValidationError("plaintext pixels must lie in [0, 1]")
        object.__setattr__(self, "pixels", p)


@dataclass(frozen=True)
class Receipt:
    key_id: str
    q: int
    q_prime: int
    block: int
    digest: str
    credential_token: str

    def to_dict(self) -> dict:
        return {"key_id": self.key_id, "q": self.q, "q_prime": self.q_prime, "block": self.block,
                "digest": self.digest, "credential_token": self.credential_token}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Receipt":
        return cls(str(d["key_id"]), int(d["q"]), int(d["q_prime"]), int(d["block"]),
                   str(d["digest"]), str(d["credential_token"]))


@dataclass(frozen=True)
class ReferenceSettings:
    """Tilt of the off-axis reference and its strength relative to the field peak."""

    alpha_x: float = 0.4
    alpha_z: float = 0.0
    gain: float = 1.0


def image_to_target(img) -> np.ndarray:
    """Zero-phase complex target whose magnitude is the pixel value (row-major)."""
    p = img.pixels if isinstance(img, PlaintextImage) else np.asarray(img, dtype=np.float64)
    return p.ravel().astype(np.complex128)


def fit_to_grid(pixels, shape: tuple[int, int]) -> np.ndarray:
    """Map an image onto the sensor grid: 1:1, or block-mean for integer downscales."""
    p = np.asarray(pixels, dtype=np.float64)
    if p.shape == tuple(shape):
        return p
    fh, rh = divmod(p.shape[0], shape[0])
    fw, rw = divmod(p.shape[1], shape[1])
    if rh or rw or fh < 1 or fw < 1:
        raise DimensionMismatch(f"image {p.shape} cannot be mapped onto sensor grid {shape}")
    return p.reshape(shape[0], fh, shape[1], fw).mean(axis=(1, 3))


def ciphertext_to_dict(ct: CiphertextHologram) -> dict:
    return {
        "transparency": encode_real(ct.transparency),
        "shape": list(ct.shape),
        "reference": ct.reference.to_dict(),
        "provenance": dict(ct.provenance),
        "mode": ct.mode,
        "rc": ct.rc,
        "field": None if ct.field is None else encode_complex(ct.field),
    }


def ciphertext_from_dict(d: Mapping) -> CiphertextHologram:
    return CiphertextHologram(
        transparency=decode_real(d["transparency"]),
        reference=ReferenceWave.from_dict(d["reference"]),
        provenance=dict(d["provenance"]),
        mode=str(d["mode"]),
        rc=float(d["rc"]),
        field=None if d.get("field") is None else decode_complex(d["field"]),
        shape=tuple(int(v) for v in d["shape"]),
    )


def ciphertext_digest(ct: CiphertextHologram) -> str:
    return digest(ciphertext_to_dict(ct))


def incident_from_ciphertext(ct: CiphertextHologram, scene: Scene, mode: str | None = None,
                             gain: float | None = None) -> np.ndarray:
    """psi_hat at the hologram plane: stored field (FIELD) or demodulated transparency."""
    mode = mode or ct.mode
    if mode == FIELD:
        if ct.field is None:
            raise ValidationError("FIELD-mode decryption needs a ciphertext carrying its field")
        return ct.field
    pts = sample_plane(scene.hologram)
    check_carrier(ct.reference, scene.hologram, ct.rc, gain)
    return demodulate(ct.transparency, reference_field(ct.reference, pts), scene.hologram.shape, ct.rc)


def reconstruct_state_fields(ct: CiphertextHologram, matrices: Sequence, scene: Scene,
                             mode: str | None = None, gain: float | None = None) -> list[np.ndarray]:
    """Scattered sensor field psi_l = SM_l psi_hat for each given state matrix."""
    psi = incident_from_ciphertext(ct, scene, mode, gain)
    return [np.asarray(getattr(m, "entries", m)) @ psi for m in matrices]


def combine_fields(fields: Sequence[np.ndarray], coefficients, scene: Scene, mode: str,
                   ref: ReferenceSettings = ReferenceSettings(), rc: float = DEFAULT_RC) -> np.ndarray:
    """Key-weighted combination of state fields, returned as a sensor-shaped magnitude.

    FIELD: |sum C_l psi_l|. HOLOGRAM: each psi_l is recorded against the
    sensor reference, the records are combined with the same weights and the
    result is demodulated.
    """
    shape = scene.sensor.shape
    if mode == FIELD:
        out = np.zeros_like(fields[0])
        for c, f in zip(coefficients, fields):
            out += c * f
        return np.abs(out).reshape(shape)
    peak = max(float(np.abs(f).max()) for f in fields)
    wave = ReferenceWave(ref.gain * peak if peak > 0 else 1.0, ref.alpha_x, ref.alpha_z, scene.wavelength)
    check_carrier(wave, scene.sensor, rc, ref.gain)
    rv = reference_field(wave, sample_plane(scene.sensor))
    h = np.zeros(len(rv), dtype=np.complex128)
    for c, f in zip(coefficients, fields):
        h += c * hologram_record(f, rv)
    return np.abs(demodulate(h, rv, shape, rc)).reshape(shape)


class EncryptionServer:
    """In-process encryption server for one scene and one set of L states.

    ``matrices`` holds the scattering matrices of the physical states in
    order (physical index l = position + 1).
    """

    def __init__(self, scene: Scene, matrices: Sequence, *, server_seed: int, key_seed: int,
                 users: Sequence[int] = (1, 2, 3), subset_size: int = 3,
                 epsilon_rel: float = DEFAULT_EPSILON_REL, mode: str = FIELD,
                 reference: ReferenceSettings = ReferenceSettings(),
                 rc_hologram: float = DEFAULT_RC, rc_sensor: float = DEFAULT_RC,
                 keystore: KeyStore | None = None):
        if mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        self.scene = scene
        self._matrices = [np.asarray(getattr(m, "entries", m)) for m in matrices]
        for m in self._matrices:
            if m.shape != (scene.N, scene.M):
                raise DimensionMismatch(f"scattering matrix {m.shape} does not match scene {(scene.N, scene.M)}")
        self.L = len(self._matrices)
        self._server_seed = int(server_seed)
        self._key_seed = int(key_seed)
        self.users = tuple(int(u) for u in users)
        self.subset_size = subset_size
        self.epsilon_rel = epsilon_rel
        self.mode = mode
        self.reference = reference
        self.rc_hologram = rc_hologram
        self.rc_sensor = rc_sensor
        self.keystore = keystore if keystore is not None else KeyStore()
        self._cred_secret = hashlib.sha256(f"credential-secret:{self._server_seed}".encode()).digest()

    # -- users and keys --------------------------------------------------

    def credential(self, q: int) -> str:
        """Credential issued out-of-band to user ``q``."""
        self._check_user(q)
        return hmac.new(self._cred_secret, f"user:{q}".encode(), hashlib.sha256).hexdigest()

    def _check_user(self, q: int) -> None:
        if q not in self.users:
            raise UnknownUser(f"user {q} is not registered")

    def _state_matrices(self, key: UserKey) -> list[np.ndarray]:
        if max(key.subset) > self.L:
            raise ValidationError(f"key references state {max(key.subset)} but only {self.L} exist")
        schedule = shuffle_block(key.block, self.L, self._server_seed)
        return [self._matrices[schedule.physical(l) - 1] for l in key.subset]

    def combined_matrix(self, key: UserKey) -> np.ndarray:
        return combine_states(self._state_matrices(key), key).entries

    def new_key(self, q: int, q_prime: int, block: int) -> UserKey:
        counter = sum(1 for k in self.keystore if (k.q, k.q_prime, k.block) == (q, q_prime, block))
        seed = derive_key_seed(self._key_seed, q, q_prime, block, counter)
        return generate_key(q, q_prime, block, self.L, self.subset_size, seed)

    # -- encryption ------------------------------------------------------

    def synthesize(self, target: np.ndarray, K: np.ndarray) -> np.ndarray:
        if self.mode == HOLOGRAM:
            basis = passband_basis(self.scene.hologram.shape, self.rc_hologram)
            system = decompose(K @ basis, self.epsilon_rel, relative=True)
            return basis @ synthesize_incident(system, target)
        return synthesize_incident(decompose(K, self.epsilon_rel, relative=True), target)

    def encrypt(self, img, q: int, q_prime: int, block: int = 0,
                key: UserKey | None = None) -> tuple[CiphertextHologram, Receipt]:
        self._check_user(q)
        self._check_user(q_prime)
        pixels = img.pixels if isinstance(img, PlaintextImage) else np.asarray(img, dtype=np.float64)
        target = image_to_target(fit_to_grid(pixels, self.scene.sensor.shape))
        if key is None:
            key = self.new_key(q, q_prime, block)
        psi = self.synthesize(target, self.combined_matrix(key))

        peak = float(np.abs(psi).max())
        r = self.reference
        wave = ReferenceWave(r.gain * peak if peak > 0 else 1.0, r.alpha_x, r.alpha_z, self.scene.wavelength)
        t = hologram_record(psi, reference_field(wave, sample_plane(self.scene.hologram)))
        ct = CiphertextHologram(
            transparency=t,
            reference=wave,
            provenance={"q": q, "q_prime": q_prime, "block": block, "key_id": key.key_id},
            mode=self.mode,
            rc=self.rc_hologram,
            field=psi if self.mode == FIELD else None,
            shape=self.scene.hologram.shape,
        )
        self.keystore.add(key)
        token = hashlib.sha256(self.credential(q_prime).encode()).hexdigest()
        receipt = Receipt(key.key_id, q, q_prime, block, ciphertext_digest(ct), token)
        return ct, receipt

    # -- decryption ------------------------------------------------------

    def reconstruct_state_fields(self, ct: CiphertextHologram, key: UserKey,
                                 mode: str | None = None) -> list[np.ndarray]:
        return reconstruct_state_fields(ct, self._state_matrices(key), self.scene, mode, self.reference.gain)

    def decrypt_with_key(self, ct: CiphertextHologram, key: UserKey, mode: str | None = None) -> np.ndarray:
        """Reconstruction with an arbitrary key and no authorisation (attack harness)."""
        mode = mode or ct.mode
        fields = self.reconstruct_state_fields(ct, key, mode)
        return normalize(combine_fields(fields, key.coefficients, self.scene, mode,
                                        self.reference, self.rc_sensor))

    def decrypt(self, ct: CiphertextHologram, receipt: Receipt, credential: str,
                mode: str | None = None) -> PlaintextImage:
        if not hmac.compare_digest(ciphertext_digest(ct), receipt.digest):
            raise DigestMismatch("ciphertext does not match the receipt digest")
        key = self.keystore.get(receipt.key_id)
        if key is None:
            raise UnknownReceipt(f"no key {receipt.key_id} in the key store")
        prov = ct.provenance
        if (key.q, key.q_prime, key.block) != (receipt.q, receipt.q_prime, receipt.block) \
                or prov.get("key_id") != key.key_id:
            raise UnknownReceipt("receipt does not match the stored transaction")
        token = hashlib.sha256(str(credential).encode()).hexdigest()
        if not hmac.compare_digest(token, receipt.credential_token) \
                or not hmac.compare_digest(str(credential), self.credential(receipt.q_prime)):
            raise AuthFailure(f"credential rejected for user {receipt.q_prime}")
        return PlaintextImage(self.decrypt_with_key(ct, key, mode), source=f"decrypt:{key.key_id}")
