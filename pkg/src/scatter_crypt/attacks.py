"""Security-evaluation harness: cross-user key misuse and random-key brute force."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientUsers, IoFailure, SubsetMismatch, ValidationError
from .keyring import UserKey, phase_coefficients
from .metrics import SsimParams, normalize, ssim
from .protocol import EncryptionServer, fit_to_grid
from .holography import CiphertextHologram
from .store import write_pgm


@dataclass
class TrialRecord:
    index: int
    label: str
    subset: tuple[int, ...]
    coefficients: np.ndarray
    ssim: float
    baseline: float
    image: np.ndarray | None = field(default=None, repr=False)


@dataclass
class AttackReport:
    scenario: str
    trials: list[TrialRecord]
    correct_ssim: float

    @property
    def max_ssim(self) -> float:
        return max(t.ssim for t in self.trials)

    @property
    def separation_ratio(self) -> float:
        """Worst-case correct-key SSIM over best attack SSIM, per victim baseline."""
        ratios = [t.baseline / t.ssim if t.ssim > 0 else math.inf for t in self.trials]
        return min(ratios)

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_trials": len(self.trials),
            "max_ssim": self.max_ssim,
            "correct_ssim": self.correct_ssim,
            "separation_ratio": self.separation_ratio,
        }

    def write_csv(self, path) -> None:
        width = max(len(t.coefficients) for t in self.trials)
        header = ["trial", "label"]
        for i in range(width):
            header += [f"c{i + 1}_re", f"c{i + 1}_im"]
        header += ["ssim", "baseline_ssim"]
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for t in self.trials:
                    row = [t.index, t.label]
                    for z in t.coefficients.tolist():
                        row += [repr(z.real), repr(z.imag)]
                    row += [""] * (len(header) - 2 - len(row))
                    row += [repr(t.ssim), repr(t.baseline)]
                    w.writerow(row)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from None

    def write_summary(self, path) -> None:
        try:
            Path(path).write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from None

    def write_images(self, directory) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = []
        for t in self.trials:
            if t.image is not None:
                p = d / f"{self.scenario}_{t.index:03d}.pgm"
                write_pgm(p, t.image)
                paths.append(p)
        return paths


def _score(recon, plaintext, params: SsimParams) -> float:
    return ssim(normalize(recon), normalize(plaintext), params)


def cross_user_attack(server: EncryptionServer, ciphertexts: Mapping[int, CiphertextHologram],
                      keys: Mapping[int, UserKey], plaintexts: Mapping[int, np.ndarray],
                      params: SsimParams = SsimParams(), keep_images: bool = True) -> AttackReport:
    """Decrypt every victim's ciphertext with every other user's key.

    Credentials are bypassed on purpose (leaked-key model); the key store is
    only read.
    """
    users = sorted(ciphertexts)
    if len(users) < 2:
        raise InsufficientUsers("cross-user attack needs at least two users")
    shape = server.scene.sensor.shape
    baselines = {}
    for v in users:
        plain = fit_to_grid(plaintexts[v], shape)
        baselines[v] = _score(server.decrypt_with_key(ciphertexts[v], keys[v]), plain, params)
    trials = []
    for v in users:
        plain = fit_to_grid(plaintexts[v], shape)
        for a in users:
            if a == v:
                continue
            recon = server.decrypt_with_key(ciphertexts[v], keys[a])
            trials.append(TrialRecord(len(trials), f"victim{v}-key{a}", keys[a].subset,
                                      keys[a].coefficients.copy(), _score(recon, plain, params),
                                      baselines[v], recon if keep_images else None))
    return AttackReport("cross", trials, min(baselines.values()))


def random_key_attack(server: EncryptionServer, ct: CiphertextHologram, victim_plaintext,
                      correct_key: UserKey, n_trials: int = 20, seed: int = 0,
                      subset: Sequence[int] | None = None, trial_coefficients=None,
                      params: SsimParams = SsimParams(), keep_images: bool = True) -> AttackReport:
    """Eavesdropper knows the ciphertext and the state matrices but not the coefficients.

    Each trial keeps the known ``subset`` and draws fresh unit-modulus
    coefficients exp(-j C pi), C uniform on (-1, 1]. ``trial_coefficients``
    overrides the draws (rows = trials).
    """
    if n_trials < 1:
        raise ValidationError("n_trials must be at least 1")
    subset = tuple(subset) if subset is not None else correct_key.subset
    plain = fit_to_grid(victim_plaintext, server.scene.sensor.shape)
    baseline = _score(server.decrypt_with_key(ct, correct_key), plain, params)
    if trial_coefficients is None:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x4154]))
        trial_coefficients = phase_coefficients(-rng.uniform(-1.0, 1.0, size=(n_trials, len(subset))))
    trial_coefficients = np.asarray(trial_coefficients, dtype=np.complex128).reshape(n_trials, len(subset))
    trials = []
    for i, coeffs in enumerate(trial_coefficients):
        fake = UserKey(correct_key.q, correct_key.q_prime, correct_key.block, subset, coeffs,
                       key_id=f"trial-{i}", seed=int(seed))
        recon = server.decrypt_with_key(ct, fake)
        trials.append(TrialRecord(i, f"trial{i}", subset, coeffs.copy(), _score(recon, plain, params),
                                  baseline, recon if keep_images else None))
    return AttackReport("random", trials, baseline)


def _wrap(phi):
    return np.abs((np.asarray(phi) + np.pi) % (2 * np.pi) - np.pi)


def key_proximity_analysis(report: AttackReport, correct_key: UserKey,
                           relative: bool = False) -> np.ndarray:
    """Per-trial, per-component wrapped phase distance to the correct key, in [0, pi].

    With ``relative`` the common phase that best aligns the trial to the
    correct key is removed first; decrypted magnitudes are blind to it.
    """
    rows = []
    for t in report.trials:
        if tuple(t.subset) != tuple(correct_key.subset) or len(t.coefficients) != len(correct_key.coefficients):
            raise SubsetMismatch(f"trial {t.index} uses subset {t.subset}, key uses {correct_key.subset}")
        delta = np.angle(t.coefficients / correct_key.coefficients)
        if relative:
            delta = delta - np.angle(np.exp(1j * delta).sum())
        rows.append(_wrap(delta))
    return np.array(rows)
