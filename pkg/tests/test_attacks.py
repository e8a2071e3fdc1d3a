import csv
import json

import numpy as np
import pytest

from scatter_crypt.attacks import (
    AttackReport, TrialRecord, cross_user_attack, key_proximity_analysis, random_key_attack,
)
from scatter_crypt.errors import InsufficientUsers, SubsetMismatch, ValidationError
from scatter_crypt.keyring import key_from_phases, phase_coefficients


@pytest.fixture(scope="module")
def world(desk):
    srv = desk.server()
    imgs = desk.plaintexts()
    cts, keys, plains = {}, {}, {}
    for q in (1, 2, 3):
        ct, rc = srv.encrypt(imgs[q - 1], q, q, 0)
        cts[q], keys[q], plains[q] = ct, srv.keystore.get(rc.key_id), imgs[q - 1]
    return srv, cts, keys, plains


def test_cross_needs_two_users(world):
    srv, cts, keys, plains = world
    with pytest.raises(InsufficientUsers):
        cross_user_attack(srv, {1: cts[1]}, keys, plains)


def test_cross_attack(world):
    srv, cts, keys, plains = world
    before = {k.key_id: k.coefficients.copy() for k in srv.keystore}
    rep = cross_user_attack(srv, cts, keys, plains)
    assert len(rep.trials) == 6
    assert {t.label for t in rep.trials} >= {"victim1-key2", "victim3-key1"}
    assert rep.correct_ssim >= 0.9
    assert rep.max_ssim < 0.3
    assert rep.separation_ratio >= 2.0
    after = {k.key_id: k for k in srv.keystore}
    assert before.keys() == after.keys()
    for k in before:
        np.testing.assert_array_equal(before[k], after[k].coefficients)


def test_cross_with_identical_keys_matches_correct(world):
    srv, cts, keys, plains = world
    same = {1: keys[1], 2: keys[1]}
    rep = cross_user_attack(srv, {1: cts[1], 2: cts[1]}, same, {1: plains[1], 2: plains[1]})
    for t in rep.trials:
        assert t.ssim == pytest.approx(t.baseline, abs=1e-12)


def test_random_attack_forced_correct_trial(world):
    srv, cts, keys, plains = world
    k = keys[1]
    rep = random_key_attack(srv, cts[1], plains[1], k, n_trials=2,
                            trial_coefficients=[k.coefficients, -k.coefficients])
    # a global sign flip leaves the decrypted magnitude unchanged
    assert rep.trials[0].ssim == pytest.approx(rep.correct_ssim, abs=1e-12)
    assert rep.trials[1].ssim == pytest.approx(rep.correct_ssim, abs=1e-9)


def test_random_attack_deterministic(world):
    srv, cts, keys, plains = world
    a = random_key_attack(srv, cts[1], plains[1], keys[1], n_trials=5, seed=11)
    b = random_key_attack(srv, cts[1], plains[1], keys[1], n_trials=5, seed=11)
    assert [t.ssim for t in a.trials] == [t.ssim for t in b.trials]
    c = random_key_attack(srv, cts[1], plains[1], keys[1], n_trials=5, seed=12)
    assert [t.ssim for t in a.trials] != [t.ssim for t in c.trials]
    for t in a.trials:
        np.testing.assert_allclose(np.abs(t.coefficients), 1.0, atol=1e-12)
        assert t.subset == keys[1].subset


def test_random_attack_validation(world):
    srv, cts, keys, plains = world
    with pytest.raises(ValidationError):
        random_key_attack(srv, cts[1], plains[1], keys[1], n_trials=0)


def test_random_attack_separation_typical(world):
    """Most seeds separate; near-global-rotation draws are the exception."""
    srv, cts, keys, plains = world
    rep = random_key_attack(srv, cts[1], plains[1], keys[1], n_trials=20, seed=5, keep_images=False)
    assert rep.separation_ratio >= 2.0
    assert rep.correct_ssim >= 0.9


def test_high_scoring_random_keys_are_near_a_global_rotation(world):
    srv, cts, keys, plains = world
    k = keys[1]
    rep = random_key_attack(srv, cts[1], plains[1], k, n_trials=40, seed=3, keep_images=False)
    rel = key_proximity_analysis(rep, k, relative=True).max(axis=1)
    scores = np.array([t.ssim for t in rep.trials])
    best, worst = np.argmax(scores), np.argmin(scores)
    assert rel[best] < rel[worst]
    # rotating the correct key by any common phase is a perfect forgery
    rot = k.coefficients * np.exp(0.77j * np.pi)
    forged = random_key_attack(srv, cts[1], plains[1], k, n_trials=1, trial_coefficients=[rot])
    assert forged.trials[0].ssim == pytest.approx(forged.correct_ssim, abs=1e-9)
    assert key_proximity_analysis(forged, k, relative=True).max() < 1e-12


def test_proximity_examples():
    key = key_from_phases(1, 1, 0, (1, 2), (0.0, 0.0))
    key = key.with_coefficients(np.array([np.exp(0.3j * np.pi), 1.0]))
    trial = TrialRecord(0, "t", (1, 2), np.array([np.exp(-0.7j * np.pi), -1.0]), 0.1, 0.9)
    d = key_proximity_analysis(AttackReport("random", [trial], 0.9), key)
    np.testing.assert_allclose(d, [[np.pi, np.pi]], atol=1e-12)
    same = TrialRecord(1, "s", (1, 2), key.coefficients, 0.9, 0.9)
    assert key_proximity_analysis(AttackReport("random", [same], 0.9), key).max() < 1e-12


def test_proximity_subset_mismatch():
    key = key_from_phases(1, 1, 0, (1, 2), (0.0, 0.0))
    trial = TrialRecord(0, "t", (1, 3), phase_coefficients([0.1, 0.2]), 0.1, 0.9)
    with pytest.raises(SubsetMismatch):
        key_proximity_analysis(AttackReport("random", [trial], 0.9), key)


def test_outputs(world, tmp_path):
    srv, cts, keys, plains = world
    rep = random_key_attack(srv, cts[2], plains[2], keys[2], n_trials=3, seed=1)
    rep.write_csv(tmp_path / "trials.csv")
    rep.write_summary(tmp_path / "summary.json")
    paths = rep.write_images(tmp_path / "img")
    rows = list(csv.reader(open(tmp_path / "trials.csv")))
    n = len(keys[2].subset)
    assert rows[0][:4] == ["trial", "label", "c1_re", "c1_im"] and rows[0][-2:] == ["ssim", "baseline_ssim"]
    assert len(rows) == 4 and len(rows[0]) == 4 + 2 * n
    assert float(rows[1][-1]) == rep.correct_ssim
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["n_trials"] == 3 and summary["max_ssim"] == rep.max_ssim
    assert [p.name for p in paths] == ["random_000.pgm", "random_001.pgm", "random_002.pgm"]
