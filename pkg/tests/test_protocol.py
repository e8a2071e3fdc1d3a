import dataclasses
import json

import numpy as np
import pytest

from conftest import crandn
from scatter_crypt.errors import (
    AuthFailure, DigestMismatch, DimensionMismatch, EmptySpectrum, UnknownReceipt, UnknownUser,
    ValidationError,
)
from scatter_crypt.holography import passband_mask
from scatter_crypt.keyring import KeyStore, combine_states, key_from_phases, shuffle_block
from scatter_crypt.metrics import normalize, ssim
from scatter_crypt.protocol import (
    FIELD, HOLOGRAM, EncryptionServer, PlaintextImage, Receipt, ciphertext_digest,
    ciphertext_from_dict, ciphertext_to_dict, fit_to_grid, image_to_target, reconstruct_state_fields,
)
from scatter_crypt.store import canonical_json


@pytest.fixture(scope="module")
def issued(desk):
    srv = desk.server()
    imgs = desk.plaintexts()
    out = {}
    for q in (1, 2, 3):
        ct, rc = srv.encrypt(imgs[q - 1], q, q, 0)
        out[q] = (ct, rc, srv.keystore.get(rc.key_id), imgs[q - 1])
    return srv, out


def test_image_to_target():
    assert not image_to_target(np.zeros((2, 2))).any()
    np.testing.assert_array_equal(image_to_target(np.ones((2, 3))), np.ones(6, complex))
    img = np.random.default_rng(0).random((4, 4))
    np.testing.assert_array_equal(np.abs(image_to_target(PlaintextImage(img))), img.ravel())


def test_plaintext_validation():
    with pytest.raises(ValidationError):
        PlaintextImage(np.array([[1.5]]))
    with pytest.raises(DimensionMismatch):
        PlaintextImage(np.ones(4))


def test_fit_to_grid():
    img = np.arange(16.0).reshape(4, 4)
    np.testing.assert_array_equal(fit_to_grid(img, (4, 4)), img)
    np.testing.assert_array_equal(fit_to_grid(img, (2, 2)), [[2.5, 4.5], [10.5, 12.5]])
    with pytest.raises(DimensionMismatch):
        fit_to_grid(img, (3, 3))


def test_receipt_roundtrip(issued):
    _, out = issued
    rc = out[1][1]
    assert Receipt.from_dict(json.loads(json.dumps(rc.to_dict()))) == rc


def test_ciphertext_roundtrip_and_digest(issued):
    _, out = issued
    ct, rc = out[1][:2]
    again = ciphertext_from_dict(json.loads(json.dumps(ciphertext_to_dict(ct))))
    assert ciphertext_digest(again) == ciphertext_digest(ct) == rc.digest
    np.testing.assert_array_equal(again.transparency, ct.transparency)


def test_transparency_properties(issued, desk):
    _, out = issued
    ct, _, _, img = out[1]
    t = ct.transparency
    assert t.size == desk.scene.M and (t >= 0).all()
    # no visual correlation with the plaintext resampled onto the hologram grid
    hz, hx = desk.scene.hologram.shape
    iz = (np.arange(hz) * img.shape[0]) // hz
    ix = (np.arange(hx) * img.shape[1]) // hx
    up = img[np.ix_(iz, ix)].ravel()
    a, b = t - t.mean(), up - up.mean()
    assert abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)) < 0.2


def test_ciphertext_carries_no_key_material(issued):
    _, out = issued
    ct, rc, key, _ = out[2]
    blob = canonical_json(ciphertext_to_dict(ct)) + canonical_json(rc.to_dict())
    for z in key.coefficients:
        assert repr(z.real).encode() not in blob
    assert b"subset" not in blob and b"permutation" not in blob and b"coefficients" not in blob


def test_zero_plaintext(desk):
    srv = desk.server()
    ct, _ = srv.encrypt(np.zeros((16, 16)), 1, 1)
    assert not ct.field.any()
    np.testing.assert_allclose(ct.transparency, ct.reference.amplitude**2, rtol=1e-15)
    fields = srv.reconstruct_state_fields(ct, srv.keystore.get(_.key_id))
    assert all(not f.any() for f in fields)


def test_zero_state_gives_zero_field(desk, issued):
    _, out = issued
    ct = out[1][0]
    zero = np.zeros((desk.scene.N, desk.scene.M), complex)
    assert not reconstruct_state_fields(ct, [zero], desk.scene)[0].any()


def test_deterministic(desk):
    a, b = desk.server(), desk.server()
    img = desk.plaintexts()[0]
    ca, ra = a.encrypt(img, 1, 2, 3)
    cb, rb = b.encrypt(img, 1, 2, 3)
    assert canonical_json(ciphertext_to_dict(ca)) == canonical_json(ciphertext_to_dict(cb))
    assert ra == rb


def test_transaction_counter_gives_fresh_keys(desk):
    srv = desk.server()
    img = desk.plaintexts()[0]
    _, r1 = srv.encrypt(img, 1, 1, 0)
    _, r2 = srv.encrypt(img, 1, 1, 0)
    assert r1.key_id != r2.key_id and len(srv.keystore) == 2


def test_correct_key_and_wrong_keys(issued):
    srv, out = issued
    for q, (ct, rc, key, img) in out.items():
        target = normalize(img)
        correct = ssim(srv.decrypt(ct, rc, srv.credential(q)).pixels, target)
        plain = ssim(srv.decrypt_with_key(ct, key.with_coefficients(np.ones(len(key.subset)))), target)
        assert correct >= 0.9
        assert plain < 0.3
        for a, (_, _, other, _) in out.items():
            if a != q:
                wrong = ssim(srv.decrypt_with_key(ct, other), target)
                assert wrong < 0.3 and wrong < correct


def test_end_to_end_linearity(issued, desk):
    srv, out = issued
    ct, _, key, _ = out[1]
    sched = shuffle_block(key.block, srv.L, desk.settings.seeds["server"])
    mats = [desk.matrices[sched.physical(l) - 1] for l in key.subset]
    fields = reconstruct_state_fields(ct, mats, desk.scene)
    lhs = sum(c * f for c, f in zip(key.coefficients, fields))
    rhs = combine_states(mats, key).entries @ ct.field
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)
    np.testing.assert_allclose(srv.combined_matrix(key), combine_states(mats, key).entries, rtol=1e-15)


def test_range_projection_through_server(issued, desk):
    from scatter_crypt.inversion import decompose
    srv, out = issued
    ct, _, key, img = out[2]
    k = srv.combined_matrix(key)
    s = decompose(k, srv.epsilon_rel, relative=True)
    t = image_to_target(img)
    u0 = s.u[:, :s.p0]
    proj = u0 @ (u0.conj().T @ t)
    assert np.linalg.norm(k @ ct.field - proj) <= 1e-10 * np.linalg.norm(t)


def test_auth_failures(issued):
    srv, out = issued
    ct, rc, _, _ = out[1]
    with pytest.raises(AuthFailure):
        srv.decrypt(ct, rc, srv.credential(2))
    with pytest.raises(AuthFailure):
        srv.decrypt(ct, rc, "guess")
    tampered = dataclasses.replace(ct, transparency=ct.transparency * 1.0001)
    with pytest.raises(DigestMismatch):
        srv.decrypt(tampered, rc, srv.credential(1))
    with pytest.raises(UnknownReceipt):
        srv.decrypt(ct, dataclasses.replace(rc, key_id="0" * 32), srv.credential(1))
    with pytest.raises(UnknownReceipt):
        srv.decrypt(ct, dataclasses.replace(rc, q=2), srv.credential(1))
    with pytest.raises(UnknownUser):
        srv.encrypt(np.zeros((16, 16)), 1, 9)
    with pytest.raises(UnknownUser):
        srv.credential(0)


def test_fresh_server_does_not_know_foreign_receipts(desk, issued):
    _, out = issued
    ct, rc, _, _ = out[1]
    other = desk.server(keystore=KeyStore())
    with pytest.raises(UnknownReceipt):
        other.decrypt(ct, rc, other.credential(1))


def test_empty_spectrum(desk):
    zero = [np.zeros((desk.scene.N, desk.scene.M), complex)] * 4
    srv = EncryptionServer(desk.scene, zero, server_seed=1, key_seed=1)
    with pytest.raises(EmptySpectrum):
        srv.encrypt(desk.plaintexts()[0], 1, 1)


def test_server_validation(desk):
    with pytest.raises(ValidationError):
        EncryptionServer(desk.scene, desk.matrices, server_seed=1, key_seed=1, mode="optical")
    with pytest.raises(DimensionMismatch):
        EncryptionServer(desk.scene, [np.zeros((3, 3))], server_seed=1, key_seed=1)


def test_field_mode_needs_field(issued):
    srv, out = issued
    ct, _, key, _ = out[1]
    with pytest.raises(ValidationError):
        srv.decrypt_with_key(dataclasses.replace(ct, field=None), key, FIELD)


def _band_limited(img, rc):
    return normalize(np.real(np.fft.ifft2(np.fft.fft2(img) * passband_mask(img.shape, rc))))


def test_field_and_hologram_state_fields_agree(desk_holo):
    srv = desk_holo.server()
    img = _band_limited(desk_holo.plaintexts()[0], srv.rc_sensor)
    ct, rc = srv.encrypt(img, 1, 1)
    assert ct.field is None and ct.mode == HOLOGRAM
    key = srv.keystore.get(rc.key_id)
    psi = srv.synthesize(image_to_target(img), srv.combined_matrix(key))
    with_field = dataclasses.replace(ct, field=psi)
    f_field = srv.reconstruct_state_fields(with_field, key, FIELD)
    f_holo = srv.reconstruct_state_fields(ct, key, HOLOGRAM)
    for a, b in zip(f_field, f_holo):
        assert np.linalg.norm(a - b) <= 0.05 * np.linalg.norm(a)
    out = srv.decrypt(ct, rc, srv.credential(1)).pixels
    assert ssim(out, img) >= 0.9
