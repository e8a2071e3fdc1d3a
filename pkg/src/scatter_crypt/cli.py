"""Command-line entry point.

A run works inside one output directory (``--out``)::

    config.json        effective scene and run settings (no server seed)
    states/state_NN.json
    sm/sm_NN.scm       scattering matrices
    keys.json          server key store
    manifests/         one manifest per invocation

The server seed is resolved at run time from ``--server-secret``,
``--seed-server`` or the source config, and is never printed or written.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import os
import struct
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND, num_threads
from .attacks import cross_user_attack, key_proximity_analysis, random_key_attack
from .errors import IoFailure, ScatterCryptError, ValidationError
from .experiment import BUNDLED_CONFIGS, RunSettings, bundled_plaintexts, load_config
from .foldylax import ScatteringState, sample_state, scattering_matrix
from .keyring import KeyStore, read_server_secret, seed_fingerprint
from .metrics import normalize, ssim
from .protocol import (
    MODES, EncryptionServer, Receipt, ciphertext_from_dict, ciphertext_to_dict, fit_to_grid,
)
from .scene import build_scene
from .store import load_matrix, read_image, read_json, save_matrix, write_image, write_json

_SEED_NAMES = ("medium", "server", "keys", "attack")


# --- workspace helpers ------------------------------------------------------

def _state_path(out: Path, l: int) -> Path:
    return out / "states" / f"state_{l:02d}.json"


def _sm_path(out: Path, l: int) -> Path:
    return out / "sm" / f"sm_{l:02d}.scm"


def _public_config(cfg: dict) -> dict:
    """Copy of a config with the server seed removed."""
    pub = {k: v for k, v in cfg.items()}
    run = dict(pub.get("run", {}))
    seeds = {k: v for k, v in dict(run.get("seeds", {})).items() if k != "server"}
    run["seeds"] = seeds
    pub["run"] = run
    return pub


class Context:
    """Resolved configuration, settings and secrets for one invocation."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        ws_cfg = self.out / "config.json"
        if args.config is None and ws_cfg.exists():
            self.config = read_json(ws_cfg)
            self.source = self.config.get("source", "desk")
        else:
            self.source = args.config or "desk"
            self.config = load_config(self.source)
        overrides = {f"seed_{n}": getattr(args, f"seed_{n}", None) for n in _SEED_NAMES}
        overrides.update(mode=getattr(args, "mode", None), epsilon_rel=getattr(args, "epsilon_rel", None),
                         trials=getattr(args, "trials", None))
        self.settings = RunSettings.from_config(self.config).with_overrides(**overrides)
        self.scene = build_scene(self.config)
        self._server_seed = self._resolve_server_seed()

    def _resolve_server_seed(self) -> int:
        a = self.args
        if getattr(a, "server_secret", None):
            return read_server_secret(a.server_secret)
        if getattr(a, "seed_server", None) is not None:
            return int(a.seed_server)
        src = load_config(self.source) if (self.source in BUNDLED_CONFIGS or Path(self.source).exists()) else {}
        seed = src.get("run", {}).get("seeds", {}).get("server")
        if seed is None:
            raise ValidationError("no server seed: pass --server-secret or --seed-server")
        return int(seed)

    def effective_config(self) -> dict:
        cfg = _public_config(self.config)
        s = self.settings
        cfg["source"] = str(self.source)
        cfg["run"].update(L=s.L, subset_size=s.subset_size, users=s.users, epsilon_rel=s.epsilon_rel,
                          mode=s.mode, trials=s.trials, rc_hologram=s.rc_hologram, rc_sensor=s.rc_sensor)
        cfg["run"]["seeds"] = {k: v for k, v in s.seeds.items() if k != "server"}
        return cfg

    def matrices(self) -> list[np.ndarray]:
        mats = []
        for l in range(1, self.settings.L + 1):
            p = _sm_path(self.out, l)
            if not p.exists():
                raise IoFailure(f"{p} missing; run compute-sm first")
            mats.append(load_matrix(p))
        return mats

    def server(self, keystore: KeyStore | None = None) -> EncryptionServer:
        s = self.settings
        return EncryptionServer(
            self.scene, self.matrices(), server_seed=self._server_seed, key_seed=s.seeds["keys"],
            users=range(1, s.users + 1), subset_size=s.subset_size, epsilon_rel=s.epsilon_rel,
            mode=s.mode, reference=s.reference, rc_hologram=s.rc_hologram, rc_sensor=s.rc_sensor,
            keystore=keystore if keystore is not None else KeyStore(self.out / "keys.json"))

    def manifest(self, command: str, started: str, outputs: list[Path], extra: dict | None = None) -> Path:
        s = self.settings
        rec = {
            "command": command,
            "argv": _redact(sys.argv[1:]),
            "config": str(self.source),
            "seeds": {"medium": s.seeds["medium"], "keys": s.seeds["keys"], "attack": s.seeds["attack"],
                      "server_fingerprint": seed_fingerprint(self._server_seed)},
            "out": str(self.out),
            "mode": s.mode,
            "epsilon_rel": s.epsilon_rel,
            "backend": BACKEND,
            "threads": num_threads(),
            "version": __version__,
            "started": started,
            "finished": _now(),
            "outputs": {str(p): _sha256(p) for p in outputs if Path(p).is_file()},
        }
        if extra:
            rec.update(extra)
        stamp = started.replace(":", "").replace("-", "")
        path = self.out / "manifests" / f"{stamp}_{command.replace(' ', '-')}.json"
        n = 1
        while path.exists():
            path = path.with_name(f"{stamp}_{command.replace(' ', '-')}_{n}.json")
            n += 1
        write_json(path, rec)
        return path


def _redact(argv: list[str]) -> list[str]:
    out, hide = [], False
    for a in argv:
        if hide:
            out.append("<redacted>")
            hide = False
        elif a in ("--credential", "--seed-server"):
            out.append(a)
            hide = True
        elif a.startswith(("--credential=", "--seed-server=")):
            out.append(a.split("=", 1)[0] + "=<redacted>")
        else:
            out.append(a)
    return out


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _plaintext(path: str | None, q: int) -> np.ndarray:
    if path:
        return read_image(path)
    imgs = bundled_plaintexts()
    return imgs[(q - 1) % len(imgs)]


# --- subcommands ------------------------------------------------------------

def cmd_gen_medium(ctx: Context) -> list[Path]:
    s = ctx.settings
    write_json(ctx.out / "config.json", ctx.effective_config())
    outs = [ctx.out / "config.json"]
    for l in range(1, s.L + 1):
        st = sample_state(ctx.scene.medium, l, s.seeds["medium"])
        write_json(_state_path(ctx.out, l), st.to_dict())
        outs.append(_state_path(ctx.out, l))
    print(f"sampled {s.L} states of {ctx.scene.medium.n_particles} particles into {ctx.out / 'states'}")
    return outs


def cmd_compute_sm(ctx: Context) -> list[Path]:
    outs = []
    for l in range(1, ctx.settings.L + 1):
        p = _state_path(ctx.out, l)
        if not p.exists():
            raise IoFailure(f"{p} missing; run gen-medium first")
        sm = scattering_matrix(ScatteringState.from_dict(read_json(p)), ctx.scene)
        (ctx.out / "sm").mkdir(parents=True, exist_ok=True)
        save_matrix(sm, _sm_path(ctx.out, l))
        outs.append(_sm_path(ctx.out, l))
        print(f"state {l}: scattering matrix {sm.shape[0]}x{sm.shape[1]}")
    return outs


def cmd_encrypt(ctx: Context) -> list[Path]:
    a = ctx.args
    server = ctx.server()
    q_prime = a.q_prime if a.q_prime is not None else a.q
    ct, receipt = server.encrypt(_plaintext(a.image, a.q), a.q, q_prime, a.block)
    server.keystore.save()
    name = a.name or f"ct_{a.q}_{q_prime}_{a.block}"
    ct_path = ctx.out / "ciphertexts" / f"{name}.json"
    rc_path = ctx.out / "ciphertexts" / f"{name}.receipt.json"
    write_json(ct_path, ciphertext_to_dict(ct))
    write_json(rc_path, receipt.to_dict())
    print(f"ciphertext {ct_path}\nreceipt {rc_path}")
    return [ct_path, rc_path, ctx.out / "keys.json"]


def cmd_credential(ctx: Context) -> list[Path]:
    cred = ctx.server(keystore=KeyStore()).credential(ctx.args.q)
    if ctx.args.to:
        p = Path(ctx.args.to)
        try:
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(cred + "\n")
            os.chmod(p, 0o600)
        except OSError as exc:
            raise IoFailure(f"cannot write {p}: {exc}") from None
        return [p]
    print(cred)
    return []


def cmd_decrypt(ctx: Context) -> list[Path]:
    a = ctx.args
    if a.credential is None and a.credential_file is None:
        raise ValidationError("decrypt needs --credential or --credential-file")
    if a.credential_file:
        try:
            cred = Path(a.credential_file).read_text().strip()
        except OSError as exc:
            raise IoFailure(f"cannot read {a.credential_file}: {exc}") from None
    else:
        cred = a.credential
    server = ctx.server()
    ct = ciphertext_from_dict(read_json(a.ciphertext))
    receipt = Receipt.from_dict(read_json(a.receipt))
    img = server.decrypt(ct, receipt, cred, mode=getattr(a, "mode", None)).pixels
    out = Path(a.image_out) if a.image_out else Path(a.ciphertext).with_suffix(".decrypted.pgm")
    write_image(out, img)
    print(f"decrypted image {out}")
    if a.reference:
        ref = fit_to_grid(read_image(a.reference), img.shape)
        print(f"ssim {ssim(img, normalize(ref)):.6f}")
    return [out]


def _issue_all(ctx: Context, server: EncryptionServer, images: list[str] | None):
    users = range(1, ctx.settings.users + 1)
    cts, keys, plains = {}, {}, {}
    for q in users:
        img = _plaintext(images[q - 1] if images and q - 1 < len(images) else None, q)
        ct, r = server.encrypt(img, q, q, 0)
        cts[q], keys[q], plains[q] = ct, server.keystore.get(r.key_id), img
    return cts, keys, plains


def _write_report(report, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    report.write_csv(directory / "trials.csv")
    report.write_summary(directory / "summary.json")
    return [directory / "trials.csv", directory / "summary.json", *report.write_images(directory / "images")]


def cmd_attack(ctx: Context) -> list[Path]:
    a = ctx.args
    server = ctx.server(keystore=KeyStore())
    cts, keys, plains = _issue_all(ctx, server, a.images)
    if a.kind == "cross":
        report = cross_user_attack(server, cts, keys, plains)
    else:
        v = a.victim
        if v not in cts:
            raise ValidationError(f"victim {v} is not a registered user")
        report = random_key_attack(server, cts[v], plains[v], keys[v], ctx.settings.trials,
                                   ctx.settings.seeds["attack"])
    d = ctx.out / f"attack_{a.kind}"
    outs = _write_report(report, d)
    if a.kind == "random":
        dist = key_proximity_analysis(report, keys[a.victim], relative=True)
        np.savetxt(d / "proximity.csv", dist / np.pi, delimiter=",", fmt="%.6f",
                   header="relative phase distance / pi per component", comments="")
        outs.append(d / "proximity.csv")
    s = report.summary()
    print(f"{a.kind}: correct ssim {s['correct_ssim']:.4f}, max attack ssim {s['max_ssim']:.4f}, "
          f"separation {s['separation_ratio']:.2f}")
    return outs


def _grid(images: list[np.ndarray], cols: int, pad: int = 2) -> np.ndarray:
    h = max(i.shape[0] for i in images)
    w = max(i.shape[1] for i in images)
    rows = -(-len(images) // cols)
    out = np.ones((rows * (h + pad) - pad, cols * (w + pad) - pad))
    for n, img in enumerate(images):
        r, c = divmod(n, cols)
        out[r * (h + pad):r * (h + pad) + img.shape[0], c * (w + pad):c * (w + pad) + img.shape[1]] = normalize(img)
    return out


def cmd_report(ctx: Context) -> list[Path]:
    """Panels: per-user encryption/decryption rows, the cross-key grid and random-key trials."""
    server = ctx.server(keystore=KeyStore())
    cts, keys, plains = _issue_all(ctx, server, ctx.args.images)
    users = sorted(cts)
    shape = ctx.scene.sensor.shape
    d = ctx.out / "report"
    d.mkdir(parents=True, exist_ok=True)
    outs = []

    rows, lines = [], ["user,partner,key_id,correct_ssim,plain_sum_ssim"]
    for q in users:
        p = normalize(fit_to_grid(plains[q], shape))
        correct = server.decrypt_with_key(cts[q], keys[q])
        plain_sum = server.decrypt_with_key(cts[q], keys[q].with_coefficients(np.ones(len(keys[q].subset))))
        holo = cts[q].transparency.reshape(cts[q].shape)
        rows += [p, holo, plain_sum, correct]
        lines.append(f"{q},{keys[q].q_prime},{keys[q].key_id},{ssim(correct, p):.6f},{ssim(plain_sum, p):.6f}")
    write_image(d / "encryption_panel.pgm", _grid(rows, 4))
    (d / "encryption.csv").write_text("\n".join(lines) + "\n")
    outs += [d / "encryption_panel.pgm", d / "encryption.csv"]

    cross = cross_user_attack(server, cts, keys, plains)
    write_image(d / "cross_panel.pgm", _grid([t.image for t in cross.trials], len(users) - 1))
    outs += _write_report(cross, d / "cross")
    outs.append(d / "cross_panel.pgm")

    v = ctx.args.victim
    rnd = random_key_attack(server, cts[v], plains[v], keys[v], ctx.settings.trials, ctx.settings.seeds["attack"])
    write_image(d / "random_panel.pgm", _grid([t.image for t in rnd.trials], 5))
    outs += _write_report(rnd, d / "random")
    outs.append(d / "random_panel.pgm")

    summary = {"cross": cross.summary(), "random": rnd.summary(), "victim": v}
    write_json(d / "summary.json", summary)
    outs.append(d / "summary.json")
    print(f"report written to {d}")
    return outs


_CIFAR_RECORD = 1 + 3 * 32 * 32


def cifar_to_pgm(batch: str | Path, indices, out_dir: str | Path) -> list[Path]:
    """Convert records of a CIFAR-10 binary batch to 32x32 greyscale PGM (BT.601 luma)."""
    try:
        data = Path(batch).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {batch}: {exc}") from None
    if len(data) % _CIFAR_RECORD:
        raise IoFailure(f"{batch}: size {len(data)} is not a multiple of {_CIFAR_RECORD}")
    n = len(data) // _CIFAR_RECORD
    recs = np.frombuffer(data, dtype=np.uint8).reshape(n, _CIFAR_RECORD)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in indices:
        if not 0 <= i < n:
            raise ValidationError(f"record {i} outside batch of {n}")
        rgb = recs[i, 1:].reshape(3, 32, 32).astype(np.float64) / 255.0
        grey = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
        p = out / f"cifar_{i:05d}_label{recs[i, 0]}.pgm"
        write_image(p, grey)
        paths.append(p)
    return paths


# --- argument parsing -------------------------------------------------------

def _common(p: argparse.ArgumentParser, seeds=_SEED_NAMES, run_opts=True) -> None:
    p.add_argument("--config", help="bundled config name (desk, desk_holo, paper) or JSON path; "
                                    "defaults to the workspace config, then desk")
    p.add_argument("--out", default="scatter_run", help="workspace directory (default: %(default)s)")
    p.add_argument("--server-secret", help="file holding the server seed")
    for name in seeds:
        p.add_argument(f"--seed-{name}", type=int, default=None)
    if run_opts:
        p.add_argument("--mode", choices=MODES, default=None)
        p.add_argument("--epsilon-rel", type=float, default=None,
                       help="singular values below this fraction of the largest are discarded")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scatter-crypt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-medium", help="sample the L scattering states")
    _common(p)
    p.add_argument("--seed", dest="seed_medium_alias", type=int, default=None, help="alias of --seed-medium")

    p = sub.add_parser("compute-sm", help="scattering matrix for every sampled state")
    _common(p)

    p = sub.add_parser("encrypt", help="image in, ciphertext and receipt out")
    _common(p)
    p.add_argument("--image", help="PGM or CSV plaintext (default: bundled image for the sender)")
    p.add_argument("--q", type=int, default=1, help="sending user")
    p.add_argument("--q-prime", type=int, default=None, help="receiving user (default: the sender, i.e. storage)")
    p.add_argument("--block", type=int, default=0)
    p.add_argument("--name", help="ciphertext file stem")

    p = sub.add_parser("credential", help="issue a user's credential")
    _common(p, run_opts=False)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--to", help="write to this file (mode 0600) instead of stdout")

    p = sub.add_parser("decrypt", help="ciphertext, receipt and credential in, image out")
    _common(p)
    p.add_argument("--ciphertext", required=True)
    p.add_argument("--receipt", required=True)
    p.add_argument("--credential")
    p.add_argument("--credential-file")
    p.add_argument("--image-out")
    p.add_argument("--reference", help="plaintext to score the result against (prints SSIM)")

    p = sub.add_parser("attack", help="cross-user or random-key attack")
    p.add_argument("kind", choices=("cross", "random"))
    _common(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--victim", type=int, default=1)
    p.add_argument("--images", nargs="+", help="plaintexts for users 1..Q (default: bundled)")

    p = sub.add_parser("report", help="panel images and summaries for all experiments")
    _common(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--victim", type=int, default=1)
    p.add_argument("--images", nargs="+")

    p = sub.add_parser("cifar-to-pgm", help="convert CIFAR-10 binary batch records to PGM")
    p.add_argument("batch")
    p.add_argument("--indices", type=int, nargs="+", default=[0])
    p.add_argument("--out", default="plaintexts")
    return ap


_COMMANDS = {
    "gen-medium": cmd_gen_medium,
    "compute-sm": cmd_compute_sm,
    "encrypt": cmd_encrypt,
    "credential": cmd_credential,
    "decrypt": cmd_decrypt,
    "attack": cmd_attack,
    "report": cmd_report,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=num_threads()):
            if args.command == "cifar-to-pgm":
                for p in cifar_to_pgm(args.batch, args.indices, args.out):
                    print(p)
                return 0
            if getattr(args, "seed_medium_alias", None) is not None and args.seed_medium is None:
                args.seed_medium = args.seed_medium_alias
            started = _now()
            ctx = Context(args)
            outputs = _COMMANDS[args.command](ctx)
            name = args.command if args.command != "attack" else f"attack {args.kind}"
            ctx.manifest(name, started, outputs)
            return 0
    except ScatterCryptError as exc:
        print(f"scatter-crypt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, struct.error) as exc:
        print(f"scatter-crypt: I/O error: {exc}", file=sys.stderr)
        return IoFailure.exit_code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
