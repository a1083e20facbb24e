"""Command-line front-end wiring the simulator, hashing, statistics,
authentication store, and encryption demo together."""

from __future__ import annotations

import json
import os
import shutil
import sys

import click
import numpy as np

from . import crypto, hashing, metrics, optics, pgm, pipeline
from .auth import CrpStore, far_frr, verify
from .exceptions import (DuplicateRecordError, KeyCapacityError,
                         RecordNotFoundError)

EXIT_ACCEPT = 0
EXIT_REJECT = 1
EXIT_ERROR = 2


def _fail(message: str, code: str = "error") -> None:
    click.echo(json.dumps({"error": code, "message": message}), err=True)
    sys.exit(EXIT_ERROR)


def _guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except RecordNotFoundError as exc:
        _fail(str(exc), "not_found")
    except DuplicateRecordError as exc:
        _fail(str(exc), "conflict")
    except KeyCapacityError as exc:
        _fail(str(exc), "capacity")
    except (ValueError, OSError) as exc:
        _fail(str(exc))


@click.group()
def main():
    """Virtual optical-token toolkit: simulate, hash, evaluate, authenticate,
    encrypt."""


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--rows", type=int, default=256, show_default=True)
@click.option("--cols", type=int, default=256, show_default=True)
@click.option("--pitch", type=float, default=2.0, show_default=True)
@click.option("--correlation-length", type=float, default=8.0, show_default=True)
@click.option("--rms-height", type=float, default=5.0, show_default=True)
@click.option("--refractive-index", type=float, default=1.5, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def mint(seed, rows, cols, pitch, correlation_length, rms_height,
         refractive_index, out):
    """Mint a virtual token and write its JSON descriptor."""
    params = optics.SurfaceParams(grid_dims=(rows, cols), pitch=pitch,
                                  correlation_length=correlation_length,
                                  rms_height=rms_height,
                                  refractive_index=refractive_index)
    puf = _guarded(optics.mint_puf, seed, params)
    puf.save(out)
    click.echo(json.dumps({"puf_id": puf.puf_id, "path": out}))


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--rows", type=int, default=256, show_default=True)
@click.option("--cols", type=int, default=256, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def challenge(seed, rows, cols, out):
    """Draw a random-phase challenge and write its JSON descriptor."""
    chal = _guarded(optics.make_challenge, seed, (rows, cols))
    chal.save(out)
    click.echo(json.dumps({"challenge_id": chal.challenge_id, "path": out}))


@main.command()
@click.option("--puf", "puf_path", type=click.Path(exists=True), required=True)
@click.option("--challenge", "challenge_path", type=click.Path(exists=True),
              required=True)
@click.option("--wavelength", type=float, default=0.6328, show_default=True)
@click.option("--z1", type=float, default=5.0e4, show_default=True)
@click.option("--z2", type=float, default=5.0e4, show_default=True)
@click.option("--bits", type=click.Choice(["8", "12", "16"]), default="8",
              show_default=True)
@click.option("--shift", nargs=2, type=float, default=(0.0, 0.0),
              help="Lateral token shift (dx dy) in um.")
@click.option("--noise-sigma", type=float, default=0.0, show_default=True)
@click.option("--noise-seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def speckle(puf_path, challenge_path, wavelength, z1, z2, bits, shift,
            noise_sigma, noise_seed, out):
    """Render a (optionally jittered) speckle pattern to a PGM file."""
    def run():
        puf = optics.VirtualPuf.load(puf_path)
        chal = optics.Challenge.load(challenge_path)
        opt = optics.OpticsConfig(wavelength=wavelength, z1=z1, z2=z2,
                                  detector_dims=puf.params.grid_dims,
                                  detector_bits=int(bits))
        if shift == (0.0, 0.0) and noise_sigma == 0.0:
            pattern = optics.render_speckle(puf, chal, opt)
        else:
            jitter = optics.JitterParams(lateral_shift=tuple(shift),
                                         noise_sigma=noise_sigma,
                                         noise_seed=noise_seed)
            pattern = optics.remeasure(puf, chal, opt, jitter)
        pattern.to_pgm(out, bits=int(bits))
        return pattern
    pattern = _guarded(run)
    click.echo(json.dumps({"provenance": list(pattern.provenance), "path": out}))


@main.command(name="hash")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--size", type=int, default=17, show_default=True)
@click.option("--wavelength-px", type=float, default=None,
              help="Carrier period in pixels; default auto from grain size.")
@click.option("--orientation", type=float, default=0.0, show_default=True)
def hash_cmd(in_path, out, size, wavelength_px, orientation):
    """Gabor-hash a PGM speckle pattern into a packed key file."""
    def run():
        pattern = optics.SpecklePattern.from_pgm(in_path)
        if wavelength_px is None:
            kernel = hashing.default_kernel(pattern, size=size,
                                            orientation=orientation)
        else:
            kernel = hashing.GaborKernel(size=size, wavelength_px=wavelength_px,
                                         sigma_px=wavelength_px / 2.0,
                                         orientation=orientation)
        key = hashing.hash_speckle(pattern, kernel)
        key.save(out)
        return key
    key = _guarded(run)
    click.echo(json.dumps({"dims": list(key.dims), "length": key.length,
                           "path": out}))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="RunConfig JSON; flags below override nothing when given.")
@click.option("--fleet-size", type=int, default=50, show_default=True)
@click.option("--remeasure-count", type=int, default=50, show_default=True)
@click.option("--fleet-seed", type=int, default=1000, show_default=True)
@click.option("--challenge-seed", type=int, default=2000, show_default=True)
@click.option("--noise-seed", type=int, default=3000, show_default=True)
@click.option("--rows", type=int, default=256, show_default=True)
@click.option("--cols", type=int, default=256, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--csv/--no-csv", "write_csv", default=True, show_default=True)
def fleet(config_path, fleet_size, remeasure_count, fleet_seed, challenge_seed,
          noise_seed, rows, cols, out_dir, write_csv):
    """Run the fleet experiment and emit a metrics report."""
    if config_path:
        config = pipeline.RunConfig.load(config_path)
    else:
        config = pipeline.RunConfig(fleet_seed=fleet_seed,
                                    challenge_seed=challenge_seed,
                                    noise_seed=noise_seed,
                                    fleet_size=fleet_size,
                                    remeasure_count=remeasure_count,
                                    grid_dims=(rows, cols))
    result = _guarded(pipeline.run_fleet, config)
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.json")
    result.report.save_json(report_path)
    if write_csv:
        result.report.save_hd_csv(os.path.join(out_dir, "hd_samples.csv"))
    for i, key in enumerate(result.keys):
        key.save(os.path.join(out_dir, f"key_{i:03d}.bpk"))
    summary = {"report": report_path,
               "inter_mean": result.report.inter.mean,
               "pairs": result.report.inter.pair_count}
    if result.report.intra is not None:
        summary["intra_mean"] = result.report.intra.mean
    if result.report.threshold is not None:
        summary["threshold"] = result.report.threshold
    click.echo(json.dumps(summary))


@main.command()
@click.option("--store", "store_path", type=click.Path(), required=True)
@click.option("--puf-id", required=True)
@click.option("--challenge", "challenge_path", type=click.Path(exists=True),
              required=True)
@click.option("--key", "key_path", type=click.Path(exists=True), required=True)
def enroll(store_path, puf_id, challenge_path, key_path):
    """Enroll a (challenge, key) pair for a token."""
    def run():
        store = CrpStore(store_path)
        chal = optics.Challenge.load(challenge_path)
        key = hashing.BinaryKey.load(key_path)
        return store.enroll(puf_id, chal, key)
    record = _guarded(run)
    click.echo(json.dumps({"puf_id": record.puf_id,
                           "challenge_id": record.challenge_id,
                           "enrolled_at": record.enrolled_at}))


@main.command(name="verify")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--puf-id", required=True)
@click.option("--challenge-id", required=True)
@click.option("--key", "key_path", type=click.Path(exists=True), required=True)
@click.option("--threshold", type=float, default=0.388, show_default=True)
def verify_cmd(store_path, puf_id, challenge_id, key_path, threshold):
    """Compare a candidate key against the enrolled one; exit 0=accept 1=reject."""
    def run():
        store = CrpStore(store_path)
        candidate = hashing.BinaryKey.load(key_path)
        return verify(store, puf_id, challenge_id, candidate, threshold)
    decision = _guarded(run)
    click.echo(json.dumps(decision.to_dict()))
    sys.exit(EXIT_ACCEPT if decision.accept else EXIT_REJECT)


@main.command(name="far-frr")
@click.option("--length", "-l", type=int, default=1310720, show_default=True)
@click.option("--threshold", "-t", type=float, default=0.388, show_default=True)
@click.option("--d-intra", type=float, default=0.016, show_default=True)
@click.option("--d-inter", type=float, default=0.499, show_default=True)
@click.option("--printed-semantics", is_flag=True,
              help="Pair the distributions as printed in the source formulas.")
def far_frr_cmd(length, threshold, d_intra, d_inter, printed_semantics):
    """Report FAR/FRR at an operating point, in linear and log10 form."""
    rates = _guarded(far_frr, length, threshold, d_intra, d_inter,
                     printed_semantics=printed_semantics)
    click.echo(json.dumps(rates.to_dict()))


@main.command(name="dict")
@click.option("--key-a", type=click.Path(exists=True), required=True)
@click.option("--key-b", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
def dict_cmd(key_a, key_b, out):
    """Publish the XOR key-mixture dictionary of two keys."""
    def run():
        a = hashing.BinaryKey.load(key_a)
        b = hashing.BinaryKey.load(key_b)
        d = crypto.build_dictionary(a, b)
        d.save(out)
        return d
    d = _guarded(run)
    click.echo(json.dumps({"length": d.length, "path": out}))


@main.command()
@click.option("--key", "key_path", type=click.Path(exists=True), required=True)
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
def encrypt(key_path, in_path, out):
    """Encrypt a file with the sender's key (strict one-time pad)."""
    def run():
        key = hashing.BinaryKey.load(key_path)
        with open(in_path, "rb") as fh:
            message = fh.read()
        cipher = crypto.encrypt(message, key)
        cipher.save(out)
        return cipher
    cipher = _guarded(run)
    click.echo(json.dumps({"message_length": cipher.message_length,
                           "path": out}))


@main.command()
@click.option("--key", "key_path", type=click.Path(exists=True), required=True)
@click.option("--dict", "dict_path", type=click.Path(exists=True), required=True)
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
def decrypt(key_path, dict_path, in_path, out):
    """Decrypt a ciphertext with the listener's key and the public dictionary."""
    def run():
        key = hashing.BinaryKey.load(key_path)
        dictionary = crypto.PublicDictionary.load(dict_path)
        cipher = crypto.Ciphertext.load(in_path)
        return crypto.decrypt(cipher, key, dictionary)
    message = _guarded(run)
    with open(out, "wb") as fh:
        fh.write(message)
    click.echo(json.dumps({"bytes": len(message), "path": out}))


@main.command()
@click.option("--image", "image_path", type=click.Path(exists=True), required=True)
@click.option("--seed-a", type=int, default=11, show_default=True)
@click.option("--seed-b", type=int, default=22, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
def demo(image_path, seed_a, seed_b, out_dir):
    """Image encryption round trip between two simulated tokens."""
    def run():
        img = pgm.read_pgm(image_path)
        message = img.astype(np.uint8).tobytes()
        rows, cols = img.shape
        # key grids sized to cover the framed message
        needed_bits = 8 * (len(message) + 4)
        side = 256
        while side * side < needed_bits:
            side *= 2
        config = pipeline.RunConfig(fleet_size=2, remeasure_count=0,
                                    fleet_seed=seed_a,
                                    challenge_seed=seed_b,
                                    grid_dims=(side, side))
        result = pipeline.run_fleet(config)
        key_a, key_b = result.keys[0], result.keys[1]
        dictionary = crypto.build_dictionary(key_a, key_b)
        cipher = crypto.encrypt(message, key_a)

        os.makedirs(out_dir, exist_ok=True)
        dictionary.save(os.path.join(out_dir, "dictionary.bpd"))
        cipher.save(os.path.join(out_dir, "cipher.bpc"))
        # "transmission channel": plain file hand-off
        transmitted = os.path.join(out_dir, "transmitted.bpc")
        shutil.copyfile(os.path.join(out_dir, "cipher.bpc"), transmitted)
        received = crypto.Ciphertext.load(transmitted)
        recovered = crypto.decrypt(received, key_b, dictionary)
        out_img = np.frombuffer(recovered, dtype=np.uint8).reshape(rows, cols)
        pgm.write_pgm(os.path.join(out_dir, "decrypted.pgm"), out_img, maxval=255)
        return {"input": image_path,
                "decrypted": os.path.join(out_dir, "decrypted.pgm"),
                "byte_identical": recovered == message}
    report = _guarded(run)
    with open(os.path.join(out_dir, "demo_report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    click.echo(json.dumps(report))


if __name__ == "__main__":
    main()
