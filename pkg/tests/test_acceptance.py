"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. Tolerances are fixed
here, not configurable.
"""

import itertools
import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from beambench.beamcore import (
    build_dft_codebook,
    link_metrics,
    oracle_beam,
    snr_gap_db,
    sweep_powers,
)
from beambench.checkpoint import load_checkpoint, save_checkpoint
from beambench.cli import main
from beambench.dataset import DatasetReader, make_split, synthesize_records, write_dataset
from beambench.errors import InvalidArgumentError
from beambench.evaluator import LatencyProfile, build_report, evaluate_combination, latency_report
from beambench.model import POS_INDEX, ModelConfig
from beambench.scenario import MODALITIES, ScenarioConfig, generate_scene, scene_to_channel
from beambench.sensing import GpsStats, radar_magnitude_maps
from beambench.tensor import Tensor
from beambench.trainer import TrainConfig, cross_entropy, train


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


FULL_PROFILE = LatencyProfile(sensor_ms={"mmwave": 5.0, "gps": 10.0, "radar": 20.0})


def test_beamforming_oracle():
    with criterion("beamforming-oracle"):
        t0 = time.perf_counter()
        cfg = ScenarioConfig(
            num_samples=1000, noise_var=0.0, blockage_prob=0.2, global_seed=23, num_paths=3
        )
        cb = build_dft_codebook(cfg.num_elements, cfg.num_beams)
        for index in range(cfg.num_samples):
            h = scene_to_channel(generate_scene(cfg, index), cfg.num_elements)
            got = oracle_beam(sweep_powers(h, cb, 0.0, 0))
            # independent brute force: explicit scalar inner products
            best_i, best_p = 0, -1.0
            for i, w in enumerate(cb.beams):
                acc = 0j
                for wn, hn in zip(w, h):
                    acc += wn.conjugate() * hn
                p = abs(acc) ** 2
                if p > best_p:
                    best_i, best_p = i, p
            assert got == best_i, f"sample {index}: {got} != {best_i}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_metric_identities():
    with criterion("metric-identities"):
        rng = np.random.default_rng(31)
        powers = rng.uniform(0.05, 3.0, (200, 64)).astype(np.float32)
        labels = np.argmax(powers, axis=1)
        oracle_post = np.zeros((200, 64))
        oracle_post[np.arange(200), labels] = 1.0
        rep = build_report(oracle_post, labels, powers, 0.05, ["mmwave"], FULL_PROFILE, 1.0)
        assert abs(rep.mean_snr_gap) < 1e-9
        assert abs(rep.mean_rate_loss) < 1e-9
        assert abs(rep.gain_ratio - 1.0) < 1e-9
        assert abs(rep.se_pred - rep.se_opt) < 1e-9
        for trial in range(10):
            post = rng.dirichlet(np.ones(64), size=200)
            r = build_report(post, labels, powers, 0.05, ["mmwave"], FULL_PROFILE, 1.0)
            assert r.top1 <= r.top3 <= r.top5
            assert r.se_pred <= r.se_opt
            assert r.mean_snr_gap >= 0.0 and r.mean_rate_loss >= 0.0


def test_numeric_analysis_points():
    with criterion("numeric-analysis-points"):
        assert link_metrics(3.0, 1.0).rate == 2.0
        uniform = np.full((1, 64), 1.0 / 64.0, dtype=np.float64)
        ce = cross_entropy(Tensor(uniform), np.array([0])).item()
        assert abs(ce - math.log(64)) < 1e-9
        assert abs(snr_gap_db(10.0 * 0.37, 0.37) - 10.0) < 1e-9


def test_gradient_suite():
    with criterion("gradient-suite"):
        from beambench.gradcheck import MODEL_TOL, model_fd_check, run_op_suite

        t0 = time.perf_counter()
        results = run_op_suite(seed=0)
        failures = [(n, e) for n, e, ok in results if not ok]
        assert not failures, f"per-op failures: {failures}"
        err, n_checked = model_fd_check(seed=0)
        assert n_checked >= 30
        assert err <= MODEL_TOL, f"model fd err {err}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, f"took {elapsed:.2f}s"


def test_radar_fft_oracle():
    with criterion("radar-fft-oracle"):
        a, s, c = 4, 8, 4
        f = 3
        tone = np.exp(2j * np.pi * f * np.arange(s) / s)
        cube = np.broadcast_to(tone[None, :, None], (a, s, c)).copy()
        ra, rv = radar_magnitude_maps(cube)
        # naive O(n^2) DFT over each 2-D slice
        def dft2(mat):
            rows, cols = mat.shape
            wr = np.exp(-2j * np.pi * np.outer(np.arange(rows), np.arange(rows)) / rows)
            wc = np.exp(-2j * np.pi * np.outer(np.arange(cols), np.arange(cols)) / cols)
            return wr @ mat @ wc.T

        rv_ref = np.zeros((s, c))
        for ai in range(a):
            rv_ref += np.abs(dft2(cube[ai]))
        rv_ref /= a
        ra_ref = np.zeros((s, a))
        for ci in range(c):
            ra_ref += np.abs(dft2(cube[:, :, ci].T))
        ra_ref /= c
        assert np.max(np.abs(rv - rv_ref)) < 1e-6
        assert np.max(np.abs(ra - ra_ref)) < 1e-6
        assert np.unravel_index(np.argmax(rv), rv.shape) == (f, 0)
        assert np.unravel_index(np.argmax(ra), ra.shape) == (f, 0)


@pytest.fixture(scope="module")
def trained_full_checkpoint(full_ds, tmp_path_factory):
    root, cfg = full_ds
    reader = DatasetReader(root)
    model_cfg = ModelConfig(embed_dim=16, fusion_layers=1, num_heads=2, conv_widths=(4, 4, 4), pool_hw=(1, 1))
    result = train(TrainConfig(epochs=2, seed=4, modalities=MODALITIES), model_cfg, reader)
    ck = tmp_path_factory.mktemp("acc_ck") / "checkpoint"
    save_checkpoint(result.model, ck)
    return ck, reader


def test_subset_contract(trained_full_checkpoint):
    with criterion("subset-contract"):
        ck, reader = trained_full_checkpoint
        model = load_checkpoint(ck)
        subsets = [
            combo
            for r in range(1, 6)
            for combo in itertools.combinations(MODALITIES, r)
        ]
        assert len(subsets) == 31
        for subset in subsets:
            rep, _ = evaluate_combination(model, reader, subset, FULL_PROFILE, 0.01)
            rep.validate()
        # posterior normalization on raw forwards
        batch = reader.batch(list(reader.split.indices("test")), MODALITIES)
        from beambench.dataset import prepare_model_inputs

        stats = model.config.gps_stats
        gps_stats = GpsStats(mean=np.asarray(stats["mean"]), std=np.asarray(stats["std"]))
        inputs = prepare_model_inputs(batch, gps_stats)
        embeddings = model.encode(inputs)
        raw = {m: e.data.copy() for m, e in embeddings.items()}
        pos_seen = {}
        for subset in subsets:
            post = model.forward({k: v for k, v in inputs.items() if k in subset})
            assert np.all(np.abs(post.data.sum(axis=1) - 1.0) < 1e-5)
            emb = model.encode({k: v for k, v in inputs.items() if k in subset})
            tokens, ids = model.assemble_tokens(emb)
            for m in subset:
                slot = list(ids).index(POS_INDEX[m])
                row = tokens.data[0, slot] - raw[m][0]
                if m in pos_seen:
                    assert np.array_equal(row, pos_seen[m]), m
                else:
                    pos_seen[m] = row


@pytest.fixture(scope="module")
def learnability_ds(tmp_path_factory):
    root = tmp_path_factory.mktemp("acc_learn") / "data"
    cfg = ScenarioConfig(
        num_samples=2000,
        noise_var=0.0,
        blockage_prob=0.0,
        global_seed=11,
        modalities=("gps", "mmwave"),
    )
    write_dataset(synthesize_records(cfg), root, cfg.num_elements, cfg.num_beams, 0.0)
    return DatasetReader(root)


def test_forced_learnability(learnability_ds):
    with criterion("forced-learnability"):
        reader = learnability_ds
        t0 = time.perf_counter()
        mm = train(TrainConfig(epochs=30, seed=3, modalities=("mmwave",)), ModelConfig(), reader)
        elapsed = time.perf_counter() - t0
        assert elapsed < 300.0, f"training took {elapsed:.1f}s"
        assert mm.best_val_top1 >= 0.95, f"val top1 {mm.best_val_top1}"
        rep, _ = evaluate_combination(mm.model, reader, ("mmwave",), FULL_PROFILE, 0.01)
        assert rep.gain_ratio >= 0.99, f"test gain ratio {rep.gain_ratio}"

        fused = train(
            TrainConfig(epochs=30, seed=3, modalities=("mmwave", "gps")), ModelConfig(), reader
        )
        mm_top5 = mm.log.series("val", "top5")[mm.best_epoch]
        fused_top5 = fused.log.series("val", "top5")[fused.best_epoch]
        assert fused_top5 >= mm_top5 - 0.02, f"{fused_top5} vs {mm_top5}"


def test_split_and_format(tmp_path):
    with criterion("split-format"):
        sp = make_split(100)
        assert sp.train == (0, 70) and sp.val == (70, 85) and sp.test == (85, 100)
        cfg = ScenarioConfig(num_samples=12, global_seed=6)
        records = synthesize_records(cfg)
        a, b = tmp_path / "a", tmp_path / "b"
        write_dataset(records, a, 16, 64, 0.0)
        write_dataset(synthesize_records(cfg), b, 16, 64, 0.0)
        for fa in sorted(a.iterdir()):
            assert fa.read_bytes() == (b / fa.name).read_bytes(), fa.name
        reader = DatasetReader(a)
        for rec in records:
            assert np.array_equal(reader.arrays["mmwave"][rec.index], rec.power)
        # train-only normalization enforced
        gps = reader.gps_values()
        GpsStats.from_training(gps, reader.split.indices("train"), reader.split.train)
        with pytest.raises(InvalidArgumentError):
            GpsStats.from_training(gps, reader.split.indices("val"), reader.split.train)


def test_latency_properties(tmp_path):
    with criterion("latency"):
        rng = np.random.default_rng(9)
        names = list(MODALITIES)
        for _ in range(1000):
            prof = LatencyProfile(sensor_ms={m: float(rng.uniform(0.0, 100.0)) for m in names})
            size = int(rng.integers(1, 5))
            subset = list(rng.choice(names, size=size, replace=False))
            extra = [m for m in names if m not in subset][0]
            inf = float(rng.uniform(0.0, 10.0))
            base = latency_report(subset, prof, inf)
            grown = latency_report(subset + [extra], prof, inf)
            assert grown["end_to_end_ms"] >= base["end_to_end_ms"]
        # Fig-9-shaped CSV: exactly one sensing and one inference row per combo
        out = tmp_path / "r"
        out.mkdir()
        base_row = {
            "sample_count": 5,
            "top1": 0.5,
            "top3": 0.6,
            "top5": 0.7,
            "se_pred": 1.0,
            "se_opt": 2.0,
            "mean_rate_loss": 1.0,
            "mean_snr_gap_db": 3.0,
            "gain_ratio": 0.8,
            "mean_ce": 1.0,
            "noise_var": 0.01,
            "lambda_gap": 0.0,
            "lambda_tau": 0.0,
        }
        for mods, e2e in ((["mmwave"], 7.0), (["gps", "mmwave"], 12.0), (["camera"], 34.0)):
            slug = "_".join(mods)
            (out / f"metrics_{slug}.json").write_text(
                json.dumps(
                    {
                        **base_row,
                        "modalities": mods,
                        "eval_score": e2e,
                        "latency": {"sensing_ms": e2e - 2.0, "inference_ms": 2.0, "end_to_end_ms": e2e},
                    }
                )
            )
        assert main(["report", "--out", str(out)]) == 0
        rows = (out / "latency_stack.csv").read_text().strip().splitlines()[1:]
        seen = {}
        for row in rows:
            combo, component, _ = row.split(",")
            seen.setdefault(combo, []).append(component)
        assert len(seen) == 3
        assert all(sorted(v) == ["inference", "sensing"] for v in seen.values())


DET_CONFIG = {
    "scenario": {
        "num_samples": 60,
        "global_seed": 21,
        "noise_var": 0.0,
        "blockage_prob": 0.1,
        "modalities": ["gps", "mmwave"],
    },
    "model": {"embed_dim": 16, "num_heads": 2, "fusion_layers": 1, "conv_widths": [4, 4, 4], "pool_hw": [1, 1]},
    "train": {"epochs": 3, "modalities": ["mmwave", "gps"], "seed": 2},
    "latency": {"radar": 20.0, "gps": 10.0, "mmwave": 5.0, "inference_ms": 2.0},
    "eval": {"noise_var": 0.01, "modality_sets": [["mmwave"], ["mmwave", "gps"]]},
}


def test_determinism(tmp_path):
    with criterion("determinism"):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(DET_CONFIG, indent=2))

        def pipeline(name):
            out = tmp_path / name
            data = out / "data"
            assert main(["simulate", "--config", str(cfg_path), "--out", str(data)]) == 0
            assert main(["train", "--config", str(cfg_path), "--data", str(data), "--out", str(out)]) == 0
            assert (
                main(
                    [
                        "eval",
                        "--config",
                        str(cfg_path),
                        "--data",
                        str(data),
                        "--checkpoint",
                        str(out / "checkpoint"),
                        "--out",
                        str(out),
                    ]
                )
                == 0
            )
            return out

        a = pipeline("run_a")
        b = pipeline("run_b")
        compared = 0
        for name in ("trainlog.csv", "metrics_mmwave.json", "metrics_gps_mmwave.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
            compared += 1
        assert compared == 3
