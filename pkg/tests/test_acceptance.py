"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s`. Criteria 6 and 7 distill
at desk scale and are marked slow; they share one session-scoped bundle
of distillation runs (3 seeds x {dm, mdm} at K=2000 plus the random
baselines), so the whole gate stays within the stated runtime budgets.
"""

import os
import time

import numpy as np
import pytest

from gradcheck import away_from_zero, check_op_gradients
from test_spectral import dft_mag_bruteforce

from sigdistill import autodiff as ad
from sigdistill.autodiff import Tensor, backward
from sigdistill.cli import main as cli_main
from sigdistill.dataio import load_sigds, save_sigds, split_train_test, take_per_class
from sigdistill.distill import (
    DistillConfig,
    combined_loss,
    dm_distill,
    loss_freq_domain,
    loss_time_domain,
    mdm_distill,
)
from sigdistill.evaluation import EvalConfig, evaluate
from sigdistill.networks import sample_network
from sigdistill.siggen import GenConfig, generate_dataset
from sigdistill.spectral import dft_magnitude, dft_magnitude_op

DESK_GEN_SEED = 1
DISTILL_SEEDS = (0, 1, 2)
DISTILL_LR = 1e-2
DESK_K = 2000
EVAL_CFG = EvalConfig(arch="cnn2", epochs=300, n_runs=3, seed=100)


def report(criterion: int, passed: bool, detail: str) -> None:
    print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}", flush=True)
    assert passed, f"criterion {criterion}: {detail}"


# --------------------------------------------------------------- fixtures


@pytest.fixture(scope="session")
def desk_data():
    full = generate_dataset(GenConfig(seed=DESK_GEN_SEED))
    return split_train_test(full, 0.2, seed=DESK_GEN_SEED)


@pytest.fixture(scope="session")
def desk_runs(desk_data):
    """3 distill seeds x {random, dm, mdm}: synthetic sets, reports, accuracies."""
    os.environ.setdefault("SIGDISTILL_THREADS", "2")
    train, test = desk_data
    bundle = {"synth": {}, "reports": {}, "acc": {}}
    for seed in DISTILL_SEEDS:
        bundle["synth"][("random", seed)] = take_per_class(train, 10, seed=seed)
        for method in ("dm", "mdm"):
            cfg = DistillConfig(
                iterations=DESK_K,
                lr=DISTILL_LR,
                alpha=1.0 if method == "mdm" else 0.0,
                spc=10,
                seed=seed,
            )
            runner = mdm_distill if method == "mdm" else dm_distill
            t0 = time.perf_counter()
            synth, reports = runner(train, cfg)
            print(
                f"[desk] {method} seed={seed}: K={DESK_K} in {time.perf_counter()-t0:.0f}s",
                flush=True,
            )
            bundle["synth"][(method, seed)] = synth
            bundle["reports"][(method, seed)] = reports
    for (method, seed), synth in bundle["synth"].items():
        res = evaluate(synth, test, EVAL_CFG)
        bundle["acc"][(method, seed)] = res.mean_accuracy
        print(f"[desk] eval {method} seed={seed}: {res.mean_accuracy:.2f}", flush=True)
    return bundle


# --------------------------------------------------------------- criteria


def test_criterion_1_dft_oracle_equivalence():
    from sigdistill.spectral import dft_magnitude_direct

    t0 = time.perf_counter()
    worst = 0.0
    for n in (8, 16, 64, 128):
        rng = np.random.default_rng(n)
        for i in range(100):
            x = rng.normal(size=n)
            fast = dft_magnitude(x)
            direct = dft_magnitude_direct(x)
            rel = np.abs(fast - direct) / np.maximum(np.abs(direct), 1e-9)
            worst = max(worst, float(rel.max()))
            if i < 5:  # anchor the direct path itself to the scalar-loop oracle
                brute = dft_mag_bruteforce(x)
                rel_b = np.abs(direct - brute) / np.maximum(np.abs(brute), 1e-9)
                worst = max(worst, float(rel_b.max()))
    elapsed = time.perf_counter() - t0
    report(
        1,
        worst <= 1e-5 and elapsed < 1.0,
        f"fast vs direct-summation DFT, max rel err {worst:.2e} (<=1e-5), {elapsed:.2f}s (<1s)",
    )


def test_criterion_2_parseval_and_symmetry():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_parseval = worst_symmetry = 0.0
    for _ in range(1000):
        record = rng.normal(size=(2, 128))
        mags = dft_magnitude(record)
        energy = np.sum(mags**2, axis=-1)
        expected = 128 * np.sum(record**2, axis=-1)
        worst_parseval = max(worst_parseval, float(np.abs(energy / expected - 1).max()))
        tail = mags[:, 1:]
        floor = 1e-6 * mags.max(axis=-1, keepdims=True)  # guard structurally-zero bins
        sym = np.abs(tail - tail[:, ::-1]) / np.maximum(np.abs(tail), floor)
        worst_symmetry = max(worst_symmetry, float(sym.max()))
    elapsed = time.perf_counter() - t0
    report(
        2,
        worst_parseval <= 1e-5 and worst_symmetry <= 1e-5 and elapsed < 5.0,
        f"Parseval rel err {worst_parseval:.2e}, symmetry rel err {worst_symmetry:.2e} "
        f"(<=1e-5), {elapsed:.2f}s (<5s)",
    )


def test_criterion_3_gradient_integrity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)

    # (a) every registered op against central finite differences
    checks = [
        (lambda x, y: ad.add(x, y), [rng.normal(size=(2, 3)), rng.normal(size=(2, 3))]),
        (lambda x, y: ad.sub(x, y), [rng.normal(size=(2, 3)), rng.normal(size=(2, 3))]),
        (lambda x, y: ad.mul(x, y), [rng.normal(size=(2, 3)), rng.normal(size=(2, 3))]),
        (lambda x: ad.scalar_mul(x, 1.7), [rng.normal(size=(4,))]),
        (ad.relu, [away_from_zero(rng, (3, 5))]),
        (ad.instance_norm, [rng.normal(size=(2, 3, 8))]),
        (ad.flatten, [rng.normal(size=(2, 3, 4))]),
        (ad.mean_over_batch, [rng.normal(size=(4, 6))]),
        (ad.sum_of_squares, [rng.normal(size=(3, 3))]),
        (
            lambda x, w, b: ad.conv1d(x, w, b, stride=2, padding=2),
            [rng.normal(size=(2, 2, 12)), rng.normal(size=(3, 2, 5)), rng.normal(size=3)],
        ),
        (
            lambda x: ad.max_pool1d(x, 2, 2),
            [rng.permutation(48).astype(np.float64).reshape(2, 3, 8)],
        ),
        (
            ad.linear,
            [rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=2)],
        ),
        (
            lambda z: ad.softmax_cross_entropy(z, np.array([0, 2, 1])),
            [rng.normal(size=(3, 3))],
        ),
        (dft_magnitude_op, [rng.normal(size=(2, 8)) + 0.5]),
    ]
    for build, arrays in checks:
        check_op_gradients(build, arrays)

    # (b) end-to-end grad of the combined loss w.r.t. synthetic samples
    real = [rng.normal(size=(4, 2, 16)) for _ in range(2)]
    synth = [rng.normal(size=(2, 2, 16)) for _ in range(2)]
    net = sample_network("cnn2", seed=33, dtype=np.float64)

    def objective(arrays):
        leaves = [Tensor(a, dtype=np.float64) for a in arrays]
        l_td = loss_time_domain(net, real, leaves, dtype=np.float64)
        l_fd = loss_freq_domain(net, real, leaves, dtype=np.float64)
        return combined_loss(l_td, l_fd, 1.0).data.item()

    leaves = [Tensor(a.copy(), requires_grad=True, dtype=np.float64) for a in synth]
    backward(
        combined_loss(
            loss_time_domain(net, real, leaves, dtype=np.float64),
            loss_freq_domain(net, real, leaves, dtype=np.float64),
            1.0,
        )
    )
    analytic = np.concatenate([t.grad.ravel() for t in leaves])
    numeric = np.zeros_like(analytic)
    h = 1e-4
    i = 0
    for arr in synth:
        view = arr.ravel()
        for j in range(view.size):
            orig = view[j]
            view[j] = orig + h
            up = objective(synth)
            view[j] = orig - h
            down = objective(synth)
            view[j] = orig
            numeric[i] = (up - down) / (2 * h)
            i += 1
    mask = np.abs(analytic) > 1e-6
    rel = np.abs(analytic[mask] - numeric[mask]) / np.maximum(
        np.abs(numeric[mask]), np.abs(analytic[mask])
    )
    elapsed = time.perf_counter() - t0
    report(
        3,
        rel.max() <= 1e-3 and elapsed < 60.0,
        f"all ops FD-checked; end-to-end grad rel err {rel.max():.2e} (<=1e-3) "
        f"on {mask.sum()}/{mask.size} coords, {elapsed:.1f}s (<60s)",
    )


def test_criterion_4_dm_reduction_bit_identity():
    full = generate_dataset(GenConfig(n_per_class=80, n_samples=32, seed=7))
    train, _ = split_train_test(full, 0.2, seed=7)
    cfg = DistillConfig(iterations=60, lr=1e-3, alpha=0.0, spc=4, real_batch_per_class=32, seed=5)
    synth_mdm, reports_mdm = mdm_distill(train, cfg)
    synth_dm, reports_dm = dm_distill(train, cfg)
    a, _ = synth_mdm.base.as_arrays()
    b, _ = synth_dm.base.as_arrays()
    same_sets = a.tobytes() == b.tobytes()
    same_losses = [r.l_td for r in reports_mdm] == [r.l_td for r in reports_dm]
    report(
        4,
        same_sets and same_losses,
        f"alpha=0 run vs time-domain-only path over K={cfg.iterations}: "
        f"synthetic sets bit-identical={same_sets}, l_td sequences identical={same_losses}",
    )


def test_criterion_5_loss_oracle():
    from test_distill import oracle_loss, tiny_instance

    worst = 0.0
    for seed in range(20):
        net, real, synth = tiny_instance(seed)
        leaves = [Tensor(s, requires_grad=True, dtype=np.float64) for s in synth]
        l_td = loss_time_domain(net, real, leaves, dtype=np.float64).item()
        l_fd = loss_freq_domain(net, real, leaves, dtype=np.float64).item()
        expect_td = oracle_loss(net, real, synth, freq=False)
        expect_fd = oracle_loss(net, real, synth, freq=True)
        worst = max(
            worst,
            abs(l_td - expect_td) / abs(expect_td),
            abs(l_fd - expect_fd) / abs(expect_fd),
        )
    report(5, worst <= 1e-6, f"20 tiny instances vs straight-line oracle, rel err {worst:.2e} (<=1e-6)")


@pytest.mark.slow
def test_criterion_6_end_to_end_ordering(desk_runs):
    medians = {
        method: float(np.median([desk_runs["acc"][(method, s)] for s in DISTILL_SEEDS]))
        for method in ("random", "dm", "mdm")
    }
    gap_random = medians["mdm"] - medians["random"]
    gap_dm = medians["mdm"] - medians["dm"]
    report(
        6,
        gap_random >= 2.0 and gap_dm >= -1.0,
        f"median accuracies random={medians['random']:.2f} dm={medians['dm']:.2f} "
        f"mdm={medians['mdm']:.2f}; MDM-Random={gap_random:+.2f} (>=+2.0), "
        f"MDM-DM={gap_dm:+.2f} (>=-1.0)",
    )


@pytest.mark.slow
def test_criterion_7_cross_architecture_transfer(desk_runs, desk_data):
    _, test = desk_data
    wins = {arch: 0 for arch in ("resnet1d-lite", "vgg-lite")}
    details = []
    for arch in wins:
        ecfg = EvalConfig(arch=arch, epochs=300, n_runs=3, seed=100)
        for seed in DISTILL_SEEDS:
            mdm_acc = evaluate(desk_runs["synth"][("mdm", seed)], test, ecfg).mean_accuracy
            rnd_acc = evaluate(desk_runs["synth"][("random", seed)], test, ecfg).mean_accuracy
            if mdm_acc >= rnd_acc:
                wins[arch] += 1
            details.append(f"{arch}/seed{seed}: mdm={mdm_acc:.2f} random={rnd_acc:.2f}")
            print(f"[crossarch] {details[-1]}", flush=True)
    report(
        7,
        all(w >= 2 for w in wins.values()),
        f"cnn2-distilled sets beat random on unseen archs in {wins} of 3 seeds (need >=2)",
    )


def test_criterion_8_determinism_byte_identical(tmp_path):
    import json

    config = {
        "out_dir": str(tmp_path / "a"),
        "method": "mdm",
        "generation": {
            "schemes": ["BPSK", "QPSK", "PAM4"],
            "n_per_class": 30,
            "n_samples": 32,
            "seed": 9,
            "test_fraction": 0.2,
        },
        "distill": {
            "iterations": 8,
            "lr": 0.001,
            "alpha": 1.0,
            "spc": 2,
            "real_batch_per_class": 8,
            "seed": 9,
        },
        "eval": {"arch": "cnn2", "epochs": 5, "n_runs": 2, "seed": 9},
    }
    outputs = {}
    for label in ("a", "b"):
        out_dir = tmp_path / label
        config["out_dir"] = str(out_dir)
        cfg_path = tmp_path / f"{label}.json"
        cfg_path.write_text(json.dumps(config))
        assert cli_main(["gen", "--config", str(cfg_path)]) == 0
        assert cli_main(["distill", "--config", str(cfg_path)]) == 0
        assert cli_main(["eval", "--config", str(cfg_path)]) == 0
        outputs[label] = {
            p.name: p.read_bytes()
            for p in sorted(out_dir.iterdir())
            if p.suffix in (".sigds", ".csv")
        }
    same = outputs["a"] == outputs["b"]
    report(
        8,
        same and len(outputs["a"]) >= 4,
        f"rerun produced byte-identical artifacts: {sorted(outputs['a'])}",
    )


@pytest.mark.slow
def test_criterion_9_loss_report_consistency(desk_runs):
    checked = 0
    worst = 0.0
    ok = True
    for (method, seed), reports in desk_runs["reports"].items():
        alpha = 1.0 if method == "mdm" else 0.0
        for r in reports:
            checked += 1
            if r.l_td < 0 or r.l_fd < 0:
                ok = False
            expect = r.l_td + alpha * r.l_fd
            err = abs(r.l_total - expect) / max(abs(expect), 1e-300)
            worst = max(worst, err)
    report(
        9,
        ok and worst <= 1e-6 and checked > 0,
        f"{checked} loss reports: l_total-(l_td+alpha*l_fd) rel err {worst:.2e} (<=1e-6), "
        f"all terms nonnegative={ok}",
    )


@pytest.mark.slow
def test_smoke_loss_decreases_over_first_500_iterations(desk_data):
    train, _ = desk_data
    drops = []
    for seed in range(5):
        cfg = DistillConfig(iterations=501, lr=DISTILL_LR, alpha=1.0, spc=10, seed=seed)
        _, reports = mdm_distill(train, cfg)
        by_iter = {r.iteration: r.l_total for r in reports}
        drops.append(by_iter[0] - by_iter[500])
        print(f"[smoke] seed={seed}: l_total {by_iter[0]:.0f} -> {by_iter[500]:.0f}", flush=True)
    assert float(np.median(drops)) > 0.0
