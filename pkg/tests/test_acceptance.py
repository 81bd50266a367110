"""Top-level acceptance gates, one test per product guarantee.

Each test pins one end-to-end property at a fixed tolerance and asserts
its wall-clock budget, so a regression in either shows up as exactly one
red line under `pytest -v`. Training-based gates use frozen recipes whose
margins were measured well inside the thresholds; they are deterministic
for a fixed numpy version.
"""

import dataclasses
import json
import struct
import threading
import time
import urllib.request
from datetime import datetime, timezone
from functools import lru_cache

import numpy as np
import pytest

from _archcheck import (
    GRADCHECK_SEEDS,
    GRADCHECK_STEP,
    KINK_MARGIN,
    param_arrays,
    param_grads,
    nudge,
    run_arch_gradcheck,
    tiny_batch,
    tiny_spec,
)
from _scoring import fresh_featurizer, trained_scoring_model
from headline_forge.autokernel.functional import (
    cross_entropy,
    cross_entropy_backward,
    mse,
    mse_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    softmax,
    softmax_backward,
    tanh,
    tanh_backward,
)
from headline_forge.autokernel.gradcheck import check_layer_like, gradient_check
from headline_forge.autokernel.layers import (
    BatchNorm,
    Conv1d,
    Conv2d,
    Dense,
    Dropout,
    Embedding,
    MaxPool2d,
)
from headline_forge.autokernel.recurrent import BidirectionalLast, GRUCell, LSTMCell, LSTMState
from headline_forge.checkpoint import (
    CheckpointError,
    CheckpointFormatError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    load_checkpoint,
    save_checkpoint,
)
from headline_forge.evalbench import (
    generate_synthetic,
    mae,
    rae,
    recovered_label_errors,
    run_experiment,
)
from headline_forge.ingest import PageViewEvent, aggregate_engagement, aggregate_partitioned
from headline_forge.labeler import indicator_distribution
from headline_forge.models import (
    ARCHITECTURES,
    Featurizer,
    FileDocVectorProvider,
    ModelSpec,
    TrainConfig,
    build_model,
    stack_inputs,
    train,
)
from headline_forge.service import create_server, score
from headline_forge.topics import nnmf_fit


@lru_cache(maxsize=1)
def standard_world():
    """The shared evaluation world: 2000 articles, ~1000 events each."""
    return generate_synthetic(2000, events_per_article_mean=1000, seed=7)


# ---------------------------------------------------------------------------
# 1. soft indicator distributions on the unit square


def test_01_indicator_distribution_grid():
    started = time.perf_counter()
    grid = np.arange(101) / 100.0
    corners = np.array([[0.0, 1.0], [1.0, 1.0], [1.0, 0.0], [0.0, 0.0]])

    probs = np.empty((101, 101, 4))
    for i, c in enumerate(grid):
        for j, d in enumerate(grid):
            probs[i, j] = indicator_distribution(c, d).p

    assert np.abs(probs.sum(axis=2) - 1.0).max() <= 1e-9

    points = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1)
    dists = np.linalg.norm(points[:, :, None, :] - corners, axis=3)
    unique = (dists == dists.min(axis=2, keepdims=True)).sum(axis=2) == 1
    assert unique.any() and (~unique).any()
    assert np.array_equal(
        probs.argmax(axis=2)[unique], dists.argmin(axis=2)[unique]
    ), "argmax disagrees with the nearest-corner oracle"

    assert indicator_distribution(0.5, 0.5).p == (0.25, 0.25, 0.25, 0.25)

    # One call per unordered reflection pair; the swaps mirror the corners.
    for i in range(51):
        for j in range(101):
            flip_c = np.array(indicator_distribution(1.0 - grid[i], grid[j]).p)
            assert np.abs(probs[i, j] - flip_c[[1, 0, 3, 2]]).max() <= 1e-12
            flip_d = np.array(indicator_distribution(grid[j], 1.0 - grid[i]).p)
            assert np.abs(probs[j, i] - flip_d[[3, 2, 1, 0]]).max() <= 1e-12

    assert time.perf_counter() - started < 1.0


# ---------------------------------------------------------------------------
# 2. relative absolute error identities


def test_02_error_metric_identities():
    started = time.perf_counter()
    truths = np.random.default_rng(14).dirichlet(np.ones(4), size=1000)
    mean_rows = np.tile(truths.mean(axis=0), (len(truths), 1))
    assert abs(rae(mean_rows, truths) - 100.0) <= 1e-6
    assert rae(truths, truths) == 0.0

    hand_truths = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    hand_preds = np.array([[0.5, 0.5, 0.0, 0.0], [0.5, 0.5, 0.0, 0.0]])
    assert mae(hand_preds, hand_truths) == 0.25
    assert rae(hand_preds, hand_truths) == 100.0
    assert time.perf_counter() - started < 1.0


# ---------------------------------------------------------------------------
# 3. gradient suite: every operator, every architecture, plus a mutation


def _layer_check(layer, forward, arrays, extra_grads=None, **kwargs):
    captured = {}

    def backward(weights):
        result = layer.backward(weights)
        if extra_grads:
            captured.update(extra_grads(result))

    def grads_of():
        return {**{k: v.copy() for k, v in layer.grads.items()}, **captured}

    layer.zero_grad()
    return check_layer_like(forward, backward, arrays, grads_of, **kwargs)


def _pool_top2_gap(x, pool):
    b, c, h, w = x.shape
    ph, pw = pool
    ho, wo = -(-h // ph), -(-w // pw)
    xp = np.pad(
        x, ((0, 0), (0, 0), (0, ho * ph - h), (0, wo * pw - w)), constant_values=-np.inf
    )
    windows = xp.reshape(b, c, ho, ph, wo, pw).transpose(0, 1, 2, 4, 3, 5)
    ordered = np.sort(windows.reshape(b, c, ho, wo, ph * pw), axis=-1)
    gaps = ordered[..., -1] - ordered[..., -2]
    return float(gaps[np.isfinite(gaps)].min())


def _operator_reports():
    rng = np.random.default_rng(31)

    x = rng.standard_normal((4, 5))
    x += np.where(x >= 0, 0.05, -0.05)  # keep probes off the relu kink
    w = rng.standard_normal((4, 5))
    yield "relu", gradient_check(
        lambda: float((relu(x) * w).sum()), {"x": relu_backward(w, x)}, {"x": x}
    )
    y = sigmoid(x)
    yield "sigmoid", gradient_check(
        lambda: float((sigmoid(x) * w).sum()), {"x": sigmoid_backward(w, y)}, {"x": x}
    )
    y = tanh(x)
    yield "tanh", gradient_check(
        lambda: float((tanh(x) * w).sum()), {"x": tanh_backward(w, y)}, {"x": x}
    )
    y = softmax(x)
    yield "softmax", gradient_check(
        lambda: float((softmax(x) * w).sum()), {"x": softmax_backward(w, y)}, {"x": x}
    )

    pred = rng.standard_normal((6, 4))
    target = rng.standard_normal((6, 4))
    yield "mse", gradient_check(
        lambda: mse(pred, target), {"pred": mse_backward(pred, target)}, {"pred": pred}
    )
    probs = rng.uniform(0.1, 1.0, (6, 4))
    labels = rng.integers(1, 5, 6)
    yield "cross_entropy", gradient_check(
        lambda: cross_entropy(probs, labels),
        {"probs": cross_entropy_backward(probs, labels)},
        {"probs": probs},
    )

    dense = Dense(rng.standard_normal((4, 3)), rng.standard_normal(3))
    dense_x = rng.standard_normal((5, 4))
    yield "dense", _layer_check(
        dense,
        lambda: dense.forward(dense_x),
        {"w": dense.params["w"], "b": dense.params["b"], "x": dense_x},
        extra_grads=lambda dx: {"x": dx},
    )

    embed = Embedding.init(6, 3, rng)
    ids = np.array([[0, 1, 2], [2, 3, 5]])
    pad_mask = np.zeros((6, 3), dtype=bool)
    pad_mask[0] = True
    embed.forward(ids)
    yield "embedding", _layer_check(
        embed,
        lambda: embed.forward(ids),
        {"table": embed.params["table"]},
        exclude={"table": pad_mask},
    )

    for padding, kshape, xshape in (
        ("same", (3, 2, 3, 3), (2, 2, 5, 6)),
        ("valid", (2, 1, 3, 5), (2, 1, 6, 6)),
    ):
        conv = Conv2d(
            rng.uniform(-0.6, 0.6, kshape), rng.uniform(-0.3, 0.3, kshape[0]), padding=padding
        )
        conv_x = rng.standard_normal(xshape)
        conv.forward(conv_x)
        assert np.abs(conv._cache[1]).min() > 1e-3
        yield f"conv2d_{padding}", _layer_check(
            conv,
            lambda conv=conv, conv_x=conv_x: conv.forward(conv_x),
            {"kernels": conv.params["kernels"], "bias": conv.params["bias"], "x": conv_x},
            extra_grads=lambda dx: {"x": dx},
        )

    conv1 = Conv1d(rng.uniform(-0.6, 0.6, (3, 4, 3)), rng.uniform(-0.3, 0.3, 3))
    seq = rng.standard_normal((2, 7, 4))
    conv1.forward(seq)
    assert np.abs(conv1._conv._cache[1]).min() > 1e-3
    yield "conv1d", _layer_check(
        conv1,
        lambda: conv1.forward(seq),
        {"kernels": conv1.params["kernels"], "bias": conv1.params["bias"], "x": seq},
        extra_grads=lambda dx: {"x": dx},
    )

    pool_x = rng.standard_normal((2, 3, 5, 7))
    assert _pool_top2_gap(pool_x, (2, 2)) > 1e-3
    pool = MaxPool2d((2, 2))
    yield "maxpool2d", _layer_check(
        pool,
        lambda: pool.forward(pool_x),
        {"x": pool_x},
        extra_grads=lambda dx: {"x": dx},
    )

    bn = BatchNorm(4)
    bn.params["gamma"][...] = rng.uniform(0.5, 1.5, 4)
    bn.params["beta"][...] = rng.standard_normal(4)
    bn_x = rng.standard_normal((6, 4))
    yield "batchnorm", _layer_check(
        bn,
        lambda: bn.forward(bn_x, train=True),
        {"gamma": bn.params["gamma"], "beta": bn.params["beta"], "x": bn_x},
        extra_grads=lambda dx: {"x": dx},
    )

    # Train-mode masks are stochastic per forward, so finite differences run
    # in the deterministic inference mode where the operator is identity.
    drop = Dropout(0.4)
    drop_x = rng.standard_normal((3, 4))
    yield "dropout_infer", _layer_check(
        drop,
        lambda: drop.forward(drop_x),
        {"x": drop_x},
        extra_grads=lambda dx: {"x": dx},
    )

    gru = GRUCell.init(3, 4, rng)
    gx = rng.standard_normal((2, 3))
    gh = rng.standard_normal((2, 4))
    gw = rng.standard_normal((2, 4))

    def gru_loss():
        h_t, _ = gru.step(gx, gh)
        return float((h_t * gw).sum())

    _, cache = gru.step(gx, gh)
    gru.zero_grad()
    dx, dh = gru.step_backward(cache, gw.copy())
    analytic = {k: v.copy() for k, v in gru.grads.items()}
    analytic.update({"x": dx, "h0": dh})
    yield "gru_cell", gradient_check(gru_loss, analytic, {**gru.params, "x": gx, "h0": gh})

    lstm = LSTMCell.init(3, 4, rng)
    lx = rng.standard_normal((2, 3))
    lh = rng.standard_normal((2, 4))
    lc = rng.standard_normal((2, 4))
    wh = rng.standard_normal((2, 4))
    wc = rng.standard_normal((2, 4))

    def lstm_loss():
        state, _ = lstm.step(lx, LSTMState(lh, lc))
        return float((state.h * wh).sum() + (state.c * wc).sum())

    _, cache = lstm.step(lx, LSTMState(lh, lc))
    lstm.zero_grad()
    dx, dh, dc = lstm.step_backward(cache, wh.copy(), wc.copy())
    analytic = {k: v.copy() for k, v in lstm.grads.items()}
    analytic.update({"x": dx, "h0": dh, "c0": dc})
    yield "lstm_cell", gradient_check(
        lstm_loss, analytic, {**lstm.params, "x": lx, "h0": lh, "c0": lc}
    )

    for cell_cls in (GRUCell, LSTMCell):
        layer = BidirectionalLast(cell_cls.init(3, 4, rng), cell_cls.init(3, 4, rng))
        xs = rng.standard_normal((2, 5, 3))
        mask = np.array([[1.0, 1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0, 1.0]])
        yield f"bidirectional_{cell_cls.__name__.lower()}", _layer_check(
            layer,
            lambda layer=layer, xs=xs, mask=mask: layer.forward(xs, mask),
            {**layer.params, "xs": xs},
            extra_grads=lambda dxs: {"xs": dxs},
            max_coords_per_array=12,
        )


def _mutated_gradients_fail() -> bool:
    """A backward pass scaled by 1.01 must flunk the finite-difference check."""
    rng = np.random.default_rng(40)
    layer = Dense(rng.standard_normal((4, 3)), rng.standard_normal(3))
    x = rng.standard_normal((5, 4))
    layer.zero_grad()
    report = check_layer_like(
        lambda: layer.forward(x),
        lambda weights: layer.backward(weights),
        {"w": layer.params["w"], "b": layer.params["b"]},
        lambda: {k: 1.01 * v for k, v in layer.grads.items()},
    )
    return not report.passed


def _mutated_architecture_fails(architecture: str) -> bool:
    batch = tiny_batch()
    spec = tiny_spec(architecture, GRADCHECK_SEEDS[architecture])
    model = build_model(spec)
    nudge(model, spec.seed)
    arrays = param_arrays(model)
    exclude = {}
    for name, arr in arrays.items():
        if name.endswith("table"):
            pad = np.zeros(arr.shape, dtype=bool)
            pad[0] = True
            exclude[name] = pad
    report = check_layer_like(
        forward=lambda: model.forward(batch, train=True),
        backward=lambda g: (model.zero_grad(), model.backward(g)),
        arrays=arrays,
        grads_of=lambda: {k: 1.01 * v for k, v in param_grads(model).items()},
        max_coords_per_array=25,
        step=GRADCHECK_STEP,
        exclude=exclude,
        seed=7,
    )
    return not report.passed


def test_03_gradient_suite():
    started = time.perf_counter()
    failures = []
    for name, report in _operator_reports():
        if not report.passed:
            failures.append(f"operator {name}: {report}")
    for architecture in ARCHITECTURES:
        margin, report = run_arch_gradcheck(architecture)
        if margin <= KINK_MARGIN:
            failures.append(f"{architecture}: relu margin {margin:.2e} too small")
        if not report.passed:
            failures.append(f"architecture {architecture}: {report}")
    assert not failures, "\n".join(failures)
    assert _mutated_gradients_fail(), "scaled-gradient mutant slipped through"
    assert _mutated_architecture_fails("tfidf_ffnn"), "architecture mutant slipped through"
    assert time.perf_counter() - started < 120.0


# ---------------------------------------------------------------------------
# 4. factorization loss monotonicity and rank-1 recovery


def test_04_factorization_monotone_and_rank1():
    started = time.perf_counter()
    for seed in range(100):
        A = np.random.default_rng(seed).random((20, 30))
        _, model = nnmf_fit(A, t=5, iters=60, seed=seed)
        steps = np.diff(model.loss_history)
        assert (steps <= 1e-12).all(), f"loss increased on seed {seed}: {steps.max()}"

    rng = np.random.default_rng(5)
    u = rng.random(15) + 0.1
    v = rng.random(25) + 0.1
    A = np.outer(u, v)
    W, model = nnmf_fit(A, t=1, iters=500, seed=0)
    assert float(np.linalg.norm(A - W @ model.H)) < 1e-6
    assert time.perf_counter() - started < 30.0


# ---------------------------------------------------------------------------
# 5. partition-invariant engagement aggregation on a million events


def test_05_ingestion_partition_invariance():
    started = time.perf_counter()
    n = 1_000_000
    rng = np.random.default_rng(2024)
    article_ids = [f"a{k}" for k in range(5000)]
    picks = rng.integers(0, len(article_ids), size=n)
    dwells = rng.uniform(1.0, 600.0, size=n)
    stamp = datetime(2024, 1, 1, tzinfo=timezone.utc)
    events = [
        PageViewEvent(f"e{i}", f"u{i % 997}", article_ids[picks[i]], stamp, float(dwells[i]))
        for i in range(n)
    ]

    agg_started = time.perf_counter()
    single = aggregate_engagement(events)
    agg_elapsed = time.perf_counter() - agg_started
    print(f"aggregation throughput {n / agg_elapsed:,.0f} events/s")

    assert sum(agg.click_count for agg in single.values()) == n
    for parts in (1, 4, 16):
        partitioned = aggregate_partitioned(events[k::parts] for k in range(parts))
        assert partitioned.keys() == single.keys()
        for article_id, expected in single.items():
            got = partitioned[article_id]
            assert got.click_count == expected.click_count
            assert got.total_dwell_seconds == pytest.approx(
                expected.total_dwell_seconds, rel=1e-9
            )
    assert time.perf_counter() - started < 60.0


# ---------------------------------------------------------------------------
# 6. planted soft labels survive the event -> aggregate -> label pipeline


def test_06_label_recovery_on_standard_world():
    started = time.perf_counter()
    errors = recovered_label_errors(standard_world())
    within = float((errors <= 0.05).mean())
    assert within >= 0.90, f"only {within:.1%} of articles within L1 0.05"
    assert time.perf_counter() - started < 120.0


# ---------------------------------------------------------------------------
# 7. the similarity branch earns its keep


def test_07_similarity_ablation_direction():
    started = time.perf_counter()
    raes: dict[str, list[float]] = {"proposed": [], "proposed_no_similarity": []}
    for seed in (0, 1, 2):
        report = run_experiment(
            standard_world(),
            ["proposed", "proposed_no_similarity"],
            seed=seed,
            config=TrainConfig(
                loss="mse_soft", lr=1e-3, batch_size=32, epochs=60, patience=60, seed=seed
            ),
            topic_count=20,
            nnmf_iters=100,
            body_len=60,
            provider=FileDocVectorProvider({}, dimension=100),
        )
        rows = {row.architecture: row for row in report.rows}
        assert rows["mean_predictor"].rae == pytest.approx(100.0, abs=1e-6)
        for name in raes:
            raes[name].append(rows[name].rae)

    med_full = float(np.median(raes["proposed"]))
    med_ablated = float(np.median(raes["proposed_no_similarity"]))
    assert med_full < med_ablated, f"similarity gained nothing: {med_full} vs {med_ablated}"
    assert med_full < 100.0 and med_ablated < 100.0, "models lost to the mean predictor"
    assert time.perf_counter() - started < 1800.0


# ---------------------------------------------------------------------------
# 8. every architecture can memorize a 64-sample subset


def test_08_memorization_capacity():
    started = time.perf_counter()
    world = generate_synthetic(80, events_per_article_mean=30, seed=11)
    docs = world.documents()[:64]
    labels = world.planted_labels()[:64]
    featurizer = Featurizer.fit(docs, topic_count=20, nnmf_iters=60, seed=11)
    dataset = [(featurizer.featurize(doc), ex) for doc, ex in zip(docs, labels)]
    batch = stack_inputs([inp for inp, _ in dataset])
    targets = np.array([ex.target.p for _, ex in dataset])

    budgets = {
        "proposed": 60,
        "proposed_no_similarity": 60,
        "tfidf_ffnn": 20,
        "emb_cnn1d_ffnn": 20,
        "emb_bgru_ffnn": 20,
        "emb_blstm_ffnn": 20,
    }
    assert set(budgets) == set(ARCHITECTURES)
    for architecture, epochs in budgets.items():
        assert epochs <= 200
        spec = ModelSpec(
            architecture=architecture, vocab_size=len(featurizer.vocab), seed=11, topic_dim=20
        )
        config = TrainConfig(
            loss="mse_soft", lr=1e-3, batch_size=32, epochs=epochs, patience=None, seed=11
        )
        trained = train(spec, dataset, config)
        crossing = next((r.epoch for r in trained.history if r.train_loss < 0.005), None)
        assert crossing is not None, f"{architecture} never drove training MSE below 0.005"
        final = mse(trained.predict(batch), targets)
        assert final < 0.005, f"{architecture} ended at MSE {final:.6f}"
    assert time.perf_counter() - started < 600.0


# ---------------------------------------------------------------------------
# 9. checkpoints reload bit for bit and fail loudly when damaged


def test_09_checkpoint_round_trip_and_corruption(tmp_path):
    scoring = trained_scoring_model(fresh_featurizer())
    path = tmp_path / "model.ckpt"
    save_checkpoint(scoring, path)
    loaded = load_checkpoint(path)

    rng = np.random.default_rng(77)
    words = [f"w{chr(97 + i)}{chr(97 + j)}" for i in range(6) for j in range(6)]
    for _ in range(10):
        body = " ".join(rng.choice(words, size=12))
        candidates = [" ".join(rng.choice(words, size=4)) for _ in range(3)]
        before = score(scoring, body, candidates)
        after = score(loaded, body, candidates)
        for row_a, row_b in zip(before.scores, after.scores):
            assert row_a.p == row_b.p, "round trip changed scores"
            assert row_a.rank == row_b.rank

    blob = path.read_bytes()

    bad_magic = tmp_path / "magic.ckpt"
    bad_magic.write_bytes(b"ZIPF" + blob[4:])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(bad_magic)

    bad_version = tmp_path / "version.ckpt"
    bad_version.write_bytes(blob[:4] + struct.pack("<I", 99) + blob[8:])
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(bad_version)

    truncated = tmp_path / "short.ckpt"
    truncated.write_bytes(blob[: len(blob) // 2])
    with pytest.raises((CheckpointTruncatedError, CheckpointFormatError)):
        load_checkpoint(truncated)

    skewed = dataclasses.replace(scoring, spec=dataclasses.replace(scoring.spec, topic_dim=7))
    mismatched = tmp_path / "shape.ckpt"
    save_checkpoint(skewed, mismatched)
    with pytest.raises(CheckpointShapeError):
        load_checkpoint(mismatched)

    for bad in (bad_magic, bad_version, truncated, mismatched):
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)


# ---------------------------------------------------------------------------
# 10. the scoring service honors its contract under concurrency


def test_10_service_contract_under_concurrency():
    scoring = trained_scoring_model(fresh_featurizer())
    server = create_server(scoring, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.port}"

    def get(path):
        with urllib.request.urlopen(base + path, timeout=10) as resp:
            return resp.status, json.loads(resp.read().decode("utf-8"))

    def post(payload):
        request = urllib.request.Request(
            base + "/v1/score",
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with urllib.request.urlopen(request, timeout=10) as resp:
            return resp.status, json.loads(resp.read().decode("utf-8"))

    try:
        status, health = get("/v1/health")
        assert status == 200 and health["status"] == "ok"
        assert health["model"] == scoring.spec.architecture

        status, card = get("/v1/model")
        assert status == 200
        assert card["architecture"] == scoring.spec.architecture
        assert set(card["dims"]) == {
            "vocab_size", "headline_len", "body_len", "topic_dim", "doc_vec_dim"
        }

        body = "waa wab wba wbb wca wcb wda wdb"
        candidates = ["waa wab wac", "wbd wbe wbf", "wca wcb waa", "wda wdb wdc"]
        reference = {
            row.headline: list(row.p) for row in score(scoring, body, candidates).scores
        }

        errors: list[str] = []

        def client(tag: int) -> None:
            try:
                for trial in range(3):
                    status, payload = post({"body": body, "candidates": candidates})
                    assert status == 200
                    rows = payload["scores"]
                    assert [r["headline"] for r in rows] == candidates
                    assert sorted(r["rank"] for r in rows) == [1, 2, 3, 4]
                    p2 = np.array([r["p"][1] for r in rows])
                    expected_ranks = np.empty(len(rows), dtype=int)
                    expected_ranks[np.argsort(-p2, kind="stable")] = np.arange(1, len(rows) + 1)
                    assert [r["rank"] for r in rows] == expected_ranks.tolist()
                    for r in rows:
                        assert r["p"] == reference[r["headline"]]
                        assert sum(r["p"]) == pytest.approx(1.0, abs=1e-9)
                        assert r["label"] == 1 + int(np.argmax(r["p"]))

                    shuffled = candidates[tag % 4:] + candidates[: tag % 4]
                    status, payload = post({"body": body, "candidates": shuffled})
                    assert status == 200
                    for r in payload["scores"]:
                        assert r["p"] == reference[r["headline"]], "order changed a score"

                    status, payload = post(
                        {"body": body, "candidates": [candidates[0], candidates[0]]}
                    )
                    assert status == 200
                    first, second = payload["scores"]
                    assert first["p"] == second["p"] and first["label"] == second["label"]
                    assert sorted((first["rank"], second["rank"])) == [1, 2]
            except Exception as exc:  # collected and reported after join
                errors.append(f"client {tag}: {exc!r}")

        threads = [threading.Thread(target=client, args=(i,)) for i in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=120)
        assert not errors, "\n".join(errors)
    finally:
        server.shutdown()
        thread.join(timeout=5)
