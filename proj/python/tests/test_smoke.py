import numpy as np
import pytest

import fusionret as fr


def test_cosine_and_recall():
    eye = np.eye(3)
    s = fr.cosine_similarity(eye, eye)
    assert np.array_equal(s, eye)
    assert fr.recall_at_k(s, 1) == 1.0
    scores = np.array([[0.9, 0.1, 0.0], [0.8, 0.7, 0.0], [0.1, 0.6, 0.5]])
    report = fr.metrics_report(scores, [1, 2])
    assert report[1] == pytest.approx(1 / 3)
    assert report[2] == 1.0


def test_topk_ties_go_to_lower_index():
    idx, vals = fr.topk_rows(np.array([[0.3, 0.3, 0.3, 0.3]]), 2)
    assert idx.tolist() == [[0, 1]]
    assert vals.tolist() == [[0.3, 0.3]]


def test_ensemble_complementary():
    left = np.array([[1, .4, 0, 0], [.4, 1, 0, 0], [0, 0, .4, .5], [0, 0, .5, .4]])
    right = np.array([[.4, .5, 0, 0], [.5, .4, 0, 0], [0, 0, 1, .4], [0, 0, .4, 1]])
    fused, steps, final = fr.iterative_ensemble([left, right])
    assert [s["w"] for s in steps] == [0.0, 0.5]
    assert final[1] == 1.0
    assert fused.shape == (4, 4)
    assert fr.default_grid()[:3] == [0.0, 0.5, 0.8]


def test_losses():
    assert fr.itc_loss(np.eye(2), 1.0) == pytest.approx(0.31326168751822283, abs=1e-8)
    assert fr.itm_loss([1, 0], [0.9, 0.2]) == pytest.approx(0.16425203348601803, abs=1e-8)
    assert fr.mlm_loss(np.full((1, 4), 0.25), [1]) == pytest.approx(np.log(4), abs=1e-12)
    assert fr.mim_loss(np.full((2, 2), 0.5), np.zeros((2, 2)), [1, 1, 1, 1]) == 0.5
    assert fr.total_loss(1, 1, 1, 1) == 3.1356


def test_selection_and_rerank():
    feats = np.arange(12, dtype=float).reshape(4, 3)
    guidance = np.array([[0.1, 0.8, 0.7, 0.3]])
    assert fr.select_topk(feats, guidance, 2).tolist() == [[1, 2]]
    out = fr.rerank(feats, guidance, 2, np.array([[0.1, 0.9]]))
    idx, _ = fr.topk_rows(out, 4)
    assert idx.tolist() == [[2, 1, 3, 0]]


def test_lhp_and_synth_are_seeded():
    v1, l1 = fr.lhp_sample(3, 1000)
    v2, l2 = fr.lhp_sample(3, 1000)
    assert np.array_equal(v1, v2) and np.array_equal(l1, l2)
    assert np.array_equal(l1, v1 > 0.5)
    text, image = fr.synth_embeddings(40, 8, 0.0, 1)
    assert fr.recall_at_k(fr.cosine_similarity(text, image), 1) == 1.0
    (perfect,) = fr.synth_model_scores(30, [1.0], 2)
    assert fr.recall_at_k(perfect, 1) == 1.0


def test_errors_and_io(tmp_path):
    with pytest.raises(fr.ShapeError):
        fr.cosine_similarity(np.ones((1, 2)), np.ones((1, 3)))
    with pytest.raises(fr.DegenerateInputError):
        fr.cosine_similarity(np.zeros((1, 2)), np.ones((1, 2)))
    with pytest.raises(fr.ParameterError):
        fr.topk_rows(np.ones((1, 2)), 3)
    with pytest.raises(ValueError):
        fr.recall_at_k(np.ones((2, 2)), 1, [[0], [7]])

    m = np.random.default_rng(0).normal(size=(5, 4))
    fr.write_matrix(m, tmp_path / "m.npy")
    assert np.array_equal(np.load(tmp_path / "m.npy"), m)
    assert np.array_equal(fr.load_matrix(tmp_path / "m.npy"), m)
    np.save(tmp_path / "f32.npy", m.astype(np.float32))
    assert np.allclose(fr.load_matrix(tmp_path / "f32.npy"), m, atol=1e-6)
    (tmp_path / "bad.npy").write_bytes(b"junk")
    with pytest.raises(fr.FormatError, match="byte 0"):
        fr.load_matrix(tmp_path / "bad.npy")
