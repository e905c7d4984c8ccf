"""Co-occurrence fitting, walks, and the three encoding samplers."""
import json

import numpy as np
import pytest

from mathforge.difficulty import (
    N_NODES,
    NODE_INDEX,
    NODE_ORDER,
    level_of,
    parse_encoding,
)
from mathforge.errors import ConfigError, DataError, SamplingError
from mathforge.sampling import (
    CorpusItem,
    SamplerConfig,
    TransitionMatrix,
    crs_sample,
    daps_sample,
    fit_cooccurrence,
    fit_transition_matrix,
    jaccard_matrix,
    load_corpus,
    load_matrix,
    random_walk,
    random_walks,
    rs_sample,
    save_matrix,
    start_state,
    success_probability,
    transition_matrix,
    walk_difficulties,
    walk_encodings,
    walk_step,
)

ALL_MIN = "A1B1C1D1E1F1G1H1"

N_SEEDED_WALKS = 10_000


def uniform_matrix() -> TransitionMatrix:
    return TransitionMatrix(P=np.full((N_NODES, N_NODES), 1.0 / N_NODES))


# ---------------------------------------------------------------- corpus i/o


def test_load_corpus_reads_fields(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(
        json.dumps({"encoding": ALL_MIN, "chapter": "Functions", "type": "fill-in", "text": "t"})
        + "\n\n"
        + json.dumps({"encoding": "A1B2C1D1E2F1G1H2"})
        + "\n"
    )
    items = load_corpus(path)
    assert len(items) == 2
    assert items[0].chapter == "Functions" and items[0].text == "t"
    assert items[1].chapter is None


def test_load_corpus_reports_line_numbers(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(
        json.dumps({"encoding": ALL_MIN}) + "\n" + "not json\n"
    )
    with pytest.raises(DataError) as err:
        load_corpus(path)
    assert ":2:" in str(err.value)

    path.write_text(json.dumps({"encoding": "A9" * 8}) + "\n")
    with pytest.raises(DataError) as err:
        load_corpus(path)
    assert ":1:" in str(err.value)


# ------------------------------------------------------------- cooccurrence


def test_fit_cooccurrence_single_item():
    counts = fit_cooccurrence([ALL_MIN])
    a1, b1, a2 = NODE_INDEX["A1"], NODE_INDEX["B1"], NODE_INDEX["A2"]
    assert counts.N[a1] == 1
    assert counts.C[a1, b1] == 1
    assert counts.C[a1, a2] == 0
    assert counts.total == 1


def test_fit_cooccurrence_two_identical_items():
    counts = fit_cooccurrence([ALL_MIN, ALL_MIN])
    present = [NODE_INDEX[f"{d}1"] for d in "ABCDEFGH"]
    for i in present:
        for j in present:
            assert counts.C[i, j] == 2


def test_fit_cooccurrence_shared_node():
    e1 = "A1B1C1D1E1F1G1H1"
    e2 = "A2B2C2D2E2F1G1H2"  # shares F1 and G1 with e1
    counts = fit_cooccurrence([e1, e2])
    g1 = NODE_INDEX["G1"]
    assert counts.C[g1, g1] == 2
    # cross-item node pairs never co-occur
    assert counts.C[NODE_INDEX["A1"], NODE_INDEX["A2"]] == 0
    assert counts.C[NODE_INDEX["B1"], NODE_INDEX["C2"]] == 0
    # within-item pairs do
    assert counts.C[NODE_INDEX["A2"], NODE_INDEX["H2"]] == 1


def test_fit_accepts_corpus_items():
    items = [CorpusItem(encoding=ALL_MIN), CorpusItem(encoding=ALL_MIN)]
    assert fit_cooccurrence(items).total == 2


def test_fit_rejects_empty():
    with pytest.raises(DataError):
        fit_cooccurrence([])


# ------------------------------------------------------------------ jaccard


def test_jaccard_values():
    counts = fit_cooccurrence([ALL_MIN])
    J = jaccard_matrix(counts)
    a1, b1 = NODE_INDEX["A1"], NODE_INDEX["B1"]
    assert J[a1, b1] == 1.0       # C=N_i=N_j=1
    assert J[a1, a1] == 1.0       # diagonal where seen
    h3 = NODE_INDEX["H3"]
    assert J[h3, h3] == 0.0       # both unseen -> defined 0
    assert J[a1, h3] == 0.0


def test_jaccard_closed_form():
    # C_ij=5, N_i=10, N_j=10 -> 5/15
    counts = fit_cooccurrence([ALL_MIN])
    C = np.zeros((N_NODES, N_NODES))
    N = np.zeros(N_NODES)
    i, j = 0, 3
    C[i, i] = N[i] = 10
    C[j, j] = N[j] = 10
    C[i, j] = C[j, i] = 5
    J = jaccard_matrix(type(counts)(C=C, N=N, total=10))
    assert J[i, j] == pytest.approx(5 / 15, abs=1e-12)
    assert J[i, j] == pytest.approx(J[j, i], abs=1e-12)


def test_transition_matrix_normalization_and_fallback():
    J = np.zeros((N_NODES, N_NODES))
    J[2, 0] = 0.2
    J[5, 0] = 0.2
    tm = transition_matrix(J)
    assert tm.P[2, 0] == pytest.approx(0.5)
    assert tm.P[5, 0] == pytest.approx(0.5)
    # all-zero column -> uniform fallback
    assert np.allclose(tm.P[:, 1], 1.0 / N_NODES)
    assert np.allclose(tm.P.sum(axis=0), 1.0, atol=1e-9)


def test_transition_matrix_asymmetric_from_symmetric_jaccard():
    J = np.zeros((N_NODES, N_NODES))
    i, j, k = 0, 4, 9
    J[i, j] = J[j, i] = 0.1
    J[k, j] = J[j, k] = 0.3   # j's column has extra mass; i's does not
    tm = transition_matrix(J)
    assert tm.P[i, j] != pytest.approx(tm.P[j, i])


def test_fitted_columns_stochastic_over_random_corpora():
    rng = np.random.default_rng(4)
    for _ in range(25):
        size = int(rng.integers(1, 200))
        corpus = [rs_sample(rng) for _ in range(size)]
        tm = fit_transition_matrix(corpus)
        assert np.allclose(tm.P.sum(axis=0), 1.0, atol=1e-9)
        assert (tm.P >= 0).all()


def test_matrix_roundtrip(tmp_path):
    tm = fit_transition_matrix([ALL_MIN, "A1B2C1D1E2F1G1H2"])
    path = tmp_path / "matrix.json"
    save_matrix(tm, path)
    again = load_matrix(path)
    assert np.array_equal(tm.P, again.P)
    assert again.node_order == NODE_ORDER


def test_load_matrix_validates(tmp_path):
    path = tmp_path / "matrix.json"
    path.write_text(json.dumps({"node_order": ["A1"], "P": [[1.0]]}))
    with pytest.raises(DataError):
        load_matrix(path)


# -------------------------------------------------------------------- walks


def test_walk_step_excludes_visited_dimension():
    tm = uniform_matrix()
    rng = np.random.default_rng(0)
    state = start_state("A1")
    for _ in range(200):
        nxt = walk_step(tm, state, rng)
        assert nxt.current[0] != "A"


def test_walk_step_last_dimension_uniform():
    """Visited A..G leaves H1/H2/H3 at 1/3 each under uniform P."""
    tm = uniform_matrix()
    rng = np.random.default_rng(1)
    base = start_state("A1")
    state = base
    for node in ("B1", "C1", "D1", "E1", "F1", "G1"):
        state = type(base)(
            current=node,
            visited_dims=state.visited_dims | {node[0]},
            path=state.path + (node,),
        )
    counts = {"H1": 0, "H2": 0, "H3": 0}
    trials = 9_000
    for _ in range(trials):
        counts[walk_step(tm, state, rng).current] += 1
    for node, count in counts.items():
        assert count / trials == pytest.approx(1 / 3, abs=0.02)


def test_walk_step_renormalizes_candidate_weights():
    """Candidate weights (0.1, 0.3) sample at (0.25, 0.75)."""
    P = np.zeros((N_NODES, N_NODES))
    a1 = NODE_INDEX["A1"]
    P[NODE_INDEX["H1"], a1] = 0.1
    P[NODE_INDEX["H2"], a1] = 0.3
    P[a1, a1] = 0.6  # self-mass; unreachable once A is visited
    for j in range(N_NODES):
        if j != a1:
            P[0, j] = 1.0
    tm = TransitionMatrix(P=P)
    rng = np.random.default_rng(2)
    state = start_state("A1")
    # force visited to all but H
    for node in ("B1", "C1", "D1", "E1", "F1", "G1"):
        state = type(state)(
            current="A1",
            visited_dims=state.visited_dims | {node[0]},
            path=state.path,
        )
    trials = 8_000
    h2 = sum(walk_step(tm, state, rng).current == "H2" for _ in range(trials))
    assert h2 / trials == pytest.approx(0.75, abs=0.02)


def test_random_walk_valid_encoding():
    tm = uniform_matrix()
    rng = np.random.default_rng(3)
    for _ in range(200):
        encoding = random_walk(tm, rng)
        levels = parse_encoding(encoding)  # raises if structurally invalid
        assert len(levels) == 8


def test_random_walk_deterministic_at_fixed_seed():
    tm = fit_transition_matrix([ALL_MIN, "A1B2C1D1E2F1G1H2"])
    first = random_walk(tm, np.random.default_rng(42))
    second = random_walk(tm, np.random.default_rng(42))
    assert first == second


def test_uniform_start_frequencies():
    """Every node starts a walk with frequency 1/21 over many walks."""
    tm = uniform_matrix()
    rng = np.random.default_rng(5)
    counts = {node: 0 for node in NODE_ORDER}
    for _ in range(N_SEEDED_WALKS):
        state = start_state(NODE_ORDER[rng.integers(N_NODES)])
        counts[state.current] += 1
    for node, count in counts.items():
        assert count / N_SEEDED_WALKS == pytest.approx(1 / 21, abs=0.02)


def test_first_transition_matches_truncated_column():
    """Empirical first-step law from a fixed start equals the
    truncated-renormalized transition column within 0.02 TV."""
    corpus_rng = np.random.default_rng(6)
    tm = fit_transition_matrix([rs_sample(corpus_rng) for _ in range(60)])
    start = "C2"
    column = tm.P[:, NODE_INDEX[start]].copy()
    for i, node in enumerate(NODE_ORDER):
        if node[0] == "C":
            column[i] = 0.0
    expected = column / column.sum()
    rng = np.random.default_rng(7)
    counts = np.zeros(N_NODES)
    for _ in range(N_SEEDED_WALKS):
        nxt = walk_step(tm, start_state(start), rng)
        counts[NODE_INDEX[nxt.current]] += 1
    empirical = counts / N_SEEDED_WALKS
    assert 0.5 * np.abs(empirical - expected).sum() < 0.02


def test_batch_walks_structurally_valid():
    tm = fit_transition_matrix([ALL_MIN, "A2B2C3D2E2F1G1H2"])
    rng = np.random.default_rng(8)
    chosen = random_walks(tm, 5_000, rng)
    assert chosen.shape == (5_000, 8)
    # column d must hold a node of dimension d
    for d in range(8):
        nodes = {NODE_ORDER[i][0] for i in chosen[:, d]}
        assert nodes == {"ABCDEFGH"[d]}
    encodings = walk_encodings(chosen)
    for encoding in encodings[:100]:
        parse_encoding(encoding)


def test_batch_walks_match_scalar_law():
    """Batch and scalar walks sample the same distribution."""
    corpus_rng = np.random.default_rng(9)
    tm = fit_transition_matrix([rs_sample(corpus_rng) for _ in range(40)])
    scalar = [random_walk(tm, np.random.default_rng(100 + i)) for i in range(4_000)]
    batch = walk_encodings(random_walks(tm, 4_000, np.random.default_rng(10)))
    scalar_levels = np.array([[parse_encoding(e)[d] for d in "ABCDEFGH"] for e in scalar])
    batch_levels = np.array([[parse_encoding(e)[d] for d in "ABCDEFGH"] for e in batch])
    # compare per-dimension marginals
    for d in range(8):
        for level in np.unique(np.concatenate([scalar_levels[:, d], batch_levels[:, d]])):
            f1 = (scalar_levels[:, d] == level).mean()
            f2 = (batch_levels[:, d] == level).mean()
            assert f1 == pytest.approx(f2, abs=0.04)


def test_walk_difficulties_matches_scalar():
    tm = uniform_matrix()
    rng = np.random.default_rng(11)
    chosen = random_walks(tm, 50, rng)
    from mathforge.difficulty import difficulty

    for row, encoding in zip(walk_difficulties(chosen), walk_encodings(chosen)):
        assert row == pytest.approx(difficulty(encoding), abs=1e-12)


# --------------------------------------------------------------------- daps


def test_daps_sample_hits_target_band():
    corpus = [ALL_MIN] * 10
    tm = fit_transition_matrix(corpus)
    rng = np.random.default_rng(12)
    encoding, report = daps_sample(tm, "Easy", rng=rng)
    assert level_of(encoding) == "Easy"
    assert report.rounds_used == 1  # heavily easy corpus accepts in round one
    assert report.accepted_count >= 1
    assert report.candidates_generated == report.rounds_used * 64
    assert 0 < report.alpha_estimate <= 1


def test_daps_sample_all_levels_on_broad_corpus():
    rng = np.random.default_rng(13)
    corpus = [rs_sample(rng) for _ in range(300)]
    tm = fit_transition_matrix(corpus)
    for level in ("Easy", "Medium", "Hard", "Expert"):
        encoding, report = daps_sample(tm, level, rng=rng)
        assert level_of(encoding) == level


def test_daps_sample_infeasible_band_errors():
    tm = fit_transition_matrix([ALL_MIN] * 5)
    rng = np.random.default_rng(14)
    config = SamplerConfig(batch_size=8, max_attempt_rounds=5)
    # zero-width Easy interval [1.0, 1.0) is unsatisfiable by construction
    bands = [1.0, 1.0, 1.40625, 1.8125, 2.625]
    with pytest.raises(SamplingError):
        daps_sample(tm, "Easy", rng=rng, bands=bands, config=config)


def test_daps_sample_unknown_level():
    tm = uniform_matrix()
    with pytest.raises(ConfigError):
        daps_sample(tm, "Impossible", rng=np.random.default_rng(0))


def test_daps_report_counts_rejected_rounds():
    tm = fit_transition_matrix([ALL_MIN] * 5)
    rng = np.random.default_rng(15)
    config = SamplerConfig(batch_size=4, max_attempt_rounds=400)
    # Expert is rare on an all-minimum corpus: rounds_used routinely > 1
    encoding, report = daps_sample(tm, "Expert", rng=rng, config=config)
    assert level_of(encoding) == "Expert"
    assert report.candidates_generated == report.rounds_used * 4
    assert report.alpha_estimate == report.accepted_count / report.candidates_generated


# ----------------------------------------------------------------- rs / crs


def test_rs_sample_valid_and_deterministic():
    first = [rs_sample(np.random.default_rng(16)) for _ in range(50)]
    second = [rs_sample(np.random.default_rng(16)) for _ in range(50)]
    assert first == second
    for encoding in first:
        parse_encoding(encoding)


def test_rs_sample_uniform_marginals():
    rng = np.random.default_rng(17)
    draws = [rs_sample(rng) for _ in range(N_SEEDED_WALKS)]
    b2 = sum(parse_encoding(e)["B"] == 2 for e in draws) / len(draws)
    assert b2 == pytest.approx(0.5, abs=0.02)
    a_levels = [parse_encoding(e)["A"] for e in draws]
    for level in (1, 2, 3):
        assert a_levels.count(level) / len(draws) == pytest.approx(1 / 3, abs=0.02)


def test_crs_empty_rules_equals_rs():
    assert crs_sample([], np.random.default_rng(18)) == rs_sample(np.random.default_rng(18))


def test_crs_respects_forbidden_pair():
    rng = np.random.default_rng(19)
    for _ in range(300):
        encoding = crs_sample([("C1", "H3")], rng)
        nodes = {encoding[i : i + 2] for i in range(0, 16, 2)}
        assert not ({"C1", "H3"} <= nodes)


def test_crs_infeasible_rules_error():
    rules = [
        (f"A{a}", f"H{h}") for a in (1, 2, 3) for h in (1, 2, 3)
    ]  # forbids every A-H combination
    with pytest.raises(SamplingError):
        crs_sample(rules, np.random.default_rng(20), max_attempts=2_000)


def test_crs_rejects_malformed_rules():
    rng = np.random.default_rng(21)
    with pytest.raises(DataError):
        crs_sample([("A1",)], rng)
    with pytest.raises(DataError):
        crs_sample([("A1", "A2")], rng)  # same dimension
    with pytest.raises(DataError):
        crs_sample([("A1", "Z9")], rng)


# -------------------------------------------------------- success probability


def test_success_probability_values():
    assert success_probability(1.0, 1) == 1.0
    assert success_probability(0.0, 7) == 0.0
    assert success_probability(0.5, 3) == pytest.approx(0.875, abs=1e-12)
    assert success_probability(0.3, 0) == 0.0


def test_success_probability_validates():
    with pytest.raises(ConfigError):
        success_probability(1.5, 1)
    with pytest.raises(ConfigError):
        success_probability(0.5, -1)


def test_sampler_config_validates():
    with pytest.raises(ConfigError):
        SamplerConfig(batch_size=0)
    with pytest.raises(ConfigError):
        SamplerConfig(max_attempt_rounds=0)
