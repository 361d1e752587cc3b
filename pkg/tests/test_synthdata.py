import numpy as np
import pytest

from adaptive_spectral.minhash import jaccard_exact, parse_fasta, write_fasta
from adaptive_spectral.model import Channel
from adaptive_spectral.synthdata import default_layout, gen_crowd_instance, gen_genome, gen_reads_with_overlaps


def test_crowd_items_follow_beta_mean():
    inst = gen_crowd_instance(10**5, seed=1)
    assert abs(inst.item_params.mean() - 1 / 6) < 0.01
    assert inst.channel is Channel.XOR_SYMMETRIC
    assert inst.n_workers is None


def test_crowd_instance_is_seeded():
    a, b = gen_crowd_instance(50, 3), gen_crowd_instance(50, 3)
    np.testing.assert_array_equal(a.item_params, b.item_params)
    np.testing.assert_array_equal(a.worker_raw(np.arange(10)), b.worker_raw(np.arange(10)))
    assert not np.array_equal(a.item_params, gen_crowd_instance(50, 4).item_params)


def test_genome_base_frequencies():
    g = gen_genome(20000, seed=0)
    assert len(g) == 20000
    for base in "ACGT":
        assert abs(g.count(base) / len(g) - 0.25) < 0.02
    assert gen_genome(500, 9) == gen_genome(500, 9)


def test_repeat_anchor_places_exact_copy():
    g = gen_genome(5000, 2, repeat_length=100, repeat_copies=5, repeat_divergence=0.0, repeat_anchor=1000)
    element = g[1000:1100]
    # the element is a random string, so more than one hit means the copies landed
    assert g.count(element) >= 2
    with pytest.raises(ValueError):
        gen_genome(5000, 2, repeat_anchor=10)


def test_overlap_geometry_and_truth():
    genome = gen_genome(20000, 5)
    layout = default_layout(30, 20000, 1000, 3, seed=6)
    ps = gen_reads_with_overlaps(genome, 1000, layout, 0.0, 4, seed=7)
    assert ps.reference.sequence == genome[:1000]
    for read, o in zip(ps.data_reads, layout):
        assert read.sequence == genome[o : o + 1000]
    np.testing.assert_allclose(ps.true_overlap[:30], np.maximum(0, 1 - layout / 1000))
    assert len(ps.calibration) == 4 and all(r.is_calibration for r in ps.calibration)
    top = ps.top_k(3)
    assert set(top) == {0, 1, 2}
    assert np.all(layout[:3] <= 250) and np.all(layout[6:] >= 1000)


def test_jaccard_grows_with_overlap_when_noiseless():
    genome = gen_genome(20000, 11)
    layout = np.array([100, 300, 500, 700, 900])
    ps = gen_reads_with_overlaps(genome, 1000, layout, 0.0, 3, seed=1)
    js = [jaccard_exact(ps.reference.sequence, r.sequence, 14) for r in ps.data_reads]
    assert all(a > b for a, b in zip(js, js[1:]))
    for r in ps.calibration:
        assert jaccard_exact(ps.reference.sequence, r.sequence, 14) <= 0.05


def test_planted_reads_fasta_round_trip(tmp_path):
    ps = gen_reads_with_overlaps(gen_genome(4000, 1), 500, [10, 1500], 0.02, 2, seed=3)
    path = tmp_path / "reads.fa"
    write_fasta([ps.reference, *ps.reads], path)
    back = parse_fasta(path)
    assert [r.sequence for r in back] == [ps.reference.sequence] + [r.sequence for r in ps.reads]


def test_layout_and_read_errors():
    with pytest.raises(ValueError):
        default_layout(5, 20000, 1000, 3, seed=0)
    with pytest.raises(ValueError):
        default_layout(30, 1500, 1000, 3, seed=0)
    with pytest.raises(ValueError):
        gen_reads_with_overlaps("ACGT" * 100, 100, [350], 0.0, 0, seed=0)


def test_top_k_refuses_ties():
    ps = gen_reads_with_overlaps(gen_genome(4000, 1), 500, [10, 10, 200], 0.0, 0, seed=3)
    with pytest.raises(ValueError):
        ps.top_k(1)
