import hashlib
import itertools
from pathlib import Path

import numpy as np
import pytest

from idistill.core import Label, Split, load_manifest
from idistill.synthgen import GenConfig, IdentityParams, generate_dataset, morph, render_identity


def _params(seed):
    return IdentityParams.from_seed(seed)


class TestRenderIdentity:
    def test_deterministic(self):
        p = _params(3)
        a = render_identity(p, jitter_seed=11, side=32)
        b = render_identity(p, jitter_seed=11, side=32)
        assert a.tobytes() == b.tobytes()

    def test_jitter_changes_pixels(self):
        p = _params(3)
        a = render_identity(p, jitter_seed=1, side=32)
        b = render_identity(p, jitter_seed=2, side=32)
        assert np.linalg.norm(a - b) > 0.0

    def test_identities_differ_in_parameters(self):
        params = [_params(s) for s in range(30)]
        for a, b in itertools.combinations(params, 2):
            assert a != b

    def test_intra_closer_than_inter(self):
        # the generator itself is the oracle: 20 identities x 5 renders
        renders = {
            i: [render_identity(_params(i), jitter_seed=100 * i + k, side=32) for k in range(5)]
            for i in range(20)
        }
        intra = [
            np.linalg.norm(x - y)
            for imgs in renders.values()
            for x, y in itertools.combinations(imgs, 2)
        ]
        inter = [
            np.linalg.norm(renders[i][0] - renders[j][0])
            for i, j in itertools.combinations(range(20), 2)
        ]
        assert np.mean(intra) < np.mean(inter)


class TestMorph:
    def test_midpoint_blend(self):
        a = np.zeros((4, 4, 3), dtype=np.float32)
        b = np.ones((4, 4, 3), dtype=np.float32)
        out = morph(a, b, alpha=0.5)
        assert np.allclose(out, 0.5)

    def test_self_morph_is_identity(self):
        a = np.random.default_rng(0).random((4, 4, 3)).astype(np.float32)
        for alpha in (0.1, 0.5, 0.9):
            assert np.allclose(morph(a, a, alpha), a, atol=1e-7)

    def test_alpha_to_one_limit(self):
        rng = np.random.default_rng(1)
        a = rng.random((4, 4, 3)).astype(np.float32)
        b = rng.random((4, 4, 3)).astype(np.float32)
        assert np.allclose(morph(a, b, 1.0 - 1e-9), a, atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            morph(np.zeros((4, 4, 3)), np.zeros((8, 8, 3)), 0.5)

    def test_alpha_bounds(self):
        a = np.zeros((4, 4, 3))
        with pytest.raises(ValueError):
            morph(a, a, 0.0)
        with pytest.raises(ValueError):
            morph(a, a, 1.0)


class TestGenerateDataset:
    def test_record_counts(self, tmp_path):
        cfg = GenConfig(n_identities=10, images_per_identity=2, n_morphs=5, seed=7, side=32)
        recs = load_manifest(generate_dataset(cfg, tmp_path / "d"))
        assert sum(r.label is Label.BONAFIDE for r in recs) == 20
        assert sum(r.label is Label.ATTACK for r in recs) == 5

    def test_sources_exist_among_bonafide(self, tiny_records):
        bonafide = {r.image_path for r in tiny_records if r.label is Label.BONAFIDE}
        for rec in tiny_records:
            if rec.label is Label.ATTACK:
                assert rec.source_a in bonafide and rec.source_b in bonafide

    def test_identity_disjoint_splits(self, tiny_records):
        split_of_identity = {}
        for rec in tiny_records:
            if rec.label is not Label.BONAFIDE:
                continue
            identity = rec.image_path.name.split("_")[0]
            split_of_identity.setdefault(identity, set()).add(rec.split)
        assert all(len(s) == 1 for s in split_of_identity.values())

    def test_morph_sources_distinct_identities(self, tiny_records):
        for rec in tiny_records:
            if rec.label is Label.ATTACK:
                ia = rec.source_a.name.split("_")[0]
                ib = rec.source_b.name.split("_")[0]
                assert ia != ib

    def test_morph_sources_same_split(self, tiny_records):
        split_of = {r.image_path: r.split for r in tiny_records}
        for rec in tiny_records:
            if rec.label is Label.ATTACK:
                assert split_of[rec.source_a] == rec.split
                assert split_of[rec.source_b] == rec.split

    def test_regeneration_hash_stable(self, tmp_path):
        cfg = GenConfig(n_identities=6, images_per_identity=2, n_morphs=4, seed=9, side=32)
        m1 = generate_dataset(cfg, tmp_path / "a")
        m2 = generate_dataset(cfg, tmp_path / "b")
        assert m1.read_bytes() == m2.read_bytes()
        h1 = sorted(
            (p.relative_to(tmp_path / "a"), hashlib.sha256(p.read_bytes()).hexdigest())
            for p in (tmp_path / "a").rglob("*.png")
        )
        h2 = sorted(
            (p.relative_to(tmp_path / "b"), hashlib.sha256(p.read_bytes()).hexdigest())
            for p in (tmp_path / "b").rglob("*.png")
        )
        assert [h for _, h in h1] == [h for _, h in h2]

    def test_workers_match_serial(self, tmp_path):
        cfg = GenConfig(n_identities=6, images_per_identity=2, n_morphs=3, seed=2, side=32)
        m1 = generate_dataset(cfg, tmp_path / "serial")
        m2 = generate_dataset(cfg, tmp_path / "pool", workers=4)
        a = sorted(hashlib.sha256(p.read_bytes()).hexdigest() for p in (tmp_path / "serial").rglob("*.png"))
        b = sorted(hashlib.sha256(p.read_bytes()).hexdigest() for p in (tmp_path / "pool").rglob("*.png"))
        assert a == b and m1.read_bytes() == m2.read_bytes()

    def test_too_many_morphs_rejected(self):
        with pytest.raises(ValueError):
            GenConfig(n_identities=4, images_per_identity=1, n_morphs=7, seed=0, side=32)

    def test_unwritable_directory(self, tmp_path):
        target = tmp_path / "blocked"
        target.write_text("file, not a dir")
        cfg = GenConfig(n_identities=4, images_per_identity=1, n_morphs=2, seed=0, side=32)
        with pytest.raises(OSError):
            generate_dataset(cfg, target)
