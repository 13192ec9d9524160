import json

import numpy as np
import pytest

from proxyclust.concepts import (
    CANDIDATE_CACHE_ATTR,
    ConceptSpec,
    candidate_prompt_embeddings,
    fallback_wordlist,
    load_concept_spec,
    save_concept_spec,
    score_candidates,
    select_reference,
    validate_candidates,
)
from proxyclust.embedding import PromptTemplate, TokenTable, normalize, render_prompt
from proxyclust.encoder import encode
from proxyclust.errors import ConfigError, ParseError


class TestConceptSpec:
    def test_empty_candidates_rejected(self):
        with pytest.raises(ConfigError):
            ConceptSpec("color", PromptTemplate.parse("the {}"), ())

    def test_duplicate_candidates_rejected(self):
        with pytest.raises(ConfigError):
            ConceptSpec("color", PromptTemplate.parse("the {}"), ("red", "red"))

    def test_concept_must_be_among_contrastive(self):
        with pytest.raises(ConfigError):
            ConceptSpec("color", PromptTemplate.parse("the {}"), ("red",),
                        contrastive_concepts=("species",))

    def test_target_index(self, color_spec):
        assert color_spec.contrastive_concepts[color_spec.target_index] == "color"


class TestSpecFiles:
    def test_fruit_color_capture_parses(self, tmp_path):
        # The canonical 6-color candidate list for the fruit/color concept.
        p = tmp_path / "c.json"
        p.write_text(json.dumps({
            "concept": "color",
            "template": "fruit with the color of {}",
            "candidates": ["red", "yellow", "green", "orange", "purple", "blue"],
            "contrastive_concepts": ["color", "species"],
        }))
        spec = load_concept_spec(p)
        assert len(spec.candidates) == 6
        assert spec.candidates[0] == "red"
        assert spec.prompt_template.slot_index == 5

    def test_round_trip(self, tmp_path, color_spec):
        save_concept_spec(color_spec, tmp_path / "c.json")
        assert load_concept_spec(tmp_path / "c.json") == color_spec

    def test_empty_candidates_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"concept": "c", "template": "a {}", "candidates": []}')
        with pytest.raises(ConfigError):
            load_concept_spec(p)

    def test_missing_field_diagnostic(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"concept": "c", "template": "a {}"}')
        with pytest.raises(ParseError, match="candidates"):
            load_concept_spec(p)

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        with pytest.raises(ParseError):
            load_concept_spec(p)

    def test_words_lowercased(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"concept": "Color", "template": "a {}", "candidates": ["RED"]}')
        spec = load_concept_spec(p)
        assert spec.concept_word == "color"
        assert spec.candidates == ("red",)


class TestScoring:
    def test_singleton_candidate(self, backend8, table8):
        spec = ConceptSpec("color", PromptTemplate.parse("fruit with the color of {}"),
                           ("red",))
        scores = score_candidates(normalize(np.ones(8)), spec, backend8, table8)
        assert scores.shape == (1,)

    def test_scores_bounded(self, backend8, table8, color_spec, rng):
        for _ in range(20):
            image = normalize(rng.normal(size=8))
            scores = score_candidates(image, color_spec, backend8, table8)
            assert np.all(scores >= -1.0 - 1e-9) and np.all(scores <= 1.0 + 1e-9)

    def test_matches_brute_force_loop(self, backend8, table8, color_spec, rng):
        image = normalize(rng.normal(size=8))
        scores = score_candidates(image, color_spec, backend8, table8)
        for k, word in enumerate(color_spec.candidates):
            seq = render_prompt(color_spec.prompt_template, word, table8)
            expected = float(image.values @ encode(backend8, seq).values)
            assert scores[k] == pytest.approx(expected, abs=1e-12)

    def test_cache_is_bitwise_identical(self, backend8, table8, rng):
        spec = ConceptSpec("color", PromptTemplate.parse("fruit with the color of {}"),
                           ("red", "blue"))
        fresh = np.stack([
            encode(backend8, render_prompt(spec.prompt_template, w, table8)).values
            for w in spec.candidates
        ])
        cached = candidate_prompt_embeddings(spec, backend8, table8)
        np.testing.assert_array_equal(cached, fresh)
        assert candidate_prompt_embeddings(spec, backend8, table8) is cached
        assert getattr(spec, CANDIDATE_CACHE_ATTR)[2] is cached


class TestSelection:
    def test_argmax_and_tie_rule_against_oracle(self, backend8, table8, color_spec, rng):
        image = normalize(rng.normal(size=8))
        ref = select_reference(0, image, color_spec, backend8, table8)
        scores = score_candidates(image, color_spec, backend8, table8)
        best = 0
        for k in range(1, len(scores)):
            if scores[k] > scores[best]:
                best = k
        assert ref.word == color_spec.candidates[best]
        assert ref.score == pytest.approx(float(scores[best]), abs=0)
        np.testing.assert_array_equal(ref.token_embedding, table8.lookup(ref.word))
        assert np.all(ref.score >= scores - 1e-15)

    def test_image_scale_invariance(self, backend8, table8, color_spec, rng):
        raw = rng.normal(size=8)
        a = select_reference(0, normalize(raw), color_spec, backend8, table8)
        b = select_reference(0, normalize(3.0 * raw), color_spec, backend8, table8)
        assert a.word == b.word

    def test_validate_candidates_rejects_missing(self, table8):
        spec = ConceptSpec("color", PromptTemplate.parse("the {}"), ("red", "zzz"))
        with pytest.raises(ConfigError, match="zzz"):
            validate_candidates(spec, table8)


FALLBACK_TEN = ["abstain", "candid", "function", "haphazard", "knot",
                "luxury", "nonchalance", "pension", "resilience", "taciturn"]


class TestFallbackWordlist:
    def test_full_lexicon_is_permutation(self, tmp_path):
        p = tmp_path / "lex.txt"
        p.write_text("".join(w + "\n" for w in FALLBACK_TEN))
        words = fallback_wordlist(p, 10, seed=0)
        assert sorted(words) == sorted(FALLBACK_TEN)

    def test_deterministic_and_seed_sensitive(self, tmp_path):
        p = tmp_path / "lex.txt"
        p.write_text("".join(f"word{i}\n" for i in range(1000)))
        a = fallback_wordlist(p, 10, seed=1)
        b = fallback_wordlist(p, 10, seed=1)
        c = fallback_wordlist(p, 10, seed=2)
        assert a == b
        assert a != c
        assert len(set(a)) == 10

    def test_lexicon_too_small(self, tmp_path):
        p = tmp_path / "lex.txt"
        p.write_text("one\ntwo\n")
        with pytest.raises(ConfigError):
            fallback_wordlist(p, 3, seed=0)
