import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from charsurprisal.bpe import (
    BPECodec,
    CodecFormatError,
    DecodingError,
    EncodingError,
    escape,
    train_bpe,
    unescape,
)


def test_train_abab():
    codec, merges = train_bpe(["abab"], 3)
    assert set(codec.tokens) == {"a", "b", "ab"}
    assert merges == [("a", "b")]


def test_train_budget_exhausted_by_alphabet():
    codec, merges = train_bpe(["xy"], 2)
    assert set(codec.tokens) == {"x", "y"}
    assert merges == []


def test_train_aaaa():
    codec, merges = train_bpe(["aaaa"], 3)
    assert set(codec.tokens) == {"a", "aa"}
    assert merges == [("a", "a")]


def test_train_errors():
    with pytest.raises(ValueError):
        train_bpe([], 5)
    with pytest.raises(ValueError):
        train_bpe(["abc"], 2)


def test_train_tie_break_is_lexicographic():
    # "ab" and "cd" both occur twice; "ab" < "cd"
    _, merges = train_bpe(["cd", "ab", "cd", "ab"], 6)
    assert merges[0] == ("a", "b")
    assert merges[1] == ("c", "d")


def test_train_is_deterministic():
    corpus = ["the cat sat", "the hat", "a cat and a hat"]
    assert train_bpe(corpus, 20) == train_bpe(list(corpus), 20)


def test_encode_decode_toy(toy_codec):
    ab = toy_codec.token_id("ab")
    assert toy_codec.encode("abab") == [ab, ab]
    assert toy_codec.encode("") == []
    assert toy_codec.decode([ab, ab]) == "abab"
    assert toy_codec.decode([]) == ""
    a, b = toy_codec.token_id("a"), toy_codec.token_id("b")
    assert toy_codec.decode([a, b, a]) == "aba"


def test_encode_without_merges_falls_back_to_characters():
    codec = BPECodec(["a", "b"])
    assert codec.encode("ba") == [1, 0]


def test_merge_order_not_longest_match():
    # merge (b, c) outranks (a, b): "abc" -> a + bc although "ab" is a token
    codec = BPECodec(["a", "b", "c", "bc", "ab"], [("b", "c"), ("a", "b")])
    assert codec.decode(codec.encode("abc")) == "abc"
    assert [codec.tokens[t] for t in codec.encode("abc")] == ["a", "bc"]


def test_encoding_error_names_char_and_offset(toy_codec):
    with pytest.raises(EncodingError) as err:
        toy_codec.encode("abz")
    assert err.value.char == "z" and err.value.offset == 2
    assert "'z'" in str(err.value) and "2" in str(err.value)


def test_decoding_error(toy_codec):
    with pytest.raises(DecodingError):
        toy_codec.decode([7])


def test_tokens_matching_toy(toy_codec):
    a, b, ab = (toy_codec.token_id(t) for t in ("a", "b", "ab"))
    inside, covering = toy_codec.tokens_matching("ab")
    assert a in inside and ab in covering
    assert toy_codec.tokens_matching("b") == (set(), {b})
    assert toy_codec.tokens_matching("a") == (set(), {a, ab})


def test_tokens_matching_single_char_codec():
    codec = BPECodec(["z"])
    assert codec.tokens_matching("zz") == ({0}, set())


def test_invalid_alphabets():
    with pytest.raises(CodecFormatError):
        BPECodec(["a", "a"])
    with pytest.raises(CodecFormatError):
        BPECodec(["a", ""])
    with pytest.raises(CodecFormatError):
        BPECodec(["a", "b"], [("a", "b")])


def test_save_load_round_trip(tmp_path):
    corpus = ["tab\there", "new\nline", "back\\slash  two", "nbsp x", "wide　y"] * 3
    codec, _ = train_bpe(corpus, 60)
    codec.save(tmp_path / "v.txt", tmp_path / "m.txt")
    again = BPECodec.load(tmp_path / "v.txt", tmp_path / "m.txt")
    assert again == codec
    assert again.tokens == codec.tokens
    # whitespace never appears raw inside a record
    for line in (tmp_path / "v.txt").read_text(encoding="utf-8").splitlines()[1:]:
        assert " " not in line and line.count("\t") == 1


def test_load_rejects_bad_header(tmp_path):
    (tmp_path / "v.txt").write_text("nonsense\n0\ta\n", encoding="utf-8")
    (tmp_path / "m.txt").write_text("#charsurprisal-merges\tv1\n", encoding="utf-8")
    with pytest.raises(CodecFormatError):
        BPECodec.load(tmp_path / "v.txt", tmp_path / "m.txt")


@settings(max_examples=500, deadline=None)
@given(st.text(min_size=0, max_size=12))
def test_escape_round_trip(text):
    assert unescape(escape(text)) == text
    assert "\t" not in escape(text) and "\n" not in escape(text)


CORPUS = ["the cat sat on the mat", "a hat, a bat", "that cat ate", "mat and hat"]
CODEC, _ = train_bpe(CORPUS, 40)
ALPHABET = "".join(sorted(CODEC.base_alphabet))


@settings(max_examples=1000, deadline=None)
@given(st.text(alphabet=ALPHABET, max_size=30))
def test_exactness(text):
    assert CODEC.decode(CODEC.encode(text)) == text


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.integers(0, len(CODEC) - 1), max_size=12))
def test_multiplicativity(ids):
    assert CODEC.decode(ids) == "".join(CODEC.decode([i]) for i in ids)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=ALPHABET, min_size=1, max_size=8))
def test_tokens_matching_matches_brute_force(remainder):
    inside, covering = CODEC.tokens_matching(remainder)
    for i, t in enumerate(CODEC.tokens):
        assert (i in covering) == t.startswith(remainder)
        assert (i in inside) == (remainder.startswith(t) and t != remainder)
