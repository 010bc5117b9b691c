#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "etmkit/corpus.hpp"
#include "etmkit/error.hpp"
#include "support.hpp"

using namespace etm;
using etm::testing::TempDir;

namespace {

TermSequence words(std::initializer_list<const char*> ws) {
  TermSequence out;
  for (const char* w : ws) out.push_back(Term::word(w));
  return out;
}

BowDocument bow(std::string id, std::uint64_t n = 1) {
  BowDocument d;
  d.doc_id = std::move(id);
  d.counts = {{0, static_cast<std::uint32_t>(n)}};
  d.n_tokens = n;
  return d;
}

}  // namespace

TEST_SUITE("tokenize") {
  TEST_CASE("lowercases and strips edge punctuation") {
    CHECK(tokenize("Apple unveiled the iPhone.") ==
          std::vector<std::string>{"apple", "unveiled", "the", "iphone"});
  }
  TEST_CASE("empty input") { CHECK(tokenize("").empty()); }
  TEST_CASE("interior punctuation survives") {
    CHECK(tokenize("U.S.-based firm") == std::vector<std::string>{"u.s.-based", "firm"});
  }
  TEST_CASE("pure punctuation tokens vanish, unicode whitespace splits") {
    CHECK(tokenize("  -- hello world　!!! ") == std::vector<std::string>{"hello", "world"});
    CHECK(tokenize("\xE2\x80\x9CQuoted\xE2\x80\x9D") == std::vector<std::string>{"quoted"});
  }
  TEST_CASE("offsets are unicode scalar positions") {
    const auto toks = tokenize_with_offsets("Café (Zürich)");
    REQUIRE(toks.size() == 2);
    CHECK(toks[0].text == "café");
    CHECK(toks[0].char_start == 0);
    CHECK(toks[0].char_end == 4);
    CHECK(toks[1].text == "zürich");
    CHECK(toks[1].char_start == 6);
    CHECK(toks[1].char_end == 12);
    CHECK(utf8_length("Café (Zürich)") == 13);
  }
}

TEST_SUITE("terms") {
  TEST_CASE("entity canonicalization") {
    CHECK(canonical_entity_key("Apple Inc.") == "ENTITY/Apple_Inc.");
    CHECK(canonical_entity_key("ENTITY/Steve_Jobs") == "ENTITY/Steve_Jobs");
    CHECK(Term::entity("Amazon rainforest").surface == "ENTITY/Amazon_rainforest");
    CHECK(term_from_surface("ENTITY/X").is_entity());
    CHECK_FALSE(term_from_surface("x").is_entity());
  }
}

TEST_SUITE("build_vocabulary") {
  TEST_CASE("seventy percent document frequency is removed") {
    std::vector<TermSequence> docs;
    for (int i = 0; i < 10; ++i) {
      TermSequence d = words({"filler"});
      d.back().surface += std::to_string(i);
      if (i < 7) d.push_back(Term::word("common"));
      if (i < 6) d.push_back(Term::word("sixty"));
      docs.push_back(d);
    }
    const auto v = build_vocabulary(docs, 0.7, {});
    CHECK_FALSE(v.find("common"));
    CHECK(v.find("sixty"));
    CHECK(v.find("filler3"));
  }
  TEST_CASE("stopwords removed, entities exempt from both filters") {
    std::vector<TermSequence> docs(4, words({"the", "apple"}));
    for (auto& d : docs) d.push_back(Term::entity("Apple Inc."));
    docs[0].push_back(Term::word("rare"));
    const auto v = build_vocabulary(docs, 0.7, {"the", "ENTITY/Apple_Inc."});
    CHECK_FALSE(v.find("the"));
    CHECK_FALSE(v.find("apple"));
    CHECK(v.find("ENTITY/Apple_Inc."));
    CHECK(v.find("rare"));
    CHECK(v.num_entities() == 1);
  }
  TEST_CASE("ids by descending frequency then surface") {
    std::vector<TermSequence> docs{words({"b", "a", "c", "c"}), words({"b", "a", "d"}), words({"x"})};
    const auto v = build_vocabulary(docs, 1.0, {});
    std::vector<std::string> got;
    for (const auto& t : v.terms()) got.push_back(t.surface);
    CHECK(got == std::vector<std::string>{"a", "b", "c", "d", "x"});
  }
  TEST_CASE("everything filtered is an error") {
    std::vector<TermSequence> docs{words({"the"}), words({"the"})};
    CHECK_THROWS_WITH_AS(build_vocabulary(docs, 0.7, {"the"}), doctest::Contains("empty vocabulary"), DataError);
  }
  TEST_CASE("property: retained words are below the threshold and not stopwords") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<TermSequence> docs(5 + rng.below(20));
      for (auto& d : docs)
        for (std::size_t j = 0, n = 1 + rng.below(8); j < n; ++j)
          d.push_back(Term::word("w" + std::to_string(rng.below(15))));
      const double frac = 0.2 + 0.8 * rng.uniform();
      const std::unordered_set<std::string> stop{"w0", "w1"};
      Vocabulary v;
      try {
        v = build_vocabulary(docs, frac, stop);
      } catch (const DataError&) {
        continue;
      }
      for (const auto& t : v.terms()) {
        std::size_t df = 0;
        for (const auto& d : docs) df += std::find(d.begin(), d.end(), t) != d.end();
        CHECK(static_cast<double>(df) / static_cast<double>(docs.size()) < frac);
        CHECK_FALSE(stop.count(t.surface));
        CHECK(*v.find(t) < v.size());
        CHECK(v.term(*v.find(t)) == t);
      }
    }
  }
}

TEST_SUITE("time slices") {
  TEST_CASE("five-year windows") {
    CHECK(assign_time_slice(1996, 1996, 5) == 0);
    CHECK(assign_time_slice(2000, 1996, 5) == 0);
    CHECK(assign_time_slice(2001, 1996, 5) == 1);
    CHECK_THROWS_WITH_AS(assign_time_slice(1995, 1996, 5), doctest::Contains("year before corpus start"),
                         DataError);
  }
  TEST_CASE("property: monotone and constant on windows") {
    for (int span = 1; span <= 7; ++span)
      for (int y = 1990; y < 2030; ++y) {
        CHECK(assign_time_slice(y + 1, 1990, span) >= assign_time_slice(y, 1990, span));
        const int window_start = 1990 + (y - 1990) / span * span;
        CHECK(assign_time_slice(y, 1990, span) == assign_time_slice(window_start, 1990, span));
      }
  }
}

TEST_SUITE("split_corpus") {
  std::vector<BowDocument> make(std::size_t n) {
    std::vector<BowDocument> docs;
    for (std::size_t i = 0; i < n; ++i) docs.push_back(bow("doc" + std::to_string(i)));
    return docs;
  }
  TEST_CASE("exact ratio") {
    const auto s = split_corpus(make(5), {3, 1, 1}, 0);
    CHECK(s.train.size() == 3);
    CHECK(s.valid.size() == 1);
    CHECK(s.test.size() == 1);
  }
  TEST_CASE("rounding: floor the held-out splits, remainder to train") {
    const auto s = split_corpus(make(6651), {3, 1, 1}, 0);
    CHECK(s.train.size() == 3991);
    CHECK(s.valid.size() == 1330);
    CHECK(s.test.size() == 1330);
  }
  TEST_CASE("deterministic and a partition") {
    const auto a = split_corpus(make(40), {3, 1, 1}, 9);
    const auto b = split_corpus(make(40), {3, 1, 1}, 9);
    const auto ids = [](const std::vector<BowDocument>& v) {
      std::vector<std::string> out;
      for (const auto& d : v) out.push_back(d.doc_id);
      return out;
    };
    CHECK(ids(a.train) == ids(b.train));
    CHECK(ids(a.test) == ids(b.test));
    std::set<std::string> all;
    for (const auto* part : {&a.train, &a.valid, &a.test})
      for (const auto& d : *part) CHECK(all.insert(d.doc_id).second);
    CHECK(all.size() == 40);
    const auto c = split_corpus(make(40), {3, 1, 1}, 10);
    CHECK(ids(c.train) != ids(a.train));
  }
  TEST_CASE("input order does not matter") {
    auto docs = make(20);
    auto rev = docs;
    std::reverse(rev.begin(), rev.end());
    CHECK(split_corpus(docs, {3, 1, 1}, 4).test.front().doc_id ==
          split_corpus(rev, {3, 1, 1}, 4).test.front().doc_id);
  }
  TEST_CASE("too few documents and duplicate ids") {
    CHECK_THROWS_AS(split_corpus(make(2), {3, 1, 1}, 0), DataError);
    auto docs = make(6);
    docs[1].doc_id = docs[0].doc_id;
    CHECK_THROWS_AS(split_corpus(docs, {3, 1, 1}, 0), DataError);
  }
  TEST_CASE("property: sizes within one of the exact ratio") {
    for (std::size_t n = 5; n < 200; n += 7) {
      const auto s = split_corpus(make(n), {3, 1, 1}, n);
      CHECK(s.train.size() + s.valid.size() + s.test.size() == n);
      CHECK(std::abs(static_cast<double>(s.valid.size()) - n / 5.0) < 1.0);
      CHECK(std::abs(static_cast<double>(s.train.size()) - 3.0 * n / 5.0) <= 2.0);
    }
  }
}

TEST_SUITE("to_bow") {
  TEST_CASE("counts, OOV dropped, empty dropped") {
    const Vocabulary v({Term::word("apple"), Term::word("pie")});
    auto d = to_bow("x", words({"apple", "apple", "pie"}), v);
    REQUIRE(d);
    CHECK(d->counts == std::vector<std::pair<TermId, std::uint32_t>>{{0, 2}, {1, 1}});
    CHECK(d->n_tokens == 3);
    CHECK_FALSE(to_bow("y", words({"banana"}), v));
    auto m = to_bow("z", words({"pie", "banana", "pie"}), v, 4);
    REQUIRE(m);
    CHECK(m->n_tokens == 2);
    CHECK(m->slice == 4u);
  }
  TEST_CASE("property: counts equal a brute-force recount") {
    Rng rng(3);
    const Vocabulary v({Term::word("a"), Term::word("b"), Term::word("c"), Term::entity("E")});
    for (int trial = 0; trial < 100; ++trial) {
      TermSequence seq;
      const char* pool[] = {"a", "b", "c", "zz", "ENTITY/E", "ENTITY/F"};
      for (std::size_t i = 0, n = rng.below(15); i < n; ++i) seq.push_back(term_from_surface(pool[rng.below(6)]));
      std::map<TermId, std::uint32_t> expect;
      for (const auto& t : seq)
        if (auto id = v.find(t)) ++expect[*id];
      const auto d = to_bow("d", seq, v);
      if (expect.empty()) {
        CHECK_FALSE(d);
        continue;
      }
      REQUIRE(d);
      CHECK(d->counts == std::vector<std::pair<TermId, std::uint32_t>>(expect.begin(), expect.end()));
    }
  }
}

TEST_SUITE("corpus io") {
  TEST_CASE("corpus jsonl round trip and validation") {
    TempDir dir;
    const auto p = dir.write("c.jsonl",
                             R"({"id":"a","text":"Apple Inc. rose","year":2001,"gold_spans":[{"start":0,"end":10,"entity":"Apple Inc."}]})"
                             "\n\n"
                             R"({"id":"b","text":"plain"})"
                             "\n");
    const auto docs = read_corpus_jsonl(p);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].year == 2001);
    REQUIRE(docs[0].gold_spans.size() == 1);
    CHECK(docs[0].gold_spans[0].end == 10);
    CHECK_FALSE(docs[1].year);
    write_corpus_jsonl(dir / "d.jsonl", docs);
    const auto again = read_corpus_jsonl(dir / "d.jsonl");
    CHECK(again[0].text == docs[0].text);
    CHECK(again[0].gold_spans[0].entity == "Apple Inc.");

    CHECK_THROWS_WITH_AS(parse_corpus_line(R"({"id":"q","text":"abc","gold_spans":[{"start":1,"end":9,"entity":"E"}]})"),
                         doctest::Contains("q"), DataError);
    CHECK_THROWS_AS(parse_corpus_line(R"({"id":"q","text":"abc def","gold_spans":[{"start":4,"end":7,"entity":"E"},{"start":0,"end":3,"entity":"F"}]})"),
                    DataError);
    CHECK_THROWS_AS(parse_corpus_line("{not json"), DataError);
    CHECK_THROWS_AS(parse_corpus_line(R"({"text":"no id"})"), DataError);
  }
  TEST_CASE("bow and vocabulary round trip") {
    TempDir dir;
    const Vocabulary v({Term::word("x"), Term::entity("New York"), Term::word("y")});
    write_vocabulary(dir / "v.txt", v);
    const auto v2 = read_vocabulary(dir / "v.txt");
    CHECK(v2.terms() == v.terms());
    CHECK(v2.hash() == v.hash());
    std::vector<BowDocument> docs{bow("a", 3), bow("b", 1)};
    docs[1].slice = 2;
    write_bow_jsonl(dir / "b.jsonl", docs);
    const auto d2 = read_bow_jsonl(dir / "b.jsonl");
    REQUIRE(d2.size() == 2);
    CHECK(d2[0].counts == docs[0].counts);
    CHECK(d2[0].n_tokens == 3);
    CHECK_FALSE(d2[0].slice);
    CHECK(d2[1].slice == 2u);
  }
  TEST_CASE("vocabulary invariants") {
    CHECK_THROWS_AS(Vocabulary({Term::word("x"), Term::word("x")}), DataError);
    CHECK_THROWS_AS(Vocabulary(std::vector<Term>{}), DataError);
  }
}
