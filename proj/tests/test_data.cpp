#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "slatelab/data.hpp"
#include "slatelab/oracle.hpp"
#include "slatelab/pipeline.hpp"
#include "test_util.hpp"

using namespace slatelab;
namespace tu = slatelab::testutil;

namespace {

GeneratedPairs make_pairs(int count, std::uint64_t seed = 21) {
  Oracle oracle(tu::tiny_oracle_config(seed), tu::tiny_vocab());
  return generate_pairs(oracle, count, 12, 4, seed);
}

}  // namespace

TEST_CASE("binary labels: 1 iff atc or pay") {
  SlateSample s;
  s.labels = {Label::pay, Label::click, Label::atc, Label::impression};
  s.items.resize(4);
  std::vector<int> b = binary_labels(s);
  CHECK(b == std::vector<int>{1, 0, 1, 0});

  s.labels.assign(4, Label::impression);
  CHECK(binary_labels(s) == std::vector<int>{0, 0, 0, 0});
  s.labels.assign(4, Label::pay);
  CHECK(binary_labels(s) == std::vector<int>{1, 1, 1, 1});

  SUBCASE("idempotent and label-only") {
    s.labels = {Label::atc, Label::impression, Label::pay, Label::click};
    std::vector<int> first = binary_labels(s);
    CHECK(binary_labels(s) == first);
    s.items[0].brand_id = 99;  // item content is irrelevant
    CHECK(binary_labels(s) == first);
  }
}

TEST_CASE("dataset round trip is field-identical") {
  const std::string dir = tu::make_temp_dir("data_rt");
  GeneratedPairs pairs = make_pairs(100);
  DatasetHeader header;
  header.seed = 21;
  header.provenance_json = "{\"note\":\"test\"}";

  for (const std::string path :
       {dir + "/slates.jsonl", dir + "/slates.jsonl.gz"}) {
    CAPTURE(path);
    write_slates(path, header, pairs.slates);
    SlateDataset rt = load_slates(path);
    CHECK(rt.header.count == pairs.slates.size());
    CHECK(rt.header.seed == 21);
    REQUIRE(rt.slates.size() == pairs.slates.size());
    for (std::size_t i = 0; i < pairs.slates.size(); ++i) {
      const SlateSample& a = pairs.slates[i];
      const SlateSample& b = rt.slates[i];
      CHECK(a.context.query_id == b.context.query_id);
      CHECK(a.context.user_id == b.context.user_id);
      CHECK(a.context.user_pref == b.context.user_pref);
      CHECK(a.context.session.pv_list.size() == b.context.session.pv_list.size());
      REQUIRE(a.items.size() == b.items.size());
      for (std::size_t j = 0; j < a.items.size(); ++j) {
        CHECK(a.items[j].item_id == b.items[j].item_id);
        CHECK(a.items[j].brand_id == b.items[j].brand_id);
        CHECK(a.items[j].price_bucket == b.items[j].price_bucket);
        CHECK(a.items[j].stats == b.items[j].stats);
        CHECK(a.items[j].position_hint == b.items[j].position_hint);
      }
      CHECK(a.labels == b.labels);
    }
  }

  SUBCASE("candidate sets too") {
    const std::string path = dir + "/cands.jsonl";
    write_candidates(path, header, pairs.candidates);
    CandidateDataset rt = load_candidates(path);
    REQUIRE(rt.sets.size() == pairs.candidates.size());
    for (std::size_t i = 0; i < rt.sets.size(); ++i) {
      CHECK(rt.sets[i].ltr_scores == pairs.candidates[i].ltr_scores);
      CHECK(rt.sets[i].items.size() == pairs.candidates[i].items.size());
    }
  }
}

TEST_CASE("empty file loads as an empty stream") {
  const std::string dir = tu::make_temp_dir("data_empty");
  const std::string path = dir + "/empty.jsonl";
  std::ofstream(path).close();
  SlateDataset ds = load_slates(path);
  CHECK(ds.header.count == 0);
  CHECK(ds.slates.empty());
}

TEST_CASE("malformed line errors name the line index") {
  const std::string dir = tu::make_temp_dir("data_bad");
  GeneratedPairs pairs = make_pairs(3);
  const std::string path = dir + "/slates.jsonl";
  write_slates(path, DatasetHeader{}, pairs.slates);
  {
    std::ofstream os(path, std::ios::app);
    os << "{\"kind\":\"slate\",\"context\"";  // truncated record
  }
  try {
    load_slates(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
}

TEST_CASE("wrong record kind raises a type error") {
  const std::string dir = tu::make_temp_dir("data_kind");
  GeneratedPairs pairs = make_pairs(2);
  const std::string path = dir + "/cands.jsonl";
  write_candidates(path, DatasetHeader{}, pairs.candidates);
  CHECK_THROWS_AS(load_slates(path), DataError);
}

TEST_CASE("header count mismatch is detected") {
  const std::string dir = tu::make_temp_dir("data_count");
  GeneratedPairs pairs = make_pairs(3);
  const std::string path = dir + "/slates.jsonl";
  write_slates(path, DatasetHeader{}, pairs.slates);
  // drop the last record line
  std::string text = tu::read_file(path);
  text.erase(text.rfind("{\"kind\":\"slate\""));
  std::ofstream(path, std::ios::trunc) << text;
  CHECK_THROWS_AS(load_slates(path), DataError);
}

TEST_CASE("reweight_negatives") {
  Rng rng(17);
  auto make_corpus = [&](std::size_t pos, std::size_t neg) {
    std::vector<SlateSample> corpus;
    for (std::size_t i = 0; i < pos + neg; ++i) {
      SlateSample s;
      s.items.resize(4);
      s.labels.assign(4, Label::impression);
      if (i < pos) s.labels[0] = (i % 2 == 0) ? Label::pay : Label::atc;
      corpus.push_back(std::move(s));
    }
    rng.shuffle(corpus);
    return corpus;
  };

  SUBCASE("1/500 corpus thinned roughly 10x toward 1/50") {
    std::vector<SlateSample> corpus = make_corpus(20, 10000);
    std::vector<SlateSample> out = reweight_negatives(corpus, 1.0 / 50.0, 5);
    std::size_t pos = 0, neg = 0;
    for (const auto& s : out) (slate_has_positive(s) ? pos : neg)++;
    CHECK(pos == 20);  // positives never dropped
    CHECK(neg < 10000);
    const double ratio = static_cast<double>(pos) / static_cast<double>(neg);
    CHECK(ratio > 1.0 / 70.0);
    CHECK(ratio < 1.0 / 35.0);
  }
  SUBCASE("corpus already above target is unchanged") {
    std::vector<SlateSample> corpus = make_corpus(30, 100);
    std::vector<SlateSample> out = reweight_negatives(corpus, 1.0 / 50.0, 5);
    CHECK(out.size() == corpus.size());
  }
  SUBCASE("deterministic under seed") {
    std::vector<SlateSample> corpus = make_corpus(20, 5000);
    auto a = reweight_negatives(corpus, 1.0 / 50.0, 99);
    auto b = reweight_negatives(corpus, 1.0 / 50.0, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i].labels == b[i].labels);
  }
  SUBCASE("no positives raises") {
    std::vector<SlateSample> corpus = make_corpus(0, 50);
    CHECK_THROWS_AS(reweight_negatives(corpus, 0.02, 1), DataError);
  }
  SUBCASE("invalid ratio raises") {
    std::vector<SlateSample> corpus = make_corpus(5, 50);
    CHECK_THROWS_AS(reweight_negatives(corpus, 0.0, 1), DomainError);
    CHECK_THROWS_AS(reweight_negatives(corpus, 1.5, 1), DomainError);
  }
}

TEST_CASE("label name round trip") {
  for (Label l : {Label::impression, Label::click, Label::atc, Label::pay})
    CHECK(label_from_name(label_name(l)) == l);
  CHECK_THROWS_AS(label_from_name("bogus"), DataError);
}
