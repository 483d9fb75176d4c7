#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "conav/memory.hpp"

using namespace conav;

namespace {

// Independent cosine for the retrieval oracle.
double oracle_cosine(const FeatureVector& a, const FeatureVector& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [t, n] : a) na += double(n) * n;
  for (const auto& [t, n] : b) nb += double(n) * n;
  for (const auto& [t, n] : a) {
    auto it = b.find(t);
    if (it != b.end()) dot += double(n) * it->second;
  }
  if (na == 0 || nb == 0 || dot == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

ExperienceEntry make_entry(const std::string& id, const FeatureVector& f) {
  ExperienceEntry e;
  e.id = id;
  e.features = f;
  e.context.poses = {Pose{0, 0, 0}};
  e.context.actions = {Action::MoveForward};
  e.context.observations = {"obs"};
  e.reflective.f_err_tokens = {"glass"};
  e.reflective.a_err = Action::MoveForward;
  e.reflective.cause = CauseCategory::Misperception;
  e.reflective.cause_text = "stub";
  e.reflective.a_corr = "TurnRight90";
  return e;
}

FeatureVector random_vector(std::mt19937_64& rng) {
  static const std::vector<std::string> vocab = {
      "glass", "door", "corridor", "printer", "desk", "wall", "hall",
      "chair", "lamp", "kitchen", "table", "shelf", "plant", "bin"};
  FeatureVector v;
  int k = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < k; ++i)
    v[vocab[rng() % vocab.size()]] += 1 + static_cast<int>(rng() % 3);
  return v;
}

}  // namespace

TEST_CASE("encode counts lowercased alphanumeric tokens") {
  FeatureVector v = encode("Glass Door glass");
  CHECK(v == FeatureVector{{"glass", 2}, {"door", 1}});
  CHECK(encode("").empty());
  CHECK(encode("a-b_c d") == FeatureVector{{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}});
}

TEST_CASE("encode is deterministic") {
  for (const std::string s : {"Printer at 1.5m", "GLASS door", "x  y\tz"})
    CHECK(encode(s) == encode(s));
}

TEST_CASE("cosine of the worked glass-door pair is 2/sqrt(6)") {
  double got = cosine(encode("glass door"), encode("glass door corridor"));
  CHECK(got == doctest::Approx(0.8165).epsilon(1e-4));
  CHECK(got == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-12));
}

TEST_CASE("retrieval ranks the glass entry over the kitchen entry") {
  ExperienceBank bank;
  bank.store(make_entry("F1", encode("glass door corridor")));
  bank.store(make_entry("F2", encode("kitchen table")));
  auto hits = bank.retrieve(encode("glass door"), 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].entry->id == "F1");
  CHECK(hits[0].score == doctest::Approx(0.8165).epsilon(1e-4));
  CHECK(hits[1].score == doctest::Approx(0.0));
}

TEST_CASE("a stored vector retrieves itself with score one") {
  ExperienceBank bank;
  bank.store(make_entry("self", encode("printer hall desk")));
  bank.store(make_entry("other", encode("kitchen")));
  auto hits = bank.retrieve(encode("printer hall desk"), 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].entry->id == "self");
  CHECK(hits[0].score == doctest::Approx(1.0));
}

TEST_CASE("empty bank raises on retrieve") {
  ExperienceBank bank;
  CHECK_THROWS_AS(bank.retrieve(encode("glass"), 1), EmptyBankError);
}

TEST_CASE("duplicate ids replace instead of duplicating") {
  ExperienceBank bank;
  bank.store(make_entry("e", encode("glass")));
  bank.store(make_entry("e", encode("kitchen")));
  CHECK(bank.size() == 1);
  CHECK(bank.entries()[0].features.count("kitchen") == 1);
}

TEST_CASE("retrieval matches the exhaustive oracle on random banks") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    ExperienceBank bank;
    std::vector<ExperienceEntry> entries;
    int n = 20 + static_cast<int>(rng() % 81);
    for (int i = 0; i < n; ++i) {
      auto e = make_entry("e" + std::to_string(1000 + i), random_vector(rng));
      entries.push_back(e);
      bank.store(e);
    }
    for (int q = 0; q < 20; ++q) {
      FeatureVector query = random_vector(rng);
      auto hits = bank.retrieve(query, 1);
      // oracle: exhaustive scan with independent cosine, ties by id
      std::string best_id;
      double best = -1;
      for (const auto& e : entries) {
        double s = oracle_cosine(query, e.features);
        if (s > best || (s == best && e.id < best_id)) {
          best = s;
          best_id = e.id;
        }
      }
      REQUIRE(hits.size() == 1);
      CHECK(hits[0].entry->id == best_id);
      CHECK(hits[0].score == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("scaling a query vector never changes the ranking") {
  std::mt19937_64 rng(77);
  ExperienceBank bank;
  for (int i = 0; i < 40; ++i)
    bank.store(make_entry("e" + std::to_string(100 + i), random_vector(rng)));
  for (int q = 0; q < 20; ++q) {
    FeatureVector query = random_vector(rng);
    FeatureVector scaled = query;
    int c = 2 + static_cast<int>(rng() % 5);
    for (auto& [tok, n] : scaled) n *= c;
    auto a = bank.retrieve(query, 10);
    auto b = bank.retrieve(scaled, 10);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
      CHECK(a[i].entry->id == b[i].entry->id);
  }
}

TEST_CASE("bank persists and loads byte-stably") {
  std::mt19937_64 rng(8);
  ExperienceBank bank;
  for (int i = 0; i < 25; ++i)
    bank.store(make_entry("e" + std::to_string(i), random_vector(rng)));
  std::string path = "test_bank_roundtrip.json";
  bank.persist(path);
  ExperienceBank back = ExperienceBank::load(path);
  CHECK(back == bank);
  back.persist(path + ".2");
  std::ifstream f1(path), f2(path + ".2");
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove((path + ".2").c_str());
}

TEST_CASE("schema violations surface as CorruptBank") {
  CHECK_THROWS_AS(ExperienceBank::from_json(json{{"entries", json::array()}}),
                  CorruptBankError);
  CHECK_THROWS_AS(
      ExperienceBank::from_json(json{{"version", 999}, {"entries", json::array()}}),
      CorruptBankError);
  // a_err == a_corr with a non-other cause violates the reflective invariant
  auto e = make_entry("bad", encode("glass"));
  e.reflective.a_corr = "MoveForward";
  ExperienceBank bank;
  CHECK_THROWS_AS(bank.store(e), CorruptBankError);
}

TEST_CASE("history log appends in order and rejects gaps") {
  History h;
  HistoryRecord r0;
  r0.t = 0;
  h.log(r0);
  CHECK(h.size() == 1);
  HistoryRecord r1;
  r1.t = 1;
  h.log(r1);
  HistoryRecord r5;
  r5.t = 5;
  CHECK_THROWS_AS(h.log(r5), OutOfOrderError);
  CHECK(h.size() == 2);
}

TEST_CASE("history window returns the most recent records") {
  History h;
  for (int t = 0; t < 25; ++t) {
    HistoryRecord r;
    r.t = t;
    h.log(r);
  }
  auto w = h.window(10);
  REQUIRE(w.size() == 10);
  CHECK(w.front().t == 15);
  CHECK(w.back().t == 24);
}
