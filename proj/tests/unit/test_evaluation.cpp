#include <doctest.h>

#include <algorithm>
#include <random>

#include "expect_error.hpp"
#include "fixtures.hpp"
#include "otomech/evaluation.hpp"

using namespace otomech;
using otomech::testing::diagnosis_label;
using otomech::testing::random_records;

namespace {

ReferenceRecord rec(std::string id, std::string diagnosis, std::vector<double> v, Location l = Location::Front,
                    Timing t = Timing::Idling) {
  ReferenceRecord r;
  r.id = std::move(id);
  r.diagnosis = std::move(diagnosis);
  r.location = l;
  r.timing = t;
  r.embedding = Embedding{std::move(v), "test-embedder"};
  return r;
}

// Leave-one-out recomputed from first principles: full sort of all other
// (filtered) records, ties by id.
std::pair<double, double> brute_loo(const std::vector<ReferenceRecord>& recs, bool use_metadata, std::size_t k) {
  std::size_t hit1 = 0, hitk = 0;
  for (const auto& q : recs) {
    std::vector<std::pair<double, const ReferenceRecord*>> pool;
    for (const auto& r : recs) {
      if (&r == &q) continue;
      if (use_metadata && (r.location != q.location || r.timing != q.timing)) continue;
      double d = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < q.embedding.values.size(); ++i) {
        d += q.embedding.values[i] * r.embedding.values[i];
        na += q.embedding.values[i] * q.embedding.values[i];
        nb += r.embedding.values[i] * r.embedding.values[i];
      }
      pool.emplace_back(d / std::sqrt(na * nb), &r);
    }
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second->id < b.second->id;
    });
    if (!pool.empty() && pool[0].second->diagnosis == q.diagnosis) ++hit1;
    for (std::size_t i = 0; i < std::min(k, pool.size()); ++i)
      if (pool[i].second->diagnosis == q.diagnosis) {
        ++hitk;
        break;
      }
  }
  return {static_cast<double>(hit1) / recs.size(), static_cast<double>(hitk) / recs.size()};
}

}  // namespace

TEST_CASE("pairs of identical vectors retrieve each other") {
  std::vector<ReferenceRecord> recs;
  const std::vector<std::vector<double>> dirs{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}};
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    recs.push_back(rec("a" + std::to_string(d), diagnosis_label(d), dirs[d]));
    recs.push_back(rec("b" + std::to_string(d), diagnosis_label(d), dirs[d]));
  }
  const DiagnosticIndex idx(recs);
  const auto rep = leave_one_out_eval(idx, false);
  CHECK(rep.top1_accuracy == 1.0);
  CHECK(rep.top3_accuracy == 1.0);
  CHECK(rep.n_queries == 8);
  CHECK(rep.k == 3);
  CHECK(rep.embedder_id == "test-embedder");
  CHECK(rep.per_diagnosis.size() == 4);
  for (const auto& [label, tally] : rep.per_diagnosis) CHECK(tally == DiagnosisTally{2, 2});
}

TEST_CASE("singleton diagnoses can never be retrieved") {
  const auto recs = random_records(12, 8, 1, 3);
  std::vector<ReferenceRecord> unique = recs;
  for (std::size_t i = 0; i < unique.size(); ++i) unique[i].diagnosis = diagnosis_label(i);
  const DiagnosticIndex idx(unique);
  const auto rep = leave_one_out_eval(idx, false);
  CHECK(rep.top1_accuracy == 0.0);
  CHECK(rep.top3_accuracy == 0.0);
  const auto rb = random_filtered_baseline(idx, false);
  CHECK(rb.expected_accuracy == 0.0);
}

TEST_CASE("leave-one-out matches a brute-force oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto recs = random_records(10 + seed % 7, 6, 3, seed);
    const DiagnosticIndex idx(recs);
    for (bool meta : {false, true}) {
      const auto rep = leave_one_out_eval(idx, meta, 3);
      const auto [t1, t3] = brute_loo(recs, meta, 3);
      CHECK(rep.top1_accuracy == doctest::Approx(t1).epsilon(1e-12));
      CHECK(rep.top3_accuracy == doctest::Approx(t3).epsilon(1e-12));
      CHECK(rep.top1_accuracy <= rep.top3_accuracy);
      std::size_t total = 0, correct = 0;
      for (const auto& [_, t] : rep.per_diagnosis) {
        total += t.total;
        correct += t.correct;
      }
      CHECK(total == recs.size());
      CHECK(static_cast<double>(correct) / total == doctest::Approx(rep.top1_accuracy));
    }
  }
}

TEST_CASE("top-k with k = n-1 sees every other record") {
  const auto recs = random_records(15, 5, 4, 44);
  const DiagnosticIndex idx(recs);
  const auto rep = leave_one_out_eval(idx, false, recs.size() - 1);
  std::size_t possible = 0;
  for (const auto& q : recs)
    possible += std::count_if(recs.begin(), recs.end(),
                              [&](const auto& r) { return &r != &q && r.diagnosis == q.diagnosis; }) > 0;
  CHECK(rep.top3_accuracy == doctest::Approx(static_cast<double>(possible) / recs.size()));
}

TEST_CASE("metadata evaluation counts empty pools as misses") {
  std::vector<ReferenceRecord> recs{
      rec("a", "belt", {1, 0}, Location::Front, Timing::Idling),
      rec("b", "belt", {1, 0.1}, Location::Front, Timing::Idling),
      rec("c", "belt", {1, 0.2}, Location::Rear, Timing::Driving),
  };
  const DiagnosticIndex idx(recs);
  const auto with = leave_one_out_eval(idx, true);
  CHECK(with.empty_pool_queries == 1);
  CHECK(with.top1_accuracy == doctest::Approx(2.0 / 3.0));
  const auto without = leave_one_out_eval(idx, false);
  CHECK(without.empty_pool_queries == 0);
  CHECK(without.top1_accuracy == 1.0);
}

TEST_CASE("random baseline closed forms") {
  SUBCASE("one diagnosis") {
    const DiagnosticIndex idx(random_records(9, 4, 1, 5));
    CHECK(random_filtered_baseline(idx, false).expected_accuracy == 1.0);
    CHECK(random_filtered_baseline(idx, false).self_included_accuracy == 1.0);
  }
  SUBCASE("twelve balanced diagnoses") {
    for (std::size_t m : {1u, 2u, 5u}) {
      auto recs = random_records(12 * m, 4, 1, m);
      for (std::size_t i = 0; i < recs.size(); ++i) recs[i].diagnosis = diagnosis_label(i % 12);
      const DiagnosticIndex idx(recs);
      const auto b = random_filtered_baseline(idx, false);
      CHECK(b.expected_accuracy == doctest::Approx((m - 1.0) / (12.0 * m - 1.0)).epsilon(1e-12));
      CHECK(b.self_included_accuracy == doctest::Approx(m / (12.0 * m)).epsilon(1e-12));
      CHECK(label_uniform_baseline(idx) == doctest::Approx(1.0 / 12));
      CHECK(format_percent(label_uniform_baseline(idx)) == "8.3");
    }
  }
}

TEST_CASE("random baseline agrees with simulation") {
  const auto recs = random_records(60, 4, 7, 123);
  const DiagnosticIndex idx(recs);
  std::mt19937_64 rng(9);
  for (bool meta : {false, true}) {
    const auto b = random_filtered_baseline(idx, meta);
    std::vector<std::vector<const ReferenceRecord*>> pools(recs.size());
    for (std::size_t q = 0; q < recs.size(); ++q)
      for (std::size_t r = 0; r < recs.size(); ++r)
        if (r != q && (!meta || passes_filter(recs[r], recs[q].location, recs[q].timing)))
          pools[q].push_back(&recs[r]);
    std::size_t hits = 0;
    const std::size_t trials = 100000;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t q = rng() % recs.size();
      if (pools[q].empty()) continue;
      hits += pools[q][rng() % pools[q].size()]->diagnosis == recs[q].diagnosis;
    }
    CHECK(std::abs(static_cast<double>(hits) / trials - b.expected_accuracy) <= 0.01);
  }
}

TEST_CASE("record order does not change the report") {
  auto recs = random_records(30, 6, 5, 8);
  const auto base = leave_one_out_eval(DiagnosticIndex(recs), true);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(recs.begin(), recs.end(), rng);
    CHECK(leave_one_out_eval(DiagnosticIndex(recs), true) == base);
  }
}

TEST_CASE("formatting and json") {
  CHECK(format_percent(0.587) == "58.7");
  CHECK(format_percent(0.0) == "0.0");
  CHECK(format_percent(1.0) == "100.0");
  CHECK(parse_report_format("json") == ReportFormat::Json);
  CHECK(parse_report_format("table") == ReportFormat::Text);
  CHECK_FALSE(parse_report_format("xml"));

  const DiagnosticIndex idx(random_records(20, 4, 3, 6));
  const auto rep = leave_one_out_eval(idx, true);
  const auto j = to_json(rep);
  for (const char* key : {"top1_accuracy", "top3_accuracy", "k", "n_queries", "use_metadata", "empty_pool_queries",
                          "per_diagnosis_breakdown", "embedder_id"})
    CHECK(j.contains(key));
  CHECK(eval_report_from_json(nlohmann::json::parse(j.dump())) == rep);
  CHECK(nlohmann::json::parse(emit_report(rep, ReportFormat::Json)) == j);
  CHECK(emit_report(rep, ReportFormat::Text).find(format_percent(rep.top1_accuracy)) != std::string::npos);

  const auto rb = random_filtered_baseline(idx, true);
  CHECK(random_baseline_from_json(nlohmann::json::parse(to_json(rb).dump())) == rb);

  const auto summary = evaluate_index(idx, true, true);
  CHECK(summary.with_metadata == rep);
  CHECK(summary.records == 20);
  const auto table = emit_summary(summary, ReportFormat::Text);
  CHECK(table.find(format_percent(summary.label_uniform)) != std::string::npos);
  const auto sj = nlohmann::json::parse(emit_summary(summary, ReportFormat::Json));
  CHECK(sj["with_metadata"]["top1_accuracy"] == rep.top1_accuracy);

  const auto only = evaluate_index(idx, false, true);
  CHECK_FALSE(only.with_metadata);
  CHECK(only.without_metadata);
}

TEST_CASE("degenerate inputs") {
  const DiagnosticIndex idx(std::vector<ReferenceRecord>{});
  CHECK(otomech::testing::error_code_of([&] { leave_one_out_eval(idx, false); }) == ErrorCode::InsufficientRecords);
  const DiagnosticIndex one(random_records(1, 4, 1, 1));
  CHECK(otomech::testing::error_code_of([&] { leave_one_out_eval(one, false); }) == ErrorCode::InsufficientRecords);
  const DiagnosticIndex two(random_records(2, 4, 1, 1));
  CHECK(otomech::testing::error_code_of([&] { leave_one_out_eval(two, false, 0); }) == ErrorCode::InvalidArgument);
  CHECK(otomech::testing::error_code_of([&] { random_filtered_baseline(idx, false); }) == ErrorCode::EmptyIndex);
}

TEST_CASE("random baseline ignores embedding values") {
  auto recs = random_records(24, 6, 1, 31);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].diagnosis = diagnosis_label(i % 4);
  const auto base = random_filtered_baseline(DiagnosticIndex(recs), false);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0, 1);
  for (int t = 0; t < 5; ++t) {
    for (auto& r : recs)
      for (auto& v : r.embedding.values) v = g(rng);
    CHECK(random_filtered_baseline(DiagnosticIndex(recs), false) == base);
  }
}
