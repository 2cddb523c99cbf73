#include "otomech/evaluation.hpp"

#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "otomech/error.hpp"

namespace otomech {

using nlohmann::json;

EvalReport leave_one_out_eval(const DiagnosticIndex& index, bool use_metadata, std::size_t k) {
  const auto records = index.records();
  if (records.size() < 2) throw Error(ErrorCode::InsufficientRecords, "leave-one-out needs at least two records");
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");

  EvalReport report;
  report.k = k;
  report.use_metadata = use_metadata;
  report.n_queries = records.size();
  report.embedder_id = index.embedder_id();

  std::size_t top1 = 0, topk = 0;
  std::vector<const ReferenceRecord*> candidates;
  candidates.reserve(records.size());
  for (const auto& q : records) {
    candidates.clear();
    for (const auto& r : records) {
      if (&r == &q) continue;
      if (use_metadata && !passes_filter(r, q.location, q.timing)) continue;
      candidates.push_back(&r);
    }
    auto& tally = report.per_diagnosis[q.diagnosis];
    ++tally.total;
    if (candidates.empty()) {
      ++report.empty_pool_queries;
      continue;
    }
    const auto matches = rank_top_k(q.embedding, candidates, k, index.calibration());
    if (matches.front().diagnosis == q.diagnosis) {
      ++top1;
      ++tally.correct;
    }
    for (const auto& m : matches)
      if (m.diagnosis == q.diagnosis) {
        ++topk;
        break;
      }
  }
  const double n = static_cast<double>(records.size());
  report.top1_accuracy = top1 / n;
  report.top3_accuracy = topk / n;
  return report;
}

RandomBaseline random_filtered_baseline(const DiagnosticIndex& index, bool use_metadata) {
  const auto records = index.records();
  if (records.empty()) throw Error(ErrorCode::EmptyIndex, "the index holds no records");
  RandomBaseline b;
  b.use_metadata = use_metadata;
  b.n_queries = records.size();
  double excluded_sum = 0.0, included_sum = 0.0;
  for (const auto& q : records) {
    std::size_t pool = 0, same = 0;
    for (const auto& r : records) {
      if (&r == &q) continue;
      if (use_metadata && !passes_filter(r, q.location, q.timing)) continue;
      ++pool;
      if (r.diagnosis == q.diagnosis) ++same;
    }
    if (pool == 0) ++b.empty_pool_queries;
    else excluded_sum += static_cast<double>(same) / pool;
    included_sum += static_cast<double>(same + 1) / (pool + 1);
  }
  b.expected_accuracy = excluded_sum / records.size();
  b.self_included_accuracy = included_sum / records.size();
  return b;
}

double label_uniform_baseline(const DiagnosticIndex& index) {
  const std::size_t labels = index.diagnosis_count();
  if (labels == 0) throw Error(ErrorCode::EmptyIndex, "the index holds no records");
  return 1.0 / static_cast<double>(labels);
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "text" || s == "table") return ReportFormat::Text;
  if (s == "json") return ReportFormat::Json;
  return std::nullopt;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

json to_json(const EvalReport& r) {
  json breakdown = json::object();
  for (const auto& [label, t] : r.per_diagnosis) breakdown[label] = {{"correct", t.correct}, {"total", t.total}};
  return {
      {"top1_accuracy", r.top1_accuracy},
      {"top3_accuracy", r.top3_accuracy},
      {"k", r.k},
      {"n_queries", r.n_queries},
      {"use_metadata", r.use_metadata},
      {"empty_pool_queries", r.empty_pool_queries},
      {"per_diagnosis_breakdown", breakdown},
      {"embedder_id", r.embedder_id},
  };
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.top1_accuracy = j.at("top1_accuracy").get<double>();
  r.top3_accuracy = j.at("top3_accuracy").get<double>();
  r.k = j.at("k").get<std::size_t>();
  r.n_queries = j.at("n_queries").get<std::size_t>();
  r.use_metadata = j.at("use_metadata").get<bool>();
  r.empty_pool_queries = j.at("empty_pool_queries").get<std::size_t>();
  for (const auto& [label, t] : j.at("per_diagnosis_breakdown").items())
    r.per_diagnosis[label] = {t.at("correct").get<std::size_t>(), t.at("total").get<std::size_t>()};
  r.embedder_id = j.at("embedder_id").get<std::string>();
  return r;
}

json to_json(const RandomBaseline& b) {
  return {
      {"use_metadata", b.use_metadata},
      {"n_queries", b.n_queries},
      {"expected_accuracy", b.expected_accuracy},
      {"self_included_accuracy", b.self_included_accuracy},
      {"empty_pool_queries", b.empty_pool_queries},
  };
}

RandomBaseline random_baseline_from_json(const json& j) {
  RandomBaseline b;
  b.use_metadata = j.at("use_metadata").get<bool>();
  b.n_queries = j.at("n_queries").get<std::size_t>();
  b.expected_accuracy = j.at("expected_accuracy").get<double>();
  b.self_included_accuracy = j.at("self_included_accuracy").get<double>();
  b.empty_pool_queries = j.at("empty_pool_queries").get<std::size_t>();
  return b;
}

namespace {

class TextTable {
 public:
  void row(std::string label, std::string value) { rows_.emplace_back(std::move(label), std::move(value)); }
  std::string render(std::string_view left_header, std::string_view right_header) const {
    std::size_t width = left_header.size();
    for (const auto& [l, v] : rows_) width = std::max(width, l.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << left_header << " | " << right_header << '\n';
    out << std::string(width, '-') << "-+-" << std::string(right_header.size(), '-') << '\n';
    for (const auto& [l, v] : rows_)
      out << std::left << std::setw(static_cast<int>(width)) << l << " | " << std::right
          << std::setw(static_cast<int>(right_header.size())) << v << '\n';
    return out.str();
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

std::string metadata_phrase(bool use_metadata) {
  return use_metadata ? "with time and location" : "no time or location";
}

void append_breakdown(std::ostringstream& out, const EvalReport& r) {
  TextTable t;
  for (const auto& [label, tally] : r.per_diagnosis)
    t.row(label, std::to_string(tally.correct) + "/" + std::to_string(tally.total));
  out << "\nTop-1 hits by diagnosis (" << metadata_phrase(r.use_metadata) << ")\n"
      << t.render("Diagnosis", "Correct/Total");
}

}  // namespace

std::string emit_report(const EvalReport& r, ReportFormat format) {
  if (format == ReportFormat::Json) return to_json(r).dump(2) + "\n";
  TextTable t;
  t.row("Top-1 (" + metadata_phrase(r.use_metadata) + ")", format_percent(r.top1_accuracy));
  t.row("Top-" + std::to_string(r.k) + " (" + metadata_phrase(r.use_metadata) + ")", format_percent(r.top3_accuracy));
  std::ostringstream out;
  out << t.render("Metric", "Accuracy (%)");
  out << "queries: " << r.n_queries << ", empty candidate pools: " << r.empty_pool_queries
      << ", embedder: " << r.embedder_id << '\n';
  append_breakdown(out, r);
  return out.str();
}

EvaluationSummary evaluate_index(const DiagnosticIndex& index, bool with_metadata, bool without_metadata,
                                 std::size_t k) {
  EvaluationSummary s;
  s.embedder_id = index.embedder_id();
  s.records = index.size();
  s.diagnoses = index.diagnosis_count();
  s.label_uniform = label_uniform_baseline(index);
  s.random_unfiltered = random_filtered_baseline(index, false);
  s.random_filtered = random_filtered_baseline(index, true);
  if (without_metadata) s.without_metadata = leave_one_out_eval(index, false, k);
  if (with_metadata) s.with_metadata = leave_one_out_eval(index, true, k);
  return s;
}

std::string emit_summary(const EvaluationSummary& s, ReportFormat format) {
  if (format == ReportFormat::Json) {
    json j = {
        {"embedder_id", s.embedder_id},
        {"records", s.records},
        {"diagnoses", s.diagnoses},
        {"label_uniform_accuracy", s.label_uniform},
        {"random_unfiltered", to_json(s.random_unfiltered)},
        {"random_filtered", to_json(s.random_filtered)},
        {"without_metadata", s.without_metadata ? to_json(*s.without_metadata) : json(nullptr)},
        {"with_metadata", s.with_metadata ? to_json(*s.with_metadata) : json(nullptr)},
    };
    return j.dump(2) + "\n";
  }

  TextTable t;
  t.row("Random (uniform over diagnoses)", format_percent(s.label_uniform));
  t.row("Random (uniform over other recordings)", format_percent(s.random_unfiltered.expected_accuracy));
  if (s.without_metadata) {
    t.row("Retrieval top-1 (no time or location information)", format_percent(s.without_metadata->top1_accuracy));
    t.row("Retrieval top-" + std::to_string(s.without_metadata->k) + " (no time or location information)",
          format_percent(s.without_metadata->top3_accuracy));
  }
  t.row("Random (with time and location information)", format_percent(s.random_filtered.expected_accuracy));
  t.row("Random (with time and location, query kept in pool)",
        format_percent(s.random_filtered.self_included_accuracy));
  if (s.with_metadata) {
    t.row("Retrieval top-1 (with time and location information)", format_percent(s.with_metadata->top1_accuracy));
    t.row("Retrieval top-" + std::to_string(s.with_metadata->k) + " (with time and location information)",
          format_percent(s.with_metadata->top3_accuracy));
  }
  std::ostringstream out;
  out << t.render("Diagnostic method", "Accuracy (%)");
  out << s.records << " records, " << s.diagnoses << " diagnoses, embedder " << s.embedder_id << '\n';
  if (s.random_filtered.empty_pool_queries)
    out << "queries with an empty filtered pool: " << s.random_filtered.empty_pool_queries << '\n';
  if (s.without_metadata) append_breakdown(out, *s.without_metadata);
  if (s.with_metadata) append_breakdown(out, *s.with_metadata);
  return out.str();
}

}  // namespace otomech
