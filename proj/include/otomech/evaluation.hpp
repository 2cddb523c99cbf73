#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "otomech/index.hpp"

namespace otomech {

struct DiagnosisTally {
  std::size_t correct = 0;  // top-1 hits
  std::size_t total = 0;
  friend bool operator==(const DiagnosisTally&, const DiagnosisTally&) = default;
};

// Leave-one-out retrieval accuracy over an index.
struct EvalReport {
  double top1_accuracy = 0.0;
  double top3_accuracy = 0.0;  // top-k for the report's k (3 unless overridden)
  std::size_t k = kDefaultTopK;
  std::size_t n_queries = 0;
  bool use_metadata = false;
  // Queries whose own where/when filter left no other record; scored as misses.
  std::size_t empty_pool_queries = 0;
  std::map<std::string, DiagnosisTally> per_diagnosis;
  std::string embedder_id;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Every record in turn is the query; candidates are all other records,
// optionally restricted to the query's own location/timing.
EvalReport leave_one_out_eval(const DiagnosticIndex& index, bool use_metadata, std::size_t k = kDefaultTopK);

// Analytic accuracy of answering with the diagnosis of a uniformly random
// candidate recording.
struct RandomBaseline {
  bool use_metadata = false;
  std::size_t n_queries = 0;
  // Candidates exclude the query recording (same protocol as leave-one-out).
  double expected_accuracy = 0.0;
  // Candidates include the query recording itself.
  double self_included_accuracy = 0.0;
  // Queries with no candidate once the query is excluded; they count as 0.
  std::size_t empty_pool_queries = 0;

  friend bool operator==(const RandomBaseline&, const RandomBaseline&) = default;
};

RandomBaseline random_filtered_baseline(const DiagnosticIndex& index, bool use_metadata);

// 1 / (number of distinct diagnoses): a uniform guess over labels.
double label_uniform_baseline(const DiagnosticIndex& index);

enum class ReportFormat { Text, Json };
std::optional<ReportFormat> parse_report_format(std::string_view s);

// Accuracy as a percentage with one decimal, e.g. 0.587 -> "58.7".
std::string format_percent(double fraction);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RandomBaseline& b);
RandomBaseline random_baseline_from_json(const nlohmann::json& j);

std::string emit_report(const EvalReport& report, ReportFormat format);

// All accuracy experiments over one index, rendered as a single table.
struct EvaluationSummary {
  std::string embedder_id;
  std::size_t records = 0;
  std::size_t diagnoses = 0;
  double label_uniform = 0.0;
  RandomBaseline random_unfiltered;
  RandomBaseline random_filtered;
  std::optional<EvalReport> without_metadata;
  std::optional<EvalReport> with_metadata;
};

EvaluationSummary evaluate_index(const DiagnosticIndex& index, bool with_metadata, bool without_metadata,
                                 std::size_t k = kDefaultTopK);
std::string emit_summary(const EvaluationSummary& summary, ReportFormat format);

}  // namespace otomech
