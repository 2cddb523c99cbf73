#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otomech/embedding.hpp"

namespace otomech {

enum class Location : std::uint8_t { Front = 0, Rear = 1, Wheels = 2, NotSure = 3 };
enum class Timing : std::uint8_t { Starting = 0, Idling = 1, Driving = 2, Braking = 3, Turning = 4, NotSure = 5 };

inline constexpr Location kAllLocations[] = {Location::Front, Location::Rear, Location::Wheels, Location::NotSure};
inline constexpr Timing kAllTimings[] = {Timing::Starting, Timing::Idling, Timing::Driving,
                                         Timing::Braking, Timing::Turning, Timing::NotSure};

// Wire spellings: front, rear, wheels, not_sure / starting, idling, ...
std::string_view to_string(Location l);
std::string_view to_string(Timing t);
std::optional<Location> parse_location(std::string_view s);
std::optional<Timing> parse_timing(std::string_view s);
// Human-facing wording for the UI.
std::string_view display_label(Location l);
std::string_view display_label(Timing t);

struct ReferenceRecord {
  std::string id;
  std::string diagnosis;
  Location location = Location::Front;
  Timing timing = Timing::Starting;
  Embedding embedding;
  std::string source_url;
  std::string source_title;
  double excerpt_start_s = 0.0;
  std::string search_terms;
  // Absolute path of the excerpt the embedding was computed from.
  std::string audio_path;

  friend bool operator==(const ReferenceRecord&, const ReferenceRecord&) = default;
};

struct CalibrationStats {
  double mean_sim = 0.0;
  double min_sim = 0.0;
  double max_sim = 0.0;
  std::uint64_t pair_count = 0;

  friend bool operator==(const CalibrationStats&, const CalibrationStats&) = default;
};

struct Match {
  std::string record_id;
  std::string diagnosis;
  double similarity = 0.0;
  double confidence = 0.0;
  std::string search_url;
  std::size_t rank = 0;
};

struct QueryResult {
  std::vector<Match> matches;
  // The where/when filter removed every record and ranking ran unfiltered.
  bool fallback = false;
};

inline constexpr std::size_t kDefaultTopK = 3;
inline constexpr std::string_view kSearchUrlPrefix = "https://www.google.com/search?q=";

bool passes_filter(const ReferenceRecord& r, Location where, Timing when);
std::vector<const ReferenceRecord*> metadata_filter(std::span<const ReferenceRecord> records, Location where,
                                                    Timing when);

// Throws DimensionMismatch, EmbedderMismatch or ZeroVector (norm < 1e-12).
double cosine_similarity(const Embedding& a, const Embedding& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Top min(k, |candidates|) by similarity descending, ties by ascending id.
// Throws EmbedderMismatch if any candidate came from a different embedder.
std::vector<Match> rank_top_k(const Embedding& query, std::span<const ReferenceRecord* const> candidates,
                              std::size_t k, const CalibrationStats& stats);

// Statistics over all unordered pairs i < j. Throws InsufficientRecords for n < 2.
CalibrationStats compute_calibration(std::span<const ReferenceRecord> records);
CalibrationStats compute_calibration(std::span<const Embedding> embeddings);

// clamp(0.5 + (s - mean) / (max - min), 0, 1); 0.5 when max == min.
double confidence(double similarity, const CalibrationStats& stats);

std::string percent_encode(std::string_view s);
std::string search_url(std::string_view search_terms);

// Immutable record store with its calibration statistics.
class DiagnosticIndex {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  // Validates unique ids and a single embedder identity/dimension, then
  // computes calibration (degenerate all-zero stats below two records).
  explicit DiagnosticIndex(std::vector<ReferenceRecord> records);
  DiagnosticIndex(std::vector<ReferenceRecord> records, CalibrationStats stats);

  static DiagnosticIndex parse(std::span<const std::uint8_t> bytes);
  static DiagnosticIndex load(const std::filesystem::path& path);
  std::vector<std::uint8_t> serialize() const;
  void save(const std::filesystem::path& path) const;

  std::span<const ReferenceRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const std::string& embedder_id() const { return embedder_id_; }
  std::size_t dimension() const { return dimension_; }
  const CalibrationStats& calibration() const { return stats_; }
  const ReferenceRecord* find(std::string_view id) const;
  std::size_t diagnosis_count() const;

  // metadata_filter -> rank_top_k, re-ranking over every record (flagged
  // fallback) when the filter leaves nothing. Throws EmptyIndex.
  QueryResult query(const Embedding& query, Location where = Location::NotSure,
                    Timing when = Timing::NotSure, std::size_t k = kDefaultTopK) const;

 private:
  void validate();

  std::vector<ReferenceRecord> records_;
  std::string embedder_id_;
  std::size_t dimension_ = 0;
  CalibrationStats stats_;
};

}  // namespace otomech
