#include "otomech/index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_set>

#include "binary_io.hpp"
#include "otomech/error.hpp"
#include "otomech/simd/kernels.hpp"

namespace otomech {

std::string_view to_string(Location l) {
  switch (l) {
    case Location::Front: return "front";
    case Location::Rear: return "rear";
    case Location::Wheels: return "wheels";
    case Location::NotSure: return "not_sure";
  }
  return "not_sure";
}

std::string_view to_string(Timing t) {
  switch (t) {
    case Timing::Starting: return "starting";
    case Timing::Idling: return "idling";
    case Timing::Driving: return "driving";
    case Timing::Braking: return "braking";
    case Timing::Turning: return "turning";
    case Timing::NotSure: return "not_sure";
  }
  return "not_sure";
}

std::optional<Location> parse_location(std::string_view s) {
  for (Location l : kAllLocations)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

std::optional<Timing> parse_timing(std::string_view s) {
  for (Timing t : kAllTimings)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

std::string_view display_label(Location l) {
  switch (l) {
    case Location::Front: return "Front of the vehicle";
    case Location::Rear: return "Rear of the vehicle";
    case Location::Wheels: return "Wheels";
    case Location::NotSure: return "Not sure";
  }
  return "Not sure";
}

std::string_view display_label(Timing t) {
  switch (t) {
    case Timing::Starting: return "While starting the car";
    case Timing::Idling: return "While the engine is idling";
    case Timing::Driving: return "While driving";
    case Timing::Braking: return "While braking";
    case Timing::Turning: return "While turning";
    case Timing::NotSure: return "Not sure";
  }
  return "Not sure";
}

bool passes_filter(const ReferenceRecord& r, Location where, Timing when) {
  return (where == Location::NotSure || r.location == where) && (when == Timing::NotSure || r.timing == when);
}

std::vector<const ReferenceRecord*> metadata_filter(std::span<const ReferenceRecord> records, Location where,
                                                    Timing when) {
  std::vector<const ReferenceRecord*> out;
  for (const auto& r : records)
    if (passes_filter(r, where, when)) out.push_back(&r);
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::DimensionMismatch, "cannot compare vectors of dimension " + std::to_string(a.size()) +
                                                  " and " + std::to_string(b.size()));
  const auto t = simd::cosine_terms(a, b);
  const double na = std::sqrt(t.norm_sq_a);
  const double nb = std::sqrt(t.norm_sq_b);
  if (na < 1e-12 || nb < 1e-12) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  return std::clamp(t.dot / (na * nb), -1.0, 1.0);
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.embedder_id != b.embedder_id)
    throw Error(ErrorCode::EmbedderMismatch,
                "embeddings come from different embedders ('" + a.embedder_id + "' vs '" + b.embedder_id + "')");
  return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

double confidence(double similarity, const CalibrationStats& stats) {
  const double range = stats.max_sim - stats.min_sim;
  if (!(range > 0.0)) return 0.5;
  return std::clamp(0.5 + (similarity - stats.mean_sim) / range, 0.0, 1.0);
}

std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size() * 3);
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::string search_url(std::string_view search_terms) {
  return std::string(kSearchUrlPrefix) + percent_encode(search_terms);
}

std::vector<Match> rank_top_k(const Embedding& query, std::span<const ReferenceRecord* const> candidates,
                              std::size_t k, const CalibrationStats& stats) {
  struct Scored {
    const ReferenceRecord* record;
    double similarity;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (const ReferenceRecord* r : candidates) scored.push_back({r, cosine_similarity(query, r->embedding)});

  const auto better = [](const Scored& a, const Scored& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.record->id < b.record->id;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);

  std::vector<Match> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = scored[i];
    out.push_back(Match{s.record->id, s.record->diagnosis, s.similarity, confidence(s.similarity, stats),
                        search_url(s.record->search_terms), i + 1});
  }
  return out;
}

CalibrationStats compute_calibration(std::span<const Embedding> embeddings) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw Error(ErrorCode::InsufficientRecords, "calibration needs at least two records");
  CalibrationStats s;
  s.min_sim = std::numeric_limits<double>::infinity();
  s.max_sim = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sim = cosine_similarity(embeddings[i], embeddings[j]);
      sum += sim;
      s.min_sim = std::min(s.min_sim, sim);
      s.max_sim = std::max(s.max_sim, sim);
      ++s.pair_count;
    }
  }
  s.mean_sim = std::clamp(sum / static_cast<double>(s.pair_count), s.min_sim, s.max_sim);
  return s;
}

CalibrationStats compute_calibration(std::span<const ReferenceRecord> records) {
  std::vector<Embedding> e;
  e.reserve(records.size());
  for (const auto& r : records) e.push_back(r.embedding);
  return compute_calibration(e);
}

// ---------------------------------------------------------------------------

DiagnosticIndex::DiagnosticIndex(std::vector<ReferenceRecord> records) : records_(std::move(records)) {
  validate();
  if (records_.size() >= 2) stats_ = compute_calibration(std::span<const ReferenceRecord>(records_));
}

DiagnosticIndex::DiagnosticIndex(std::vector<ReferenceRecord> records, CalibrationStats stats)
    : records_(std::move(records)), stats_(stats) {
  validate();
}

void DiagnosticIndex::validate() {
  std::unordered_set<std::string> ids;
  for (const auto& r : records_) {
    if (!ids.insert(r.id).second) throw Error(ErrorCode::DuplicateId, "duplicate record id '" + r.id + "'");
    if (r.location == Location::NotSure || r.timing == Timing::NotSure)
      throw Error(ErrorCode::InvalidEnum, "record '" + r.id + "' uses not_sure, which is query-only");
    if (r.diagnosis.empty()) throw Error(ErrorCode::InvalidArgument, "record '" + r.id + "' has no diagnosis");
    for (double v : r.embedding.values)
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "record '" + r.id + "' has a non-finite embedding");
  }
  if (records_.empty()) return;
  embedder_id_ = records_.front().embedding.embedder_id;
  dimension_ = records_.front().embedding.dimension();
  for (const auto& r : records_) {
    if (r.embedding.embedder_id != embedder_id_)
      throw Error(ErrorCode::EmbedderMismatch, "record '" + r.id + "' was embedded by '" +
                                                   r.embedding.embedder_id + "', index uses '" + embedder_id_ + "'");
    if (r.embedding.dimension() != dimension_)
      throw Error(ErrorCode::DimensionMismatch, "record '" + r.id + "' has embedding dimension " +
                                                    std::to_string(r.embedding.dimension()));
  }
}

const ReferenceRecord* DiagnosticIndex::find(std::string_view id) const {
  for (const auto& r : records_)
    if (r.id == id) return &r;
  return nullptr;
}

std::size_t DiagnosticIndex::diagnosis_count() const {
  std::set<std::string_view> labels;
  for (const auto& r : records_) labels.insert(r.diagnosis);
  return labels.size();
}

QueryResult DiagnosticIndex::query(const Embedding& q, Location where, Timing when, std::size_t k) const {
  if (records_.empty()) throw Error(ErrorCode::EmptyIndex, "the index holds no records");
  if (q.embedder_id != embedder_id_)
    throw Error(ErrorCode::EmbedderMismatch,
                "query embedded by '" + q.embedder_id + "' but the index uses '" + embedder_id_ + "'");
  QueryResult result;
  auto candidates = metadata_filter(records_, where, when);
  if (candidates.empty()) {
    candidates = metadata_filter(records_, Location::NotSure, Timing::NotSure);
    result.fallback = true;
  }
  result.matches = rank_top_k(q, candidates, k, stats_);
  return result;
}

// Layout (little-endian), see docs/formats.md:
//   "OTIX" u32 version | str embedder_id | u32 dim | u64 count
//   f64 mean f64 min f64 max u64 pairs
//   count x { str id, str diagnosis, u8 location, u8 timing, str source_title,
//             str source_url, f64 excerpt_start_s, str search_terms,
//             str audio_path, dim x f64 }
//   u64 FNV-1a of everything above
std::vector<std::uint8_t> DiagnosticIndex::serialize() const {
  detail::ByteWriter w;
  w.tag("OTIX");
  w.u32(kFormatVersion);
  w.str(embedder_id_);
  w.u32(static_cast<std::uint32_t>(dimension_));
  w.u64(records_.size());
  w.f64(stats_.mean_sim);
  w.f64(stats_.min_sim);
  w.f64(stats_.max_sim);
  w.u64(stats_.pair_count);
  for (const auto& r : records_) {
    w.str(r.id);
    w.str(r.diagnosis);
    w.u8(static_cast<std::uint8_t>(r.location));
    w.u8(static_cast<std::uint8_t>(r.timing));
    w.str(r.source_title);
    w.str(r.source_url);
    w.f64(r.excerpt_start_s);
    w.str(r.search_terms);
    w.str(r.audio_path);
    for (double v : r.embedding.values) w.f64(v);
  }
  w.u64(detail::fnv1a64(w.bytes()));
  return w.take();
}

DiagnosticIndex DiagnosticIndex::parse(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::CorruptStream);
  if (r.tag() != "OTIX") throw Error(ErrorCode::UnsupportedFormat, "not a diagnostic index file");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw Error(ErrorCode::UnsupportedFormat, "unsupported index version " + std::to_string(version));
  const std::string embedder_id = r.str();
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  CalibrationStats stats;
  stats.mean_sim = r.f64();
  stats.min_sim = r.f64();
  stats.max_sim = r.f64();
  stats.pair_count = r.u64();

  std::vector<ReferenceRecord> records;
  for (std::uint64_t i = 0; i < count; ++i) {
    ReferenceRecord rec;
    rec.id = r.str();
    rec.diagnosis = r.str();
    const std::uint8_t loc = r.u8();
    const std::uint8_t tim = r.u8();
    if (loc > static_cast<std::uint8_t>(Location::NotSure) || tim > static_cast<std::uint8_t>(Timing::NotSure))
      throw Error(ErrorCode::CorruptStream, "record '" + rec.id + "' has an out-of-range enum");
    rec.location = static_cast<Location>(loc);
    rec.timing = static_cast<Timing>(tim);
    rec.source_title = r.str();
    rec.source_url = r.str();
    rec.excerpt_start_s = r.f64();
    rec.search_terms = r.str();
    rec.audio_path = r.str();
    rec.embedding.embedder_id = embedder_id;
    rec.embedding.values.resize(dim);
    for (double& v : rec.embedding.values) v = r.f64();
    records.push_back(std::move(rec));
  }
  const std::size_t body = r.position();
  if (r.u64() != detail::fnv1a64(bytes.first(body)))
    throw Error(ErrorCode::CorruptStream, "index checksum mismatch");
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptStream, "trailing bytes after index");

  DiagnosticIndex index(std::move(records), stats);
  if (index.size() == 0) index.embedder_id_ = embedder_id, index.dimension_ = dim;
  return index;
}

DiagnosticIndex DiagnosticIndex::load(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse(bytes);
}

void DiagnosticIndex::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace otomech
