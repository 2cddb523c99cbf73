#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otomech/embedding.hpp"
#include "otomech/error.hpp"
#include "otomech/index.hpp"

namespace otomech {

// One annotated reference recording, as listed in the dataset manifest.
struct ManifestRow {
  std::string id;
  std::string audio_path;
  std::string diagnosis;
  Location location = Location::Front;
  Timing timing = Timing::Starting;
  std::string source_title;
  std::string source_url;
  double excerpt_start_s = 0.0;
  std::string search_terms;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

inline constexpr std::array<std::string_view, 9> kManifestColumns = {
    "id", "audio_path", "diagnosis", "location", "timing",
    "source_title", "source_url", "excerpt_start_s", "search_terms",
};

// UTF-8 CSV with a mandatory header naming every column above (any order;
// extra columns are ignored). Errors carry the 1-based line number.
std::vector<ManifestRow> parse_manifest(std::string_view text);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
// Canonical writer: columns in kManifestColumns order, quoting only when needed.
std::string write_manifest(std::span<const ManifestRow> rows);

struct RowFailure {
  std::string row_id;
  ErrorCode code;
  std::string message;
};

class BuildError : public Error {
 public:
  explicit BuildError(std::vector<RowFailure> failures);
  const std::vector<RowFailure>& failures() const { return failures_; }

 private:
  std::vector<RowFailure> failures_;
};

struct BuildOptions {
  // 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

// decode -> resample -> peak-normalize -> embed for every row, in manifest
// order, then calibrate. All per-row failures are gathered into one
// BuildError.
DiagnosticIndex build_index(std::span<const ManifestRow> rows, const std::filesystem::path& audio_root,
                            const RecordingEmbeddingSource& source, const BuildOptions& options = {});

}  // namespace otomech
