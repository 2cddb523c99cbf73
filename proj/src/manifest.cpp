#include "otomech/manifest.hpp"

#include <atomic>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "otomech/audio.hpp"

namespace otomech {
namespace {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

std::vector<CsvRecord> split_csv(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<CsvRecord> out;
  CsvRecord cur;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  cur.line = 1;

  const auto end_record = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    const bool blank = cur.fields.size() == 1 && cur.fields[0].empty() && !field_started;
    if (!blank) out.push_back(std::move(cur));
    cur = CsvRecord{};
    field_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line) + ": stray quote inside field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        cur.fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        cur.line = ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(cur.line) + ": unterminated quote");
  if (field_started || !field.empty() || !cur.fields.empty()) end_record();
  return out;
}

bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos ||
         (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

void append_field(std::string& out, std::string_view s) {
  if (!needs_quotes(s)) {
    out += s;
    return;
  }
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<ManifestRow> parse_manifest(std::string_view text) {
  const auto records = split_csv(text);
  if (records.empty()) throw Error(ErrorCode::MalformedRow, "manifest is empty (header row required)");

  const auto& header = records.front().fields;
  std::array<std::size_t, kManifestColumns.size()> col{};
  for (std::size_t c = 0; c < kManifestColumns.size(); ++c) {
    std::optional<std::size_t> found;
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == kManifestColumns[c]) found = h;
    if (!found)
      throw Error(ErrorCode::MalformedRow, "line 1: header lacks column '" + std::string(kManifestColumns[c]) + "'");
    col[c] = *found;
  }

  std::vector<ManifestRow> rows;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::string where = "line " + std::to_string(rec.line) + ": ";
    if (rec.fields.size() != header.size())
      throw Error(ErrorCode::MalformedRow, where + "expected " + std::to_string(header.size()) + " columns, found " +
                                               std::to_string(rec.fields.size()));
    const auto f = [&](std::size_t c) -> const std::string& { return rec.fields[col[c]]; };

    ManifestRow row;
    row.id = f(0);
    row.audio_path = f(1);
    row.diagnosis = f(2);
    if (row.id.empty()) throw Error(ErrorCode::MalformedRow, where + "empty id");
    if (row.audio_path.empty()) throw Error(ErrorCode::MalformedRow, where + "empty audio_path");
    if (row.diagnosis.empty()) throw Error(ErrorCode::MalformedRow, where + "empty diagnosis");

    const auto loc = parse_location(f(3));
    if (!loc || *loc == Location::NotSure)
      throw Error(ErrorCode::InvalidEnum, where + "invalid location '" + f(3) + "'");
    const auto tim = parse_timing(f(4));
    if (!tim || *tim == Timing::NotSure)
      throw Error(ErrorCode::InvalidEnum, where + "invalid timing '" + f(4) + "'");
    row.location = *loc;
    row.timing = *tim;

    row.source_title = f(5);
    row.source_url = f(6);
    const std::string& start = f(7);
    if (start.empty()) {
      row.excerpt_start_s = 0.0;
    } else {
      const auto res = std::from_chars(start.data(), start.data() + start.size(), row.excerpt_start_s);
      if (res.ec != std::errc{} || res.ptr != start.data() + start.size() || !(row.excerpt_start_s >= 0.0))
        throw Error(ErrorCode::MalformedRow, where + "excerpt_start_s '" + start + "' is not a non-negative number");
    }
    row.search_terms = f(8);

    if (!seen.insert(row.id).second) throw Error(ErrorCode::DuplicateId, where + "duplicate id '" + row.id + "'");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string write_manifest(std::span<const ManifestRow> rows) {
  std::string out;
  for (std::size_t c = 0; c < kManifestColumns.size(); ++c) {
    if (c) out.push_back(',');
    out += kManifestColumns[c];
  }
  out.push_back('\n');
  for (const auto& r : rows) {
    append_field(out, r.id);
    out.push_back(',');
    append_field(out, r.audio_path);
    out.push_back(',');
    append_field(out, r.diagnosis);
    out.push_back(',');
    out += to_string(r.location);
    out.push_back(',');
    out += to_string(r.timing);
    out.push_back(',');
    append_field(out, r.source_title);
    out.push_back(',');
    append_field(out, r.source_url);
    out.push_back(',');
    out += format_double(r.excerpt_start_s);
    out.push_back(',');
    append_field(out, r.search_terms);
    out.push_back('\n');
  }
  return out;
}

namespace {

std::string describe(const std::vector<RowFailure>& failures) {
  std::ostringstream msg;
  msg << "index build failed for " << failures.size() << " row(s):";
  for (const auto& f : failures) msg << "\n  " << f.row_id << ": " << error_code_name(f.code) << ": " << f.message;
  return msg.str();
}

}  // namespace

BuildError::BuildError(std::vector<RowFailure> failures)
    : Error(ErrorCode::BuildFailed, describe(failures)), failures_(std::move(failures)) {}

DiagnosticIndex build_index(std::span<const ManifestRow> rows, const std::filesystem::path& audio_root,
                            const RecordingEmbeddingSource& source, const BuildOptions& options) {
  std::vector<std::optional<ReferenceRecord>> built(rows.size());
  std::vector<std::optional<RowFailure>> failed(rows.size());

  const auto work = [&](std::size_t i) {
    const ManifestRow& row = rows[i];
    try {
      const std::filesystem::path path =
          std::filesystem::weakly_canonical(std::filesystem::absolute(audio_root / row.audio_path));
      const Waveform canonical = load_canonical_file(path);
      ReferenceRecord rec;
      rec.id = row.id;
      rec.diagnosis = row.diagnosis;
      rec.location = row.location;
      rec.timing = row.timing;
      rec.embedding = source.embed(row.id, canonical);
      rec.source_url = row.source_url;
      rec.source_title = row.source_title;
      rec.excerpt_start_s = row.excerpt_start_s;
      rec.search_terms = row.search_terms;
      rec.audio_path = path.string();
      built[i] = std::move(rec);
    } catch (const Error& e) {
      failed[i] = RowFailure{row.id, e.code(), e.what()};
    } catch (const std::exception& e) {
      failed[i] = RowFailure{row.id, ErrorCode::IoError, e.what()};
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, rows.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) work(i);
      });
  }

  std::vector<RowFailure> failures;
  for (auto& f : failed)
    if (f) failures.push_back(std::move(*f));
  if (!failures.empty()) throw BuildError(std::move(failures));

  std::vector<ReferenceRecord> records;
  records.reserve(rows.size());
  for (auto& r : built) records.push_back(std::move(*r));
  return DiagnosticIndex(std::move(records));
}

}  // namespace otomech
