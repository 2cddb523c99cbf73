#include "otomech/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "otomech/error.hpp"
#include "otomech/simd/kernels.hpp"

namespace otomech {

Embedding mean_embedding(std::vector<std::vector<double>> slice_vectors, std::string embedder_id) {
  if (slice_vectors.empty()) throw Error(ErrorCode::TooShort, "no slices to aggregate");
  const std::size_t dim = slice_vectors.front().size();
  for (const auto& v : slice_vectors)
    if (v.size() != dim) throw Error(ErrorCode::DimensionMismatch, "slice vectors differ in length");

  std::sort(slice_vectors.begin(), slice_vectors.end());
  Embedding e;
  e.embedder_id = std::move(embedder_id);
  e.values.assign(dim, 0.0);
  for (const auto& v : slice_vectors)
    for (std::size_t i = 0; i < dim; ++i) e.values[i] += v[i];
  const double n = static_cast<double>(slice_vectors.size());
  for (double& x : e.values) x /= n;
  return e;
}

Embedding embed_recording(const Waveform& w, const Embedder& embedder, const LogMelFrontend& frontend) {
  const auto slices = slice_960ms(w);
  std::vector<std::vector<double>> vectors;
  vectors.reserve(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i) {
    auto v = embedder.embed_slice(frontend.log_mel_patch(slices[i], i));
    if (v.size() != embedder.dimension())
      throw Error(ErrorCode::DimensionMismatch, "embedder '" + embedder.id() + "' returned " +
                                                    std::to_string(v.size()) + " values");
    vectors.push_back(std::move(v));
  }
  return mean_embedding(std::move(vectors), embedder.id());
}

// ---------------------------------------------------------------------------

std::string reference_embedder_id(std::uint64_t seed, std::size_t dimension) {
  return "reference-projection/v1;seed=" + std::to_string(seed) + ";dim=" + std::to_string(dimension);
}

std::optional<ReferenceEmbedderParams> parse_reference_embedder_id(const std::string& id) {
  constexpr std::string_view prefix = "reference-projection/v1;seed=";
  if (!id.starts_with(prefix)) return std::nullopt;
  std::istringstream in(id.substr(prefix.size()));
  ReferenceEmbedderParams p;
  std::string rest;
  if (!(in >> p.seed)) return std::nullopt;
  std::getline(in, rest);
  if (!rest.starts_with(";dim=")) return std::nullopt;
  try {
    std::size_t used = 0;
    p.dimension = std::stoul(rest.substr(5), &used);
    if (used != rest.size() - 5) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (reference_embedder_id(p.seed, p.dimension) != id) return std::nullopt;
  return p;
}

ReferenceEmbedder::ReferenceEmbedder(std::uint64_t seed, std::size_t dimension)
    : seed_(seed), dimension_(dimension), id_(reference_embedder_id(seed, dimension)) {
  if (dimension < 8) throw Error(ErrorCode::InvalidArgument, "reference embedder dimension must be >= 8");
  // mt19937_64 output is fully specified by the standard, so the matrix is
  // identical on every platform. Entries are uniform on [-a, a) with unit
  // variance per output for a unit-variance patch.
  std::mt19937_64 rng(seed);
  const double a = std::sqrt(3.0 / mel::kPatchSize);
  projection_.resize(dimension * mel::kPatchSize);
  for (float& x : projection_) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = static_cast<float>((2.0 * u - 1.0) * a);
  }
}

std::vector<double> ReferenceEmbedder::embed_slice(const MelPatch& patch) const {
  std::vector<float> out(dimension_);
  simd::active_kernels().matvec_f32(projection_.data(), patch.values.data(), out.data(), dimension_,
                                    mel::kPatchSize);
  return {out.begin(), out.end()};
}

std::shared_ptr<const ReferenceEmbedder> reference_embedder(std::uint64_t seed, std::size_t dimension) {
  return std::make_shared<const ReferenceEmbedder>(seed, dimension);
}

// ---------------------------------------------------------------------------

SidecarEmbeddings::SidecarEmbeddings(std::string embedder_id, std::size_t dimension)
    : embedder_id_(std::move(embedder_id)), dimension_(dimension) {
  if (dimension == 0) throw Error(ErrorCode::InvalidArgument, "sidecar dimension must be positive");
}

void SidecarEmbeddings::add(const std::string& record_id, std::vector<double> values) {
  if (values.size() != dimension_)
    throw Error(ErrorCode::DimensionMismatch, "sidecar vector for '" + record_id + "' has " +
                                                  std::to_string(values.size()) + " values, expected " +
                                                  std::to_string(dimension_));
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite value for '" + record_id + "'");
  if (!vectors_.emplace(record_id, std::move(values)).second)
    throw Error(ErrorCode::DuplicateId, "sidecar lists '" + record_id + "' twice");
}

Embedding SidecarEmbeddings::lookup(const std::string& record_id) const {
  const auto it = vectors_.find(record_id);
  if (it == vectors_.end())
    throw Error(ErrorCode::MissingEmbedding, "sidecar has no embedding for record '" + record_id + "'");
  return Embedding{it->second, embedder_id_};
}

void SidecarEmbeddings::require_coverage(std::span<const std::string> record_ids) const {
  for (const auto& id : record_ids)
    if (!contains(id))
      throw Error(ErrorCode::MissingEmbedding, "sidecar has no embedding for record '" + id + "'");
}

std::vector<std::uint8_t> SidecarEmbeddings::serialize() const {
  detail::ByteWriter w;
  w.tag("OTSE");
  w.u32(kFormatVersion);
  w.str(embedder_id_);
  w.u32(static_cast<std::uint32_t>(dimension_));
  w.u64(vectors_.size());
  for (const auto& [id, values] : vectors_) {
    w.str(id);
    w.u32(static_cast<std::uint32_t>(values.size()));
    for (double v : values) w.f64(v);
  }
  w.u64(detail::fnv1a64(w.bytes()));
  return w.take();
}

SidecarEmbeddings SidecarEmbeddings::parse(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::CorruptStream);
  if (r.tag() != "OTSE") throw Error(ErrorCode::UnsupportedFormat, "not a sidecar embedding file");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw Error(ErrorCode::UnsupportedFormat, "unsupported sidecar version " + std::to_string(version));
  std::string embedder_id = r.str();
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  SidecarEmbeddings s(std::move(embedder_id), dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = r.str();
    const std::uint32_t n = r.u32();
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    s.add(id, std::move(values));
  }
  const std::size_t body = r.position();
  if (r.u64() != detail::fnv1a64(bytes.first(body)))
    throw Error(ErrorCode::CorruptStream, "sidecar checksum mismatch");
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptStream, "trailing bytes after sidecar");
  return s;
}

SidecarEmbeddings SidecarEmbeddings::read(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse(bytes);
}

void SidecarEmbeddings::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace otomech
