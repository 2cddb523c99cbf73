#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otomech/audio.hpp"
#include "otomech/frontend.hpp"

namespace otomech {

// Recording-level feature vector plus the identity of whatever produced it.
struct Embedding {
  std::vector<double> values;
  std::string embedder_id;

  std::size_t dimension() const { return values.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

// Per-slice feature extractor. Implementations are immutable after
// construction and embed_slice must be deterministic.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual const std::string& id() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> embed_slice(const MelPatch& patch) const = 0;
};

// Element-wise mean of per-slice vectors. Vectors are summed in sorted
// order so the result is bit-identical under any permutation of the slices.
Embedding mean_embedding(std::vector<std::vector<double>> slice_vectors, std::string embedder_id);

// slice_960ms -> log_mel_patch -> embed_slice -> mean. `w` must be canonical.
Embedding embed_recording(const Waveform& w, const Embedder& embedder,
                          const LogMelFrontend& frontend = default_frontend());

inline constexpr std::size_t kDefaultReferenceDimension = 128;

// Deterministic stand-in for a trained network: a fixed pseudo-random linear
// projection of the flattened 96x64 patch, generated from `seed`.
class ReferenceEmbedder final : public Embedder {
 public:
  ReferenceEmbedder(std::uint64_t seed, std::size_t dimension = kDefaultReferenceDimension);

  const std::string& id() const override { return id_; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed_slice(const MelPatch& patch) const override;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::size_t dimension_;
  std::string id_;
  std::vector<float> projection_;  // dimension x kPatchSize, row-major
};

std::shared_ptr<const ReferenceEmbedder> reference_embedder(std::uint64_t seed,
                                                            std::size_t dimension = kDefaultReferenceDimension);

struct ReferenceEmbedderParams {
  std::uint64_t seed = 0;
  std::size_t dimension = 0;
};
std::string reference_embedder_id(std::uint64_t seed, std::size_t dimension);
// Inverse of reference_embedder_id; nullopt for ids of other embedders.
std::optional<ReferenceEmbedderParams> parse_reference_embedder_id(const std::string& id);

// Precomputed recording-level vectors keyed by record id (binary layout in
// docs/formats.md).
class SidecarEmbeddings {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  SidecarEmbeddings(std::string embedder_id, std::size_t dimension);

  static SidecarEmbeddings parse(std::span<const std::uint8_t> bytes);
  static SidecarEmbeddings read(const std::filesystem::path& path);
  std::vector<std::uint8_t> serialize() const;
  void write(const std::filesystem::path& path) const;

  // Throws DimensionMismatch if the vector length differs from dimension().
  void add(const std::string& record_id, std::vector<double> values);

  const std::string& embedder_id() const { return embedder_id_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& record_id) const { return vectors_.contains(record_id); }
  // Throws MissingEmbedding naming the id.
  Embedding lookup(const std::string& record_id) const;
  // Throws MissingEmbedding naming the first absent id.
  void require_coverage(std::span<const std::string> record_ids) const;

 private:
  std::string embedder_id_;
  std::size_t dimension_;
  std::map<std::string, std::vector<double>> vectors_;
};

// Produces the stored embedding for one reference record during index build:
// either by running an Embedder over the canonical audio or by looking the
// record up in a sidecar.
class RecordingEmbeddingSource {
 public:
  virtual ~RecordingEmbeddingSource() = default;
  virtual std::string embedder_id() const = 0;
  virtual Embedding embed(const std::string& record_id, const Waveform& canonical) const = 0;
};

class SliceEmbeddingSource final : public RecordingEmbeddingSource {
 public:
  explicit SliceEmbeddingSource(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder)) {}
  std::string embedder_id() const override { return embedder_->id(); }
  Embedding embed(const std::string&, const Waveform& canonical) const override {
    return embed_recording(canonical, *embedder_);
  }

 private:
  std::shared_ptr<const Embedder> embedder_;
};

class SidecarEmbeddingSource final : public RecordingEmbeddingSource {
 public:
  explicit SidecarEmbeddingSource(std::shared_ptr<const SidecarEmbeddings> sidecar)
      : sidecar_(std::move(sidecar)) {}
  std::string embedder_id() const override { return sidecar_->embedder_id(); }
  Embedding embed(const std::string& record_id, const Waveform&) const override {
    return sidecar_->lookup(record_id);
  }

 private:
  std::shared_ptr<const SidecarEmbeddings> sidecar_;
};

}  // namespace otomech
