#pragma once

// External-model adapter: runs a small feed-forward network (conv2d /
// maxpool2d / flatten / dense) described by a JSON descriptor plus a raw
// float32 weight blob. This is enough to express VGGish; the descriptor
// names which layer outputs form the embedding and how they are combined.
// Layout is documented in docs/formats.md.

#include <filesystem>
#include <string>
#include <vector>

#include "otomech/embedding.hpp"

namespace otomech {

class NetworkEmbedder final : public Embedder {
 public:
  static std::shared_ptr<const NetworkEmbedder> load(const std::filesystem::path& descriptor);
  // Descriptor given inline; `weights` replaces reading the blob from disk.
  static std::shared_ptr<const NetworkEmbedder> from_parts(const std::string& descriptor_json,
                                                           std::vector<float> weights);

  const std::string& id() const override { return id_; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed_slice(const MelPatch& patch) const override;

  struct Layer;
  ~NetworkEmbedder() override;
  NetworkEmbedder(std::string id, std::vector<Layer> layers, std::vector<std::size_t> output_layers,
                  bool concat, std::size_t dimension);

 private:
  std::string id_;
  std::vector<Layer> layers_;
  std::vector<std::size_t> output_layers_;
  bool concat_;
  std::size_t dimension_;
};

}  // namespace otomech
