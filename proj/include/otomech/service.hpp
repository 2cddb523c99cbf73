#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

#include "otomech/embedding.hpp"
#include "otomech/index.hpp"

namespace httplib {
class Server;
}

namespace otomech {

struct ServiceConfig {
  std::size_t max_upload_bytes = 25u * 1024u * 1024u;
  double max_duration_s = kMaxQueryDurationSeconds;
  // Directory mounted at "/" for the web UI; empty disables static files.
  std::filesystem::path assets_dir;
  // Used for queries when its id matches the loaded index's embedder_id.
  // Indices built by the reference embedder need nothing here.
  std::shared_ptr<const Embedder> external_embedder;
};

// Status plus JSON body, independent of the HTTP transport.
struct ApiReply {
  int status = 200;
  nlohmann::json body;
};

// HTTP front end over an immutable DiagnosticIndex. Handlers take a snapshot
// of the current index; replacing the index never disturbs requests already
// in flight.
class DiagnosisService {
 public:
  explicit DiagnosisService(ServiceConfig config = {});

  // An index whose embedder cannot be reconstructed for queries still
  // serves /healthz; diagnose then answers 503 EMBEDDER_UNAVAILABLE.
  void set_index(std::shared_ptr<const DiagnosticIndex> index);
  void load_index(const std::filesystem::path& path);
  std::shared_ptr<const DiagnosticIndex> index() const;

  ApiReply diagnose(std::string_view audio_bytes, std::string_view where, std::string_view when) const;
  ApiReply options() const;
  ApiReply health() const;

  void register_routes(httplib::Server& server) const;

 private:
  struct State {
    std::shared_ptr<const DiagnosticIndex> index;
    std::shared_ptr<const Embedder> embedder;
  };
  std::shared_ptr<const State> snapshot() const;

  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::shared_ptr<const State> state_;
};

std::string reference_audio_url(std::string_view record_id);

}  // namespace otomech
