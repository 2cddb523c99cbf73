#include "otomech/service.hpp"

#include <httplib.h>

#include <chrono>

#include "otomech/audio.hpp"
#include "otomech/error.hpp"

namespace otomech {

using nlohmann::json;

namespace {

ApiReply error_reply(int status, std::string_view code, std::string_view message) {
  return {status, json{{"code", code}, {"message", message}}};
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedFormat: return 415;
    case ErrorCode::TooLong: return 413;
    case ErrorCode::TooShort:
    case ErrorCode::SilentAudio:
    case ErrorCode::CorruptStream:
    case ErrorCode::EmptyAudio: return 422;
    case ErrorCode::EmptyIndex: return 503;
    default: return 500;
  }
}

void send(httplib::Response& res, const ApiReply& reply) {
  res.status = reply.status;
  res.set_content(reply.body.dump(), "application/json");
}

}  // namespace

std::string reference_audio_url(std::string_view record_id) {
  return "/api/v1/reference-audio/" + percent_encode(record_id);
}

DiagnosisService::DiagnosisService(ServiceConfig config) : config_(std::move(config)) {}

void DiagnosisService::set_index(std::shared_ptr<const DiagnosticIndex> index) {
  auto next = std::make_shared<State>();
  next->index = std::move(index);
  if (next->index) {
    const std::string& id = next->index->embedder_id();
    if (const auto params = parse_reference_embedder_id(id)) {
      next->embedder = reference_embedder(params->seed, params->dimension);
    } else if (config_.external_embedder && config_.external_embedder->id() == id) {
      next->embedder = config_.external_embedder;
    }
  }
  std::lock_guard lock(mutex_);
  state_ = std::move(next);
}

void DiagnosisService::load_index(const std::filesystem::path& path) {
  set_index(std::make_shared<const DiagnosticIndex>(DiagnosticIndex::load(path)));
}

std::shared_ptr<const DiagnosisService::State> DiagnosisService::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::shared_ptr<const DiagnosticIndex> DiagnosisService::index() const {
  const auto s = snapshot();
  return s ? s->index : nullptr;
}

ApiReply DiagnosisService::diagnose(std::string_view audio, std::string_view where_s, std::string_view when_s) const {
  const auto started = std::chrono::steady_clock::now();
  const auto state = snapshot();
  if (!state || !state->index) return error_reply(503, "INDEX_NOT_LOADED", "no diagnostic index is loaded");
  if (!state->embedder)
    return error_reply(503, "EMBEDDER_UNAVAILABLE",
                       "no query embedder matches the index embedder '" + state->index->embedder_id() + "'");

  const auto where = parse_location(where_s.empty() ? "not_sure" : where_s);
  if (!where) return error_reply(400, "INVALID_ENUM", "unknown location '" + std::string(where_s) + "'");
  const auto when = parse_timing(when_s.empty() ? "not_sure" : when_s);
  if (!when) return error_reply(400, "INVALID_ENUM", "unknown timing '" + std::string(when_s) + "'");
  if (audio.size() > config_.max_upload_bytes)
    return error_reply(413, "PAYLOAD_TOO_LARGE", "audio upload exceeds " + std::to_string(config_.max_upload_bytes) + " bytes");

  try {
    const Waveform decoded = decode_audio(audio);
    if (decoded.duration_seconds() > config_.max_duration_s)
      throw Error(ErrorCode::TooLong, "recording is longer than " + std::to_string(config_.max_duration_s) + " s");
    const Waveform canonical = peak_normalize(resample_to_16k(decoded));
    const Embedding query = embed_recording(canonical, *state->embedder);
    const QueryResult result = state->index->query(query, *where, *when, kDefaultTopK);

    json matches = json::array();
    for (const auto& m : result.matches)
      matches.push_back({
          {"rank", m.rank},
          {"record_id", m.record_id},
          {"diagnosis", m.diagnosis},
          {"similarity", m.similarity},
          {"confidence", m.confidence},
          {"search_url", m.search_url},
          {"reference_audio_url", reference_audio_url(m.record_id)},
      });
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return {200, json{
                     {"matches", matches},
                     {"fallback", result.fallback},
                     {"query_duration_ms", elapsed},
                     {"embedder_id", state->index->embedder_id()},
                 }};
  } catch (const Error& e) {
    return error_reply(status_for(e.code()), error_code_name(e.code()), e.what());
  }
}

ApiReply DiagnosisService::options() const {
  json locations = json::array();
  for (Location l : kAllLocations) locations.push_back({{"value", to_string(l)}, {"label", display_label(l)}});
  json timings = json::array();
  for (Timing t : kAllTimings) timings.push_back({{"value", to_string(t)}, {"label", display_label(t)}});
  return {200, json{{"locations", locations}, {"timings", timings}}};
}

ApiReply DiagnosisService::health() const {
  const auto state = snapshot();
  if (!state || !state->index) return {503, json{{"status", "index_not_loaded"}}};
  return {200, json{
                   {"status", "ok"},
                   {"records", state->index->size()},
                   {"diagnoses", state->index->diagnosis_count()},
                   {"embedder_id", state->index->embedder_id()},
                   {"query_embedder_available", state->embedder != nullptr},
               }};
}

void DiagnosisService::register_routes(httplib::Server& server) const {
  // Multipart framing overhead on top of the audio cap.
  server.set_payload_max_length(config_.max_upload_bytes + 1024 * 1024);

  server.Post("/api/v1/diagnose", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("audio")) {
      send(res, error_reply(400, "MISSING_AUDIO", "multipart field 'audio' is required"));
      return;
    }
    const auto field = [&](const char* name) -> std::string {
      if (req.has_file(name)) return req.get_file_value(name).content;
      return req.has_param(name) ? req.get_param_value(name) : std::string();
    };
    const auto& audio = req.get_file_value("audio");
    send(res, diagnose(audio.content, field("where"), field("when")));
  });

  server.Get("/api/v1/options", [this](const httplib::Request&, httplib::Response& res) { send(res, options()); });

  server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { send(res, health()); });

  server.Get(R"(/api/v1/reference-audio/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto state = snapshot();
    if (!state || !state->index) {
      send(res, error_reply(503, "INDEX_NOT_LOADED", "no diagnostic index is loaded"));
      return;
    }
    const std::string id = httplib::detail::decode_url(req.matches[1], false);
    const ReferenceRecord* rec = state->index->find(id);
    if (!rec) {
      send(res, error_reply(404, "UNKNOWN_RECORD", "no reference record '" + id + "'"));
      return;
    }
    try {
      const auto bytes = read_file_bytes(rec->audio_path);
      res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
    } catch (const Error&) {
      send(res, error_reply(404, "AUDIO_MISSING", "reference audio for '" + id + "' is not available"));
    }
  });

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) send(res, error_reply(413, "PAYLOAD_TOO_LARGE", "request body too large"));
    else if (res.status == 404) send(res, error_reply(404, "NOT_FOUND", "no such endpoint"));
  });

  if (!config_.assets_dir.empty()) server.set_mount_point("/", config_.assets_dir.string());
}

}  // namespace otomech
