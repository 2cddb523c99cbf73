// Operator entry points: build-index, query, evaluate, serve.
//
// Exit codes: 0 success, 1 validation/build failure, 2 usage error.

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <thread>

#include "otomech/audio.hpp"
#include "otomech/embedding.hpp"
#include "otomech/error.hpp"
#include "otomech/evaluation.hpp"
#include "otomech/index.hpp"
#include "otomech/manifest.hpp"
#include "otomech/network.hpp"
#include "otomech/service.hpp"

namespace {

using namespace otomech;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct BuildArgs {
  std::string manifest, audio_root = ".", out, embedder = "reference", sidecar, model;
  std::uint64_t seed = 0;
  std::size_t dim = kDefaultReferenceDimension;
  unsigned threads = 0;
};

struct QueryArgs {
  std::string index, audio, where = "not_sure", when = "not_sure", format = "text", model;
  std::size_t k = kDefaultTopK;
};

struct EvalArgs {
  std::string index, format = "text";
  bool with_metadata = false, no_metadata = false;
  std::size_t k = kDefaultTopK;
};

struct ServeArgs {
  std::string index, bind = "127.0.0.1:8080", assets, model;
};

int build_index_cmd(const BuildArgs& a) {
  const auto rows = read_manifest(a.manifest);
  std::unique_ptr<RecordingEmbeddingSource> source;
  if (a.embedder == "reference") {
    source = std::make_unique<SliceEmbeddingSource>(reference_embedder(a.seed, a.dim));
  } else if (a.embedder == "sidecar") {
    if (a.sidecar.empty()) throw CLI::ValidationError("--sidecar", "required with --embedder sidecar");
    auto sidecar = std::make_shared<const SidecarEmbeddings>(SidecarEmbeddings::read(a.sidecar));
    source = std::make_unique<SidecarEmbeddingSource>(std::move(sidecar));
  } else {
    if (a.model.empty()) throw CLI::ValidationError("--model", "required with --embedder external");
    source = std::make_unique<SliceEmbeddingSource>(NetworkEmbedder::load(a.model));
  }

  const DiagnosticIndex index = build_index(rows, a.audio_root, *source, BuildOptions{a.threads});
  index.save(a.out);
  std::cout << index.size() << " records, " << index.diagnosis_count() << " diagnoses\n"
            << "embedder: " << index.embedder_id() << "\n"
            << "calibration: mean " << index.calibration().mean_sim << ", min " << index.calibration().min_sim
            << ", max " << index.calibration().max_sim << " over " << index.calibration().pair_count << " pairs\n"
            << "wrote " << a.out << '\n';
  return kExitOk;
}

std::shared_ptr<const Embedder> query_embedder(const DiagnosticIndex& index, const std::string& model) {
  if (const auto p = parse_reference_embedder_id(index.embedder_id())) return reference_embedder(p->seed, p->dimension);
  if (!model.empty()) {
    auto net = NetworkEmbedder::load(model);
    if (net->id() == index.embedder_id()) return net;
    throw Error(ErrorCode::EmbedderMismatch,
                "model '" + net->id() + "' does not match index embedder '" + index.embedder_id() + "'");
  }
  throw Error(ErrorCode::EmbedderMismatch,
              "index embedder '" + index.embedder_id() + "' needs --model to embed queries");
}

int query_cmd(const QueryArgs& a) {
  const auto format = parse_report_format(a.format);
  const auto where = parse_location(a.where);
  const auto when = parse_timing(a.when);
  if (!format || !where || !when) throw CLI::ValidationError("query", "bad --format, --where or --when value");

  const DiagnosticIndex index = DiagnosticIndex::load(a.index);
  const auto embedder = query_embedder(index, a.model);
  const Waveform canonical = load_canonical_file(a.audio);
  const QueryResult result = index.query(embed_recording(canonical, *embedder), *where, *when, a.k);

  if (*format == ReportFormat::Json) {
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& m : result.matches)
      matches.push_back({{"rank", m.rank},
                         {"record_id", m.record_id},
                         {"diagnosis", m.diagnosis},
                         {"similarity", m.similarity},
                         {"confidence", m.confidence},
                         {"search_url", m.search_url}});
    std::cout << nlohmann::json{{"matches", matches}, {"fallback", result.fallback}, {"embedder_id", index.embedder_id()}}
                     .dump(2)
              << '\n';
    return kExitOk;
  }
  if (result.fallback) std::cout << "note: no record matches the where/when filter; showing unfiltered matches\n";
  for (const auto& m : result.matches) {
    std::printf("%zu  %.3f  %.2f  %-28s %-12s %s\n", m.rank, m.similarity, m.confidence, m.diagnosis.c_str(),
                m.record_id.c_str(), m.search_url.c_str());
  }
  return kExitOk;
}

int evaluate_cmd(const EvalArgs& a) {
  const auto format = parse_report_format(a.format);
  if (!format) throw CLI::ValidationError("--format", "expected text or json");
  const DiagnosticIndex index = DiagnosticIndex::load(a.index);
  const bool both = !a.with_metadata && !a.no_metadata;
  const auto summary = evaluate_index(index, both || a.with_metadata, both || a.no_metadata, a.k);
  std::cout << emit_summary(summary, *format);
  return kExitOk;
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--bind", "expected host:port");
  try {
    const int port = std::stoi(bind.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    return {bind.substr(0, colon), port};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--bind", "bad port in '" + bind + "'");
  }
}

int serve_cmd(const ServeArgs& a) {
  const auto [host, port] = split_bind(a.bind);
  ServiceConfig config;
  config.assets_dir = a.assets;
  if (!a.model.empty()) config.external_embedder = NetworkEmbedder::load(a.model);
  DiagnosisService service(config);
  service.load_index(a.index);

  // Signals are taken synchronously on this thread; workers inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGHUP);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  httplib::Server server;
  service.register_routes(server);
  if (!server.bind_to_port(host, port)) {
    std::cerr << "error: cannot bind " << a.bind << '\n';
    return kExitFailure;
  }
  std::cerr << "serving " << service.index()->size() << " records on " << a.bind << '\n';
  std::thread listener([&] { server.listen_after_bind(); });

  for (;;) {
    int sig = 0;
    if (sigwait(&signals, &sig) != 0) break;
    if (sig == SIGHUP) {
      try {
        service.load_index(a.index);
        std::cerr << "reloaded index: " << service.index()->size() << " records\n";
      } catch (const std::exception& e) {
        std::cerr << "reload failed, keeping previous index: " << e.what() << '\n';
      }
      continue;
    }
    break;
  }
  // stop() lets in-flight requests finish before listen returns.
  server.stop();
  listener.join();
  std::cerr << "shut down\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diagnose vehicle sounds by retrieving similar annotated recordings"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* b = app.add_subcommand("build-index", "Build a diagnostic index from a manifest and audio files");
  b->add_option("--manifest", build.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  b->add_option("--audio-root", build.audio_root, "Directory that manifest audio paths are relative to");
  b->add_option("--out", build.out, "Index file to write")->required();
  b->add_option("--embedder", build.embedder, "reference | sidecar | external")
      ->check(CLI::IsMember({"reference", "sidecar", "external"}));
  b->add_option("--seed", build.seed, "Reference embedder seed");
  b->add_option("--dim", build.dim, "Reference embedder dimension")->check(CLI::Range(8, 65536));
  b->add_option("--sidecar", build.sidecar, "Precomputed embedding file (with --embedder sidecar)");
  b->add_option("--model", build.model, "Network descriptor JSON (with --embedder external)");
  b->add_option("--threads", build.threads, "Worker threads (0 = all cores)");

  QueryArgs query;
  auto* q = app.add_subcommand("query", "Rank reference recordings against an audio file");
  q->add_option("--index", query.index, "Index file")->required()->check(CLI::ExistingFile);
  q->add_option("--audio", query.audio, "Query WAV file")->required()->check(CLI::ExistingFile);
  q->add_option("--where", query.where, "front | rear | wheels | not_sure");
  q->add_option("--when", query.when, "starting | idling | driving | braking | turning | not_sure");
  q->add_option("--k", query.k, "Number of matches")->check(CLI::PositiveNumber);
  q->add_option("--format", query.format, "text | json");
  q->add_option("--model", query.model, "Network descriptor for indices built with --embedder external/sidecar");

  EvalArgs eval;
  auto* e = app.add_subcommand("evaluate", "Leave-one-out accuracy and random baselines");
  e->add_option("--index", eval.index, "Index file")->required()->check(CLI::ExistingFile);
  auto* with = e->add_flag("--with-metadata", eval.with_metadata, "Filter candidates by the query's where/when");
  e->add_flag("--no-metadata", eval.no_metadata, "Rank over all other records")->excludes(with);
  e->add_option("--format", eval.format, "text | json");
  e->add_option("--k", eval.k, "Top-k cutoff")->check(CLI::PositiveNumber);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the HTTP API");
  s->add_option("--index", serve.index, "Index file")->required();
  s->add_option("--bind", serve.bind, "host:port");
  s->add_option("--assets", serve.assets, "Static web UI directory")->check(CLI::ExistingDirectory);
  s->add_option("--model", serve.model, "Network descriptor used to embed queries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (*b) return build_index_cmd(build);
    if (*q) return query_cmd(query);
    if (*e) return evaluate_cmd(eval);
    if (*s) return serve_cmd(serve);
  } catch (const CLI::ValidationError& err) {
    std::cerr << "usage error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const BuildError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitFailure;
  } catch (const Error& err) {
    std::cerr << "error: " << error_code_name(err.code()) << ": " << err.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
