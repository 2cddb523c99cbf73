#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>

#include <unistd.h>

namespace otomech::testing {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("otomech-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Waveform sine(double freq_hz, double seconds, int rate, double amplitude) {
  Waveform w;
  w.sample_rate_hz = rate;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * i / rate));
  return w;
}

std::string diagnosis_label(std::size_t d) {
  static const char* kLabels[] = {
      "failing battery",      "bad starter motor",  "worn drive belt",     "bad wheel bearing",
      "worn brake pads",      "low power steering", "bad cv joint",        "exhaust leak",
      "bad alternator",       "low engine oil",     "loose heat shield",   "bad sway bar link",
  };
  if (d < std::size(kLabels)) return kLabels[d];
  return "diagnosis " + std::to_string(d);
}

Waveform diagnosis_sound(std::size_t diagnosis, std::uint64_t variant, double seconds, int rate) {
  std::mt19937_64 rng(variant * 7919 + diagnosis);
  std::uniform_real_distribution<double> jitter(-0.03, 0.03);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double base = 110.0 * std::pow(1.31, static_cast<double>(diagnosis % 12)) * (1.0 + jitter(rng));
  const double mod_rate = 2.0 + static_cast<double>(diagnosis % 5) * 1.7;
  const double noise_level = 0.02 + 0.02 * (diagnosis % 3);

  Waveform w;
  w.sample_rate_hz = rate;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * mod_rate * t);
    double s = 0.0;
    for (int h = 1; h <= 4; ++h) s += std::sin(2.0 * std::numbers::pi * base * h * t) / h;
    s = 0.3 * env * s + noise_level * noise(rng);
    w.samples[i] = static_cast<float>(std::clamp(s, -1.0, 1.0));
  }
  return w;
}

std::vector<FixtureRecording> mixed_recordings(std::size_t count, std::size_t diagnoses, std::uint64_t seed,
                                               double seconds) {
  std::mt19937_64 rng(seed);
  std::vector<FixtureRecording> out;
  for (std::size_t i = 0; i < count; ++i) {
    FixtureRecording r;
    char id[32];
    std::snprintf(id, sizeof id, "r%03zu", i);
    r.id = id;
    r.diagnosis = diagnosis_label(i % diagnoses);
    r.location = static_cast<Location>(rng() % 3);
    r.timing = static_cast<Timing>(rng() % 5);
    r.seconds = seconds;
    out.push_back(r);
  }
  return out;
}

FixtureDataset write_dataset(const std::filesystem::path& root, const std::vector<FixtureRecording>& recordings,
                             std::uint64_t audio_seed) {
  FixtureDataset ds;
  ds.root = root;
  std::filesystem::create_directories(root / "audio");
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    const auto& r = recordings[i];
    std::size_t d = 0;
    while (diagnosis_label(d) != r.diagnosis && d < 64) ++d;
    const Waveform w = diagnosis_sound(d, audio_seed * 1000 + i, r.seconds, r.rate);
    write_wav_file(root / "audio" / (r.id + ".wav"), w);

    ManifestRow row;
    row.id = r.id;
    row.audio_path = "audio/" + r.id + ".wav";
    row.diagnosis = r.diagnosis;
    row.location = r.location;
    row.timing = r.timing;
    row.source_title = "Example video, " + r.diagnosis;
    row.source_url = "https://example.com/watch?v=" + r.id;
    row.excerpt_start_s = 1.5 * i;
    row.search_terms = r.diagnosis + " noise car";
    ds.rows.push_back(row);
  }
  ds.manifest_path = root / "manifest.csv";
  std::ofstream(ds.manifest_path) << write_manifest(ds.rows);
  return ds;
}

std::vector<ReferenceRecord> random_records(std::size_t count, std::size_t dimension, std::size_t diagnoses,
                                            std::uint64_t seed, const std::string& embedder_id) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<ReferenceRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    ReferenceRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "x%04zu", i);
    r.id = id;
    r.diagnosis = diagnosis_label(rng() % diagnoses);
    r.location = static_cast<Location>(rng() % 3);
    r.timing = static_cast<Timing>(rng() % 5);
    r.embedding.embedder_id = embedder_id;
    r.embedding.values.resize(dimension);
    for (double& v : r.embedding.values) v = gauss(rng);
    r.search_terms = r.diagnosis;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace otomech::testing
