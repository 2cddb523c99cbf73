#pragma once

// Synthetic audio and dataset fixtures shared by the unit, integration and
// acceptance suites.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "otomech/audio.hpp"
#include "otomech/index.hpp"
#include "otomech/manifest.hpp"

namespace otomech::testing {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

Waveform sine(double freq_hz, double seconds, int rate = kCanonicalSampleRate, double amplitude = 0.5);

// A "machine" sound for one diagnosis: a few harmonics of a base pitch with
// amplitude modulation, plus recording-specific jitter and noise drawn from
// `variant`.
Waveform diagnosis_sound(std::size_t diagnosis, std::uint64_t variant, double seconds,
                         int rate = kCanonicalSampleRate);

struct FixtureRecording {
  std::string id;
  std::string diagnosis;
  Location location;
  Timing timing;
  double seconds;
  int rate = kCanonicalSampleRate;
};

// `count` recordings cycling through `diagnoses` labels with mixed metadata.
std::vector<FixtureRecording> mixed_recordings(std::size_t count, std::size_t diagnoses, std::uint64_t seed,
                                               double seconds = 1.5);

struct FixtureDataset {
  std::filesystem::path root;
  std::filesystem::path manifest_path;
  std::vector<ManifestRow> rows;
};

// Writes audio/<id>.wav for every recording and manifest.csv under `root`.
FixtureDataset write_dataset(const std::filesystem::path& root, const std::vector<FixtureRecording>& recordings,
                             std::uint64_t audio_seed = 7);

// Records with the given labels/metadata and random (seeded) embeddings.
std::vector<ReferenceRecord> random_records(std::size_t count, std::size_t dimension, std::size_t diagnoses,
                                            std::uint64_t seed, const std::string& embedder_id = "test-embedder");

std::string diagnosis_label(std::size_t d);

}  // namespace otomech::testing
