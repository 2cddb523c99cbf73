#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "otomech/audio.hpp"

namespace otomech {

// Log-mel analysis constants. These follow the VGGish input
// convention so that externally computed VGGish features line up with this
// frontend.
namespace mel {
inline constexpr std::size_t kSliceSamples = 15360;  // 960 ms at 16 kHz
inline constexpr std::size_t kWindowSamples = 400;   // 25 ms
inline constexpr std::size_t kHopSamples = 160;      // 10 ms
inline constexpr std::size_t kFftSize = 512;
inline constexpr std::size_t kSpectrumBins = kFftSize / 2 + 1;
inline constexpr std::size_t kFrames = 96;
inline constexpr std::size_t kBands = 64;
inline constexpr std::size_t kPatchSize = kFrames * kBands;
inline constexpr double kLowerEdgeHz = 125.0;
inline constexpr double kUpperEdgeHz = 7500.0;
inline constexpr float kLogOffset = 0.01f;
// Each slice is zero-padded by this much on both sides so that 96 hops of
// 10 ms tile the 960 ms slice exactly, with frame t centred on sample 160t+80.
inline constexpr std::size_t kEdgePad = (kWindowSamples - kHopSamples) / 2;

double hertz_to_mel(double hz);
}  // namespace mel

// 96 frames x 64 mel bands of log energies, frame-major.
struct MelPatch {
  std::vector<float> values = std::vector<float>(mel::kPatchSize, 0.0f);
  std::size_t slice_index = 0;

  float at(std::size_t frame, std::size_t band) const { return values[frame * mel::kBands + band]; }
  std::span<const float> frame(std::size_t t) const {
    return std::span<const float>(values).subspan(t * mel::kBands, mel::kBands);
  }
};

// Non-overlapping consecutive 960 ms slices of a 16 kHz waveform; the
// trailing remainder is dropped. Throws TooShort below one slice.
std::vector<std::span<const float>> slice_960ms(const Waveform& w);

class LogMelFrontend {
 public:
  LogMelFrontend();
  ~LogMelFrontend();
  LogMelFrontend(const LogMelFrontend&) = delete;
  LogMelFrontend& operator=(const LogMelFrontend&) = delete;

  // slice.size() must equal mel::kSliceSamples.
  MelPatch log_mel_patch(std::span<const float> slice, std::size_t slice_index = 0) const;
  std::vector<MelPatch> patches(const Waveform& w) const;

  // kBands x kSpectrumBins triangular weights, row-major.
  std::span<const float> mel_weights() const { return weights_; }

 private:
  struct Plan;
  std::unique_ptr<Plan> plan_;
  std::vector<float> window_;
  std::vector<float> weights_;
};

// Process-wide instance; safe to use from any thread.
const LogMelFrontend& default_frontend();

}  // namespace otomech
