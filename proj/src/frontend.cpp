#include "otomech/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "otomech/error.hpp"
#include "otomech/simd/kernels.hpp"

namespace otomech {

namespace mel {
double hertz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
}  // namespace mel

namespace {

// The FFTW planner is not thread-safe; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<float> periodic_hann(std::size_t n) {
  std::vector<float> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n));
  return w;
}

std::vector<float> mel_weight_matrix() {
  using namespace mel;
  const double nyquist = kCanonicalSampleRate / 2.0;
  std::vector<double> bin_mel(kSpectrumBins);
  for (std::size_t k = 0; k < kSpectrumBins; ++k)
    bin_mel[k] = hertz_to_mel(nyquist * k / (kSpectrumBins - 1));

  const double lo = hertz_to_mel(kLowerEdgeHz);
  const double hi = hertz_to_mel(kUpperEdgeHz);
  std::vector<double> edges(kBands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = lo + (hi - lo) * i / (kBands + 1);

  std::vector<float> w(kBands * kSpectrumBins, 0.0f);
  for (std::size_t b = 0; b < kBands; ++b) {
    const double left = edges[b], centre = edges[b + 1], right = edges[b + 2];
    // Bin 0 (DC) never contributes.
    for (std::size_t k = 1; k < kSpectrumBins; ++k) {
      const double rise = (bin_mel[k] - left) / (centre - left);
      const double fall = (right - bin_mel[k]) / (right - centre);
      w[b * kSpectrumBins + k] = static_cast<float>(std::max(0.0, std::min(rise, fall)));
    }
  }
  return w;
}

}  // namespace

struct LogMelFrontend::Plan {
  fftwf_plan handle = nullptr;

  Plan() {
    std::vector<float> in(mel::kFftSize);
    std::vector<fftwf_complex> out(mel::kSpectrumBins);
    std::lock_guard lock(planner_mutex());
    handle = fftwf_plan_dft_r2c_1d(static_cast<int>(mel::kFftSize), in.data(), out.data(),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!handle) throw std::runtime_error("FFTW failed to create a plan");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftwf_destroy_plan(handle);
  }
};

LogMelFrontend::LogMelFrontend()
    : plan_(std::make_unique<Plan>()),
      window_(periodic_hann(mel::kWindowSamples)),
      weights_(mel_weight_matrix()) {}

LogMelFrontend::~LogMelFrontend() = default;

MelPatch LogMelFrontend::log_mel_patch(std::span<const float> slice, std::size_t slice_index) const {
  using namespace mel;
  if (slice.size() != kSliceSamples)
    throw Error(ErrorCode::InvalidArgument, "log_mel_patch expects exactly 15360 samples");

  const auto& k = simd::active_kernels();
  std::vector<float> padded(kSliceSamples + 2 * kEdgePad, 0.0f);
  std::copy(slice.begin(), slice.end(), padded.begin() + kEdgePad);

  std::vector<float> frame(kFftSize, 0.0f);
  std::vector<float> spectrum(2 * kSpectrumBins);
  std::vector<float> magnitude(kSpectrumBins);
  std::vector<float> energies(kBands);

  MelPatch patch;
  patch.slice_index = slice_index;
  for (std::size_t t = 0; t < kFrames; ++t) {
    const float* src = padded.data() + t * kHopSamples;
    for (std::size_t i = 0; i < kWindowSamples; ++i) frame[i] = src[i] * window_[i];
    fftwf_execute_dft_r2c(plan_->handle, frame.data(),
                          reinterpret_cast<fftwf_complex*>(spectrum.data()));
    k.complex_magnitude_f32(spectrum.data(), magnitude.data(), kSpectrumBins);
    k.matvec_f32(weights_.data(), magnitude.data(), energies.data(), kBands, kSpectrumBins);
    float* row = patch.values.data() + t * kBands;
    for (std::size_t b = 0; b < kBands; ++b) row[b] = std::log(std::max(energies[b], 0.0f) + kLogOffset);
  }
  return patch;
}

std::vector<MelPatch> LogMelFrontend::patches(const Waveform& w) const {
  const auto slices = slice_960ms(w);
  std::vector<MelPatch> out;
  out.reserve(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i) out.push_back(log_mel_patch(slices[i], i));
  return out;
}

const LogMelFrontend& default_frontend() {
  static const LogMelFrontend frontend;
  return frontend;
}

std::vector<std::span<const float>> slice_960ms(const Waveform& w) {
  if (w.sample_rate_hz != kCanonicalSampleRate)
    throw Error(ErrorCode::InvalidArgument, "slicing requires a 16 kHz waveform");
  const std::size_t n = w.samples.size() / mel::kSliceSamples;
  if (n == 0)
    throw Error(ErrorCode::TooShort, "recording is " + std::to_string(w.duration_ms()) +
                                         " ms; at least 960 ms is required");
  std::vector<std::span<const float>> slices;
  slices.reserve(n);
  const std::span<const float> all(w.samples);
  for (std::size_t i = 0; i < n; ++i)
    slices.push_back(all.subspan(i * mel::kSliceSamples, mel::kSliceSamples));
  return slices;
}

}  // namespace otomech
