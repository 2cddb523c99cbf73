#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace otomech {

inline constexpr int kCanonicalSampleRate = 16000;
inline constexpr float kDefaultTargetPeak = 1.0f;
// Below this peak, normalization would only amplify noise.
inline constexpr float kSilenceThreshold = 1e-6f;
// Upper bound on query uploads; reference recordings are not capped.
inline constexpr double kMaxQueryDurationSeconds = 30.0;

// Mono sample buffer. Samples are kept within [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalSampleRate;

  double duration_ms() const {
    return 1000.0 * static_cast<double>(samples.size()) / sample_rate_hz;
  }
  double duration_seconds() const { return duration_ms() / 1000.0; }
};

// Decodes a RIFF/WAVE byte stream (PCM 8/16/24/32-bit, IEEE float 32/64,
// WAVE_FORMAT_EXTENSIBLE wrappers of those) into a mono waveform at the
// source rate. Channels are mixed down by arithmetic mean.
Waveform decode_audio(std::span<const std::uint8_t> bytes,
                      std::optional<std::string_view> format_hint = std::nullopt);
Waveform decode_audio(std::string_view bytes,
                      std::optional<std::string_view> format_hint = std::nullopt);
Waveform decode_audio_file(const std::filesystem::path& path);

enum class WavSampleFormat { Pcm16, Pcm24, Float32 };

// Writes interleaved samples as a canonical 44-byte-header WAV.
std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int channels,
                                     int sample_rate_hz,
                                     WavSampleFormat format = WavSampleFormat::Pcm16);
void write_wav_file(const std::filesystem::path& path, const Waveform& w,
                    WavSampleFormat format = WavSampleFormat::Pcm16);

// Band-limited (Kaiser-windowed sinc) conversion to 16 kHz. A 16 kHz input is
// returned unchanged.
Waveform resample_to_16k(const Waveform& w);

// Scales every sample by target_peak / max|s|. Throws SilentAudio when the
// input peak is below kSilenceThreshold.
Waveform peak_normalize(const Waveform& w, float target_peak = kDefaultTargetPeak);

// decode -> resample -> peak-normalize; shared by index build and queries.
Waveform load_canonical(std::span<const std::uint8_t> bytes);
Waveform load_canonical_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace otomech
