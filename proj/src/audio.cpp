#include "otomech/audio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "binary_io.hpp"
#include "otomech/error.hpp"

namespace otomech {
namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct WavFormat {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

bool hint_is_wav(std::string_view hint) {
  std::string h(hint);
  std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
  if (!h.empty() && h.front() == '.') h.erase(0, 1);
  return h.empty() || h == "wav" || h == "wave" || h == "audio/wav" || h == "audio/x-wav" ||
         h == "audio/wave" || h == "audio/vnd.wave" || h == "application/octet-stream";
}

WavFormat parse_fmt(std::span<const std::uint8_t> body) {
  detail::ByteReader r(body, ErrorCode::CorruptStream);
  WavFormat f;
  f.tag = r.u16();
  f.channels = r.u16();
  f.sample_rate = r.u32();
  r.u32();  // byte rate
  f.block_align = r.u16();
  f.bits = r.u16();
  if (f.tag == kFormatExtensible) {
    const std::uint16_t extra = r.u16();
    if (extra < 22) throw Error(ErrorCode::CorruptStream, "WAVE_FORMAT_EXTENSIBLE block too short");
    r.u16();  // valid bits
    r.u32();  // channel mask
    f.tag = r.u16();  // first two bytes of the sub-format GUID
  }
  return f;
}

float read_sample(const std::uint8_t* p, const WavFormat& f) {
  switch (f.tag) {
    case kFormatPcm:
      switch (f.bits) {
        case 8: return (static_cast<float>(p[0]) - 128.0f) / 128.0f;
        case 16: {
          std::int16_t v;
          std::memcpy(&v, p, 2);
          return static_cast<float>(v) / 32768.0f;
        }
        case 24: {
          std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
          if (v & 0x800000) v |= ~0xFFFFFF;
          return static_cast<float>(v) / 8388608.0f;
        }
        case 32: {
          std::int32_t v;
          std::memcpy(&v, p, 4);
          return static_cast<float>(static_cast<double>(v) / 2147483648.0);
        }
      }
      break;
    case kFormatFloat:
      if (f.bits == 32) {
        float v;
        std::memcpy(&v, p, 4);
        return v;
      }
      if (f.bits == 64) {
        double v;
        std::memcpy(&v, p, 8);
        return static_cast<float>(v);
      }
      break;
  }
  throw Error(ErrorCode::UnsupportedFormat,
              "unsupported WAV encoding (format " + std::to_string(f.tag) + ", " +
                  std::to_string(f.bits) + " bits)");
}

float clamp_unit(float s) {
  if (!std::isfinite(s)) return 0.0f;
  return std::clamp(s, -1.0f, 1.0f);
}

// Zeroth-order modified Bessel function of the first kind (power series).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Resampler kernel: zero crossings on each side of the (possibly widened)
// sinc, and the Kaiser shape parameter.
constexpr int kZeroCrossings = 16;
constexpr double kKaiserBeta = 8.6;
// Passband edge as a fraction of the lower Nyquist frequency.
constexpr double kRolloff = 0.95;

}  // namespace

Waveform decode_audio(std::span<const std::uint8_t> bytes, std::optional<std::string_view> hint) {
  const bool riff = bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
                    std::memcmp(bytes.data() + 8, "WAVE", 4) == 0;
  if (!riff) {
    if (hint && !hint_is_wav(*hint))
      throw Error(ErrorCode::UnsupportedFormat, "unsupported container '" + std::string(*hint) + "'");
    throw Error(ErrorCode::UnsupportedFormat, "not a RIFF/WAVE stream");
  }

  detail::ByteReader r(bytes, ErrorCode::CorruptStream);
  r.skip(12);
  std::optional<WavFormat> fmt;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  while (r.remaining() >= 8) {
    const std::string_view id = r.tag();
    const std::uint32_t size = r.u32();
    if (size > r.remaining())
      throw Error(ErrorCode::CorruptStream, "chunk '" + std::string(id) + "' declares " +
                                                std::to_string(size) + " bytes but only " +
                                                std::to_string(r.remaining()) + " remain");
    auto body = r.take(size);
    if ((size & 1u) && r.remaining() > 0) r.skip(1);
    if (id == "fmt ") {
      fmt = parse_fmt(body);
    } else if (id == "data") {
      data = body;
      have_data = true;
      break;
    }
  }
  if (!fmt) throw Error(ErrorCode::CorruptStream, "missing fmt chunk");
  if (!have_data) throw Error(ErrorCode::CorruptStream, "missing data chunk");
  if (fmt->channels == 0 || fmt->sample_rate == 0 || fmt->bits == 0)
    throw Error(ErrorCode::CorruptStream, "fmt chunk has zero channels, rate or bit depth");
  const std::size_t sample_bytes = (fmt->bits + 7) / 8;
  if (fmt->block_align != sample_bytes * fmt->channels)
    throw Error(ErrorCode::CorruptStream, "block alignment inconsistent with channels/bit depth");
  if (data.size() % fmt->block_align != 0)
    throw Error(ErrorCode::CorruptStream, "data chunk is not a whole number of frames");

  const std::size_t frames = data.size() / fmt->block_align;
  if (frames == 0) throw Error(ErrorCode::EmptyAudio, "WAV contains no samples");

  Waveform w;
  w.sample_rate_hz = static_cast<int>(fmt->sample_rate);
  w.samples.resize(frames);
  const std::uint8_t* p = data.data();
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < fmt->channels; ++c) {
      acc += clamp_unit(read_sample(p, *fmt));
      p += sample_bytes;
    }
    w.samples[i] = static_cast<float>(acc / fmt->channels);
  }
  return w;
}

Waveform decode_audio(std::string_view bytes, std::optional<std::string_view> hint) {
  return decode_audio(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()),
      hint);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Waveform decode_audio_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_audio(std::span<const std::uint8_t>(bytes), path.extension().string());
}

std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int channels,
                                     int sample_rate_hz, WavSampleFormat format) {
  if (channels <= 0 || sample_rate_hz <= 0 || interleaved.size() % channels != 0)
    throw Error(ErrorCode::InvalidArgument, "encode_wav: bad channel count or sample rate");
  const std::uint16_t bits = format == WavSampleFormat::Pcm16 ? 16 : format == WavSampleFormat::Pcm24 ? 24 : 32;
  const std::uint16_t tag = format == WavSampleFormat::Float32 ? kFormatFloat : kFormatPcm;
  const std::uint32_t block = channels * bits / 8;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));

  detail::ByteWriter w;
  w.tag("RIFF");
  w.u32(36 + data_bytes);
  w.tag("WAVE");
  w.tag("fmt ");
  w.u32(16);
  w.u16(tag);
  w.u16(static_cast<std::uint16_t>(channels));
  w.u32(static_cast<std::uint32_t>(sample_rate_hz));
  w.u32(static_cast<std::uint32_t>(sample_rate_hz) * block);
  w.u16(static_cast<std::uint16_t>(block));
  w.u16(bits);
  w.tag("data");
  w.u32(data_bytes);
  for (float s : interleaved) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    switch (format) {
      case WavSampleFormat::Pcm16:
        w.i16(static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0f, -32768.0f, 32767.0f))));
        break;
      case WavSampleFormat::Pcm24: {
        const auto v = static_cast<std::int32_t>(
            std::lround(std::clamp(c * 8388608.0f, -8388608.0f, 8388607.0f)));
        w.u8(static_cast<std::uint8_t>(v & 0xFF));
        w.u8(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        w.u8(static_cast<std::uint8_t>((v >> 16) & 0xFF));
        break;
      }
      case WavSampleFormat::Float32:
        w.f32(c);
        break;
    }
  }
  return w.take();
}

void write_wav_file(const std::filesystem::path& path, const Waveform& wave, WavSampleFormat format) {
  const auto bytes = encode_wav(wave.samples, 1, wave.sample_rate_hz, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Waveform resample_to_16k(const Waveform& w) {
  if (w.sample_rate_hz <= 0) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  if (w.sample_rate_hz == kCanonicalSampleRate) return w;

  // Output sample i sits at input position i * down / up.
  const std::int64_t in_rate = w.sample_rate_hz;
  const std::int64_t g = std::gcd(in_rate, static_cast<std::int64_t>(kCanonicalSampleRate));
  const std::int64_t up = kCanonicalSampleRate / g;
  const std::int64_t down = in_rate / g;

  const std::int64_t in_len = static_cast<std::int64_t>(w.samples.size());
  const std::int64_t out_len = (in_len * kCanonicalSampleRate + in_rate / 2) / in_rate;

  // Cutoff in cycles per input sample, relative to the input Nyquist.
  const double cutoff = std::min(1.0, static_cast<double>(kCanonicalSampleRate) / in_rate) * kRolloff;
  const int half_width = static_cast<int>(std::ceil(kZeroCrossings / cutoff));
  const int taps = 2 * half_width;
  const double i0_beta = bessel_i0(kKaiserBeta);

  // One filter per fractional phase; tap j weights input sample n0 - half_width + 1 + j.
  std::vector<double> bank(static_cast<std::size_t>(up) * taps);
  for (std::int64_t phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / up;
    double* h = bank.data() + phase * taps;
    double sum = 0.0;
    for (int j = 0; j < taps; ++j) {
      const double d = frac - (j - half_width + 1);
      const double x = cutoff * d;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double r = d / half_width;
      const double win = std::abs(r) >= 1.0 ? 0.0 : bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      h[j] = cutoff * sinc * win;
      sum += h[j];
    }
    for (int j = 0; j < taps; ++j) h[j] /= sum;
  }

  Waveform out;
  out.sample_rate_hz = kCanonicalSampleRate;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (std::int64_t i = 0; i < out_len; ++i) {
    const std::int64_t pos = i * down;
    const std::int64_t n0 = pos / up;
    const double* h = bank.data() + (pos % up) * taps;
    const std::int64_t first = n0 - half_width + 1;
    const int j_lo = static_cast<int>(std::max<std::int64_t>(0, -first));
    const int j_hi = static_cast<int>(std::min<std::int64_t>(taps, in_len - first));
    double acc = 0.0;
    for (int j = j_lo; j < j_hi; ++j) acc += h[j] * w.samples[static_cast<std::size_t>(first + j)];
    out.samples[static_cast<std::size_t>(i)] = std::clamp(static_cast<float>(acc), -1.0f, 1.0f);
  }
  return out;
}

Waveform peak_normalize(const Waveform& w, float target_peak) {
  if (!(target_peak > 0.0f && target_peak <= 1.0f))
    throw Error(ErrorCode::InvalidArgument, "target peak must lie in (0, 1]");
  if (w.samples.empty()) throw Error(ErrorCode::EmptyAudio, "cannot normalize an empty waveform");
  float peak = 0.0f;
  for (float s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak < kSilenceThreshold)
    throw Error(ErrorCode::SilentAudio, "recording is silent (peak below 1e-6)");
  if (peak == target_peak) return w;

  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.resize(w.samples.size());
  const double scale = static_cast<double>(target_peak) / peak;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const float s = w.samples[i];
    // Peak samples land exactly on the target so a second pass is a no-op.
    out.samples[i] = std::abs(s) == peak ? std::copysign(target_peak, s)
                                         : std::clamp(static_cast<float>(s * scale), -target_peak, target_peak);
  }
  return out;
}

Waveform load_canonical(std::span<const std::uint8_t> bytes) {
  return peak_normalize(resample_to_16k(decode_audio(bytes)));
}

Waveform load_canonical_file(const std::filesystem::path& path) {
  return peak_normalize(resample_to_16k(decode_audio_file(path)));
}

}  // namespace otomech
