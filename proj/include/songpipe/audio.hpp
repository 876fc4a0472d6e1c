/**
 * @file audio.hpp
 * @brief Sampled audio buffer and RIFF/WAVE reading and writing
 *        (PCM-16 and IEEE float-32, one or two channels).
 */
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <vector>

#include "songpipe/error.hpp"

namespace songpipe {

constexpr int kDefaultSampleRate = 44100;

struct AudioBuffer {
  int sample_rate = kDefaultSampleRate;
  /// One vector per channel, all the same length.
  std::vector<std::vector<float>> channels;

  AudioBuffer() = default;
  AudioBuffer(int rate, int channel_count, std::size_t frames)
      : sample_rate(rate),
        channels(static_cast<std::size_t>(channel_count), std::vector<float>(frames, 0.0f)) {}

  int channel_count() const { return static_cast<int>(channels.size()); }
  std::size_t frames() const { return channels.empty() ? 0 : channels.front().size(); }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0;
  }

  float peak() const {
    float p = 0.0f;
    for (const auto& ch : channels) {
      for (float s : ch) p = std::max(p, std::abs(s));
    }
    return p;
  }

  bool operator==(const AudioBuffer&) const = default;
};

/// Channel average; the buffer itself when already mono.
inline std::vector<float> mono_mix(const AudioBuffer& audio) {
  if (audio.channels.empty()) return {};
  if (audio.channel_count() == 1) return audio.channels.front();
  std::vector<float> out(audio.frames(), 0.0f);
  for (const auto& ch : audio.channels) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += ch[i];
  }
  const float scale = 1.0f / static_cast<float>(audio.channel_count());
  for (float& s : out) s *= scale;
  return out;
}

enum class WavEncoding { kPcm16, kFloat32 };

namespace wav {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline void put_le(std::vector<std::uint8_t>& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_le(std::span<const std::uint8_t> in, std::size_t pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) {
    throw Error(ErrorCode::kTruncated, "WAV chunk runs past end of data");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint32_t{in[pos + i]} << (8 * i);
  return v;
}

inline bool tag_is(std::span<const std::uint8_t> in, std::size_t pos, std::string_view tag) {
  return pos + 4 <= in.size() && std::equal(tag.begin(), tag.end(), in.begin() + pos);
}

}  // namespace wav

inline std::vector<std::uint8_t> write_wav(const AudioBuffer& audio,
                                           WavEncoding encoding = WavEncoding::kFloat32) {
  const int channels = audio.channel_count();
  if (channels < 1 || channels > 2) {
    throw Error(ErrorCode::kUnsupportedCodec, "only 1 or 2 channels supported");
  }
  for (const auto& ch : audio.channels) {
    if (ch.size() != audio.frames()) {
      throw Error(ErrorCode::kShapeMismatch, "channel lengths differ");
    }
  }
  if (audio.sample_rate <= 0) throw Error(ErrorCode::kInvalidArgument, "sample rate must be > 0");

  const int bytes_per_sample = encoding == WavEncoding::kPcm16 ? 2 : 4;
  const auto frames = audio.frames();
  const auto data_bytes =
      static_cast<std::uint32_t>(frames * static_cast<std::size_t>(channels * bytes_per_sample));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  wav::put_le(out, 36 + data_bytes, 4);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  wav::put_le(out, 16, 4);
  wav::put_le(out, encoding == WavEncoding::kPcm16 ? wav::kFormatPcm : wav::kFormatFloat, 2);
  wav::put_le(out, static_cast<std::uint32_t>(channels), 2);
  wav::put_le(out, static_cast<std::uint32_t>(audio.sample_rate), 4);
  wav::put_le(out, static_cast<std::uint32_t>(audio.sample_rate * channels * bytes_per_sample), 4);
  wav::put_le(out, static_cast<std::uint32_t>(channels * bytes_per_sample), 2);
  wav::put_le(out, static_cast<std::uint32_t>(bytes_per_sample * 8), 2);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  wav::put_le(out, data_bytes, 4);

  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& ch : audio.channels) {
      if (encoding == WavEncoding::kPcm16) {
        const float clipped = std::clamp(ch[i], -1.0f, 1.0f);
        const auto q = static_cast<std::int16_t>(std::lround(clipped * 32767.0f));
        wav::put_le(out, static_cast<std::uint16_t>(q), 2);
      } else {
        wav::put_le(out, std::bit_cast<std::uint32_t>(ch[i]), 4);
      }
    }
  }
  return out;
}

/// @brief Decodes RIFF/WAVE (PCM-16 or float-32, including the extensible
/// header form). Unknown chunks are skipped.
inline AudioBuffer read_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !wav::tag_is(bytes, 0, "RIFF") || !wav::tag_is(bytes, 8, "WAVE")) {
    throw Error(ErrorCode::kMalformedHeader, "missing RIFF/WAVE header");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t format = 0;
  int channels = 0;
  int rate = 0;
  int bits = 0;
  while (pos + 8 <= bytes.size()) {
    const std::size_t chunk_size = wav::get_le(bytes, pos + 4, 4);
    const std::size_t body = pos + 8;
    if (chunk_size > bytes.size() - body) {
      throw Error(ErrorCode::kTruncated, "WAV chunk runs past end of data");
    }
    if (wav::tag_is(bytes, pos, "fmt ")) {
      if (chunk_size < 16) throw Error(ErrorCode::kMalformedHeader, "fmt chunk too short");
      format = static_cast<std::uint16_t>(wav::get_le(bytes, body, 2));
      channels = static_cast<int>(wav::get_le(bytes, body + 2, 2));
      rate = static_cast<int>(wav::get_le(bytes, body + 4, 4));
      bits = static_cast<int>(wav::get_le(bytes, body + 14, 2));
      if (format == wav::kFormatExtensible) {
        if (chunk_size < 40) throw Error(ErrorCode::kMalformedHeader, "extensible fmt too short");
        format = static_cast<std::uint16_t>(wav::get_le(bytes, body + 24, 2));
      }
      have_fmt = true;
    } else if (wav::tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw Error(ErrorCode::kMalformedHeader, "data chunk before fmt chunk");
      const bool pcm16 = format == wav::kFormatPcm && bits == 16;
      const bool float32 = format == wav::kFormatFloat && bits == 32;
      if (!pcm16 && !float32) {
        throw Error(ErrorCode::kUnsupportedCodec,
                    "format " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
      }
      if (channels < 1 || channels > 2) {
        throw Error(ErrorCode::kUnsupportedCodec, "only 1 or 2 channels supported");
      }
      if (rate <= 0) throw Error(ErrorCode::kMalformedHeader, "sample rate must be > 0");
      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (pcm16 ? 2 : 4);
      const std::size_t frames = chunk_size / frame_bytes;
      AudioBuffer audio(rate, channels, frames);
      std::size_t p = body;
      for (std::size_t i = 0; i < frames; ++i) {
        for (int c = 0; c < channels; ++c) {
          float v;
          if (pcm16) {
            const auto q = static_cast<std::int16_t>(wav::get_le(bytes, p, 2));
            v = std::max(-1.0f, static_cast<float>(q) / 32767.0f);
            p += 2;
          } else {
            v = std::bit_cast<float>(wav::get_le(bytes, p, 4));
            p += 4;
          }
          audio.channels[static_cast<std::size_t>(c)][i] = v;
        }
      }
      return audio;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  throw Error(have_fmt ? ErrorCode::kTruncated : ErrorCode::kMalformedHeader,
              have_fmt ? "missing data chunk" : "missing fmt chunk");
}

}  // namespace songpipe
