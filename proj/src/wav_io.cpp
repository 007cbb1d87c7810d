#include "ffsv/wav_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "ffsv/error.hpp"

namespace ffsv {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

template <typename T>
T read_le(const std::vector<std::uint8_t>& buf, std::size_t pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  return v;  // host is little-endian
}

void put_le32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_le16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_wav: cannot open file: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw Error("read_wav: not a RIFF/WAVE file: " + path);
  }

  bool have_fmt = false;
  std::uint16_t format = 0, num_channels = 0, bits_per_sample = 0;
  std::uint32_t sample_rate = 0;
  std::size_t data_pos = 0;
  std::uint32_t data_size = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    char id[4];
    std::memcpy(id, buf.data() + pos, 4);
    std::uint32_t chunk_size = read_le<std::uint32_t>(buf, pos + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > buf.size())
        throw Error("read_wav: malformed fmt chunk: " + path);
      format = read_le<std::uint16_t>(buf, body);
      num_channels = read_le<std::uint16_t>(buf, body + 2);
      sample_rate = read_le<std::uint32_t>(buf, body + 4);
      bits_per_sample = read_le<std::uint16_t>(buf, body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_pos = body;
      data_size = chunk_size;
      have_data = true;
      break;  // fmt is required to precede data in the files we accept
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw Error("read_wav: missing fmt chunk: " + path);
  if (!have_data) throw Error("read_wav: missing data chunk: " + path);
  if (num_channels < 1 || num_channels > 8)
    throw Error("read_wav: unsupported channel count " +
                std::to_string(num_channels) + ": " + path);
  if (sample_rate == 0) throw Error("read_wav: zero sample rate: " + path);

  bool pcm16 = format == kFormatPcm && bits_per_sample == 16;
  bool f32 = format == kFormatIeeeFloat && bits_per_sample == 32;
  if (!pcm16 && !f32)
    throw Error("read_wav: unsupported encoding (format=" +
                std::to_string(format) + ", bits=" +
                std::to_string(bits_per_sample) + "): " + path);

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * num_channels;
  if (data_pos + data_size > buf.size() || data_size % frame_bytes != 0)
    throw Error("read_wav: truncated data chunk: " + path);

  const std::size_t num_frames = data_size / frame_bytes;
  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  w.channels.assign(num_channels, std::vector<double>(num_frames));
  for (std::size_t t = 0; t < num_frames; ++t) {
    for (int c = 0; c < num_channels; ++c) {
      std::size_t p = data_pos + (t * num_channels + c) * bytes_per_sample;
      if (pcm16) {
        auto s = read_le<std::int16_t>(buf, p);
        w.channels[c][t] = static_cast<double>(s) / 32768.0;
      } else {
        w.channels[c][t] = static_cast<double>(read_le<float>(buf, p));
      }
    }
  }
  return w;
}

void write_wav(const Waveform& w, const std::string& path, WavEncoding encoding) {
  if (w.num_channels() == 0 || w.num_samples() == 0)
    throw Error("write_wav: empty waveform");
  w.validate();

  const int channels = w.num_channels();
  const std::size_t frames = w.num_samples();
  const std::uint16_t bytes_per_sample = encoding == WavEncoding::pcm16 ? 2 : 4;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(frames * channels * bytes_per_sample);

  std::string out;
  out.reserve(44 + data_size);
  out.append("RIFF");
  put_le32(out, 36 + data_size);
  out.append("WAVE");
  out.append("fmt ");
  put_le32(out, 16);
  put_le16(out, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatIeeeFloat);
  put_le16(out, static_cast<std::uint16_t>(channels));
  put_le32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_le32(out, static_cast<std::uint32_t>(w.sample_rate) * channels *
                    bytes_per_sample);
  put_le16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
  put_le16(out, static_cast<std::uint16_t>(bytes_per_sample * 8));
  out.append("data");
  put_le32(out, data_size);

  for (std::size_t t = 0; t < frames; ++t) {
    for (int c = 0; c < channels; ++c) {
      double s = w.channels[c][t];
      if (encoding == WavEncoding::pcm16) {
        long q = std::lrint(s * 32768.0);
        if (q > 32767) q = 32767;
        if (q < -32768) q = -32768;
        put_le16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else {
        float f = static_cast<float>(s);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_le32(out, bits);
      }
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("write_wav: cannot open for writing: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw Error("write_wav: write failed: " + path);
}

}  // namespace ffsv
