#include "owttt/datagen.hpp"
#include "owttt/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>

namespace owttt {

namespace {

constexpr std::array<char, 4> kMagic{'O', 'W', 'T', 'T'};

void put_u32(std::ostream &out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream &in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char *>(bytes), 4))
    throw Error(ErrorCode::IoError, "truncated stream file");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void put_f32(std::ostream &out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

float get_f32(std::istream &in) { return std::bit_cast<float>(get_u32(in)); }

std::uint32_t checked_u32(std::size_t v, const char *what) {
  if (v > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::IoError, std::string(what) + " exceeds the u32 header field");
  return static_cast<std::uint32_t>(v);
}

} // namespace

void write_stream_binary(const std::string &path, const Stream &stream) {
  std::size_t d_in = 0, rows = 0;
  for (const auto &batch : stream)
    for (const auto &s : batch) {
      if (d_in == 0)
        d_in = static_cast<std::size_t>(s.sample.values.size());
      else if (d_in != static_cast<std::size_t>(s.sample.values.size()))
        throw Error(ErrorCode::InvalidArgument, "stream rows differ in dimension");
      ++rows;
    }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kStreamFormatVersion);
  put_u32(out, checked_u32(d_in, "d_in"));
  put_u32(out, checked_u32(stream.size(), "batch count"));
  put_u32(out, checked_u32(rows, "row count"));
  for (const auto &batch : stream)
    put_u32(out, checked_u32(batch.size(), "batch size"));
  for (const auto &batch : stream)
    for (const auto &s : batch) {
      put_u32(out, static_cast<std::uint32_t>(s.hidden_label));
      for (Eigen::Index i = 0; i < s.sample.values.size(); ++i)
        put_f32(out, s.sample.values[i]);
    }
  if (!out)
    throw Error(ErrorCode::IoError, "failed writing " + path);
}

Stream read_stream_binary(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw Error(ErrorCode::IoError, path + " is not an OWTT stream file");
  const auto version = get_u32(in);
  if (version != kStreamFormatVersion)
    throw Error(ErrorCode::IoError, path + ": unsupported stream version " + std::to_string(version));
  const auto d_in = get_u32(in);
  const auto n_batches = get_u32(in);
  const auto n_rows = get_u32(in);

  std::vector<std::uint32_t> sizes(n_batches);
  std::size_t total = 0;
  for (auto &s : sizes) {
    s = get_u32(in);
    total += s;
  }
  if (total != n_rows)
    throw Error(ErrorCode::IoError, path + ": batch sizes do not add up to the row count");

  Stream stream;
  stream.reserve(n_batches);
  for (std::uint32_t b = 0; b < n_batches; ++b) {
    Batch batch;
    batch.reserve(sizes[b]);
    for (std::uint32_t r = 0; r < sizes[b]; ++r) {
      LabeledSample s;
      s.hidden_label = static_cast<int>(get_u32(in));
      s.sample.timestamp = b;
      s.sample.values.resize(d_in);
      for (std::uint32_t i = 0; i < d_in; ++i)
        s.sample.values[i] = get_f32(in);
      batch.push_back(std::move(s));
    }
    stream.push_back(std::move(batch));
  }
  return stream;
}

void write_stream_csv(const std::string &path, const Stream &stream,
                      std::string_view provenance) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  if (!provenance.empty())
    out << (provenance.starts_with('#') ? "" : "# ") << provenance << '\n';
  const auto d_in = stream.empty() || stream.front().empty()
                        ? 0
                        : stream.front().front().sample.values.size();
  out << "batch,index,hidden";
  for (Eigen::Index i = 0; i < d_in; ++i)
    out << ",x" << i;
  out << '\n';
  out << std::setprecision(9);
  for (std::size_t b = 0; b < stream.size(); ++b)
    for (std::size_t r = 0; r < stream[b].size(); ++r) {
      const auto &s = stream[b][r];
      out << b << ',' << r << ',' << s.hidden_label;
      for (Eigen::Index i = 0; i < s.sample.values.size(); ++i)
        out << ',' << s.sample.values[i];
      out << '\n';
    }
}

} // namespace owttt
