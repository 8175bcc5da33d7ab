// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <fstream>

#include "roclab/digest.hpp"
#include "roclab/model.hpp"

namespace roclab {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& buf, T v) {
  char tmp[sizeof(T)];
  std::memcpy(tmp, &v, sizeof(T));
  buf.append(tmp, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size()) {
    throw CorruptChecksum("checkpoint: truncated file");
  }
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put(buf, kVersion);
  for (std::size_t d : {params.dims.image_h, params.dims.image_w,
                        params.dims.vocab_size, params.dims.hidden_dim,
                        params.dims.feature_dim, params.dims.proj_dim}) {
    put(buf, static_cast<std::uint64_t>(d));
  }
  put(buf, params.temperature.log_tau);
  put(buf, static_cast<std::uint32_t>(params.temperature.trainable ? 1 : 0));
  params.for_each_block([&](const std::vector<double>& v) {
    for (double x : v) put(buf, x);
  });
  put(buf, crc32(buf.data(), buf.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < 4 + sizeof(std::uint32_t) * 2) {
    throw CorruptChecksum("checkpoint: file too short");
  }
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw VersionMismatch("checkpoint: bad magic");
  }
  const std::uint32_t stored_crc = [&] {
    std::size_t off = buf.size() - sizeof(std::uint32_t);
    return take<std::uint32_t>(buf, off);
  }();
  if (crc32(buf.data(), buf.size() - sizeof(std::uint32_t)) != stored_crc) {
    throw CorruptChecksum("checkpoint: CRC mismatch");
  }

  std::size_t off = 4;
  const auto version = take<std::uint32_t>(buf, off);
  if (version != kVersion) {
    throw VersionMismatch("checkpoint: version " + std::to_string(version));
  }
  std::uint64_t dims[6];
  for (auto& d : dims) d = take<std::uint64_t>(buf, off);
  const double log_tau = take<double>(buf, off);
  const bool trainable = take<std::uint32_t>(buf, off) != 0;

  ModelParams p = init_params(0, dims[0], dims[1], dims[2], dims[3], dims[4],
                              dims[5]);
  p.temperature = Temperature{log_tau, trainable};
  p.for_each_block([&](std::vector<double>& v) {
    for (double& x : v) x = take<double>(buf, off);
  });
  if (off != buf.size() - sizeof(std::uint32_t)) {
    throw CorruptChecksum("checkpoint: trailing bytes");
  }
  return p;
}

}  // namespace roclab
