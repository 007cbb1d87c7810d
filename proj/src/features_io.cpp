#include <cstdint>
#include <cstring>
#include <fstream>

#include "ffsv/error.hpp"
#include "ffsv/features.hpp"

namespace ffsv {

void write_features(const FeatureMatrix& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("write_features: cannot open: " + path);
  os.write("FFSV", 4);
  std::uint32_t dims[2] = {static_cast<std::uint32_t>(f.rows),
                           static_cast<std::uint32_t>(f.cols)};
  os.write(reinterpret_cast<const char*>(dims), 8);
  for (double d : f.v) {
    float x = static_cast<float>(d);
    os.write(reinterpret_cast<const char*>(&x), 4);
  }
  if (!os) throw Error("write_features: write failed: " + path);
}

FeatureMatrix read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("read_features: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FFSV", 4) != 0)
    throw Error("read_features: bad magic: " + path);
  std::uint32_t dims[2];
  is.read(reinterpret_cast<char*>(dims), 8);
  if (!is) throw Error("read_features: truncated header: " + path);
  FeatureMatrix f(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
  for (auto& d : f.v) {
    float x;
    is.read(reinterpret_cast<char*>(&x), 4);
    if (!is) throw Error("read_features: truncated data: " + path);
    d = static_cast<double>(x);
  }
  return f;
}

}  // namespace ffsv
