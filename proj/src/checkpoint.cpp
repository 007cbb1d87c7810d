#include "ffsv/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "ffsv/error.hpp"

namespace ffsv {

namespace {

constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& is, const std::string& path) {
  std::uint32_t v;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw Error("checkpoint: truncated file: " + path);
  return v;
}

struct Entry {
  std::vector<int> shape;
  std::vector<float> data;
};

std::map<std::string, Entry> read_entries(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "FFNN", 4) != 0)
    throw Error("checkpoint: bad magic: " + path);
  if (read_u32(is, path) != kVersion)
    throw Error("checkpoint: unsupported version: " + path);

  std::map<std::string, Entry> entries;
  while (true) {
    std::uint32_t name_len;
    is.read(reinterpret_cast<char*>(&name_len), 4);
    if (is.eof()) break;
    if (!is) throw Error("checkpoint: truncated file: " + path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t rank = read_u32(is, path);
    Entry e;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = read_u32(is, path);
      e.shape.push_back(static_cast<int>(d));
      count *= d;
    }
    e.data.resize(count);
    is.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(count * 4));
    if (!is) throw Error("checkpoint: truncated tensor data: " + path);
    entries.emplace(std::move(name), std::move(e));
  }
  return entries;
}

}  // namespace

void save_checkpoint(MicroNet& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("checkpoint: cannot open for writing: " + path);
  os.write("FFNN", 4);
  write_u32(os, kVersion);
  for (const auto& p : net.params()) {
    write_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(os, static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) write_u32(os, static_cast<std::uint32_t>(d));
    for (double v : *p.value) {
      const float x = static_cast<float>(v);
      os.write(reinterpret_cast<const char*>(&x), 4);
    }
  }
  if (!os) throw Error("checkpoint: write failed: " + path);
}

void load_checkpoint(MicroNet& net, const std::string& path) {
  auto entries = read_entries(path);
  for (auto& p : net.params()) {
    auto it = entries.find(p.name);
    if (it == entries.end())
      throw Error("checkpoint: missing tensor '" + p.name + "' in " + path);
    if (it->second.shape != p.shape)
      throw Error("checkpoint: shape mismatch for '" + p.name + "' in " + path);
    if (it->second.data.size() != p.value->size())
      throw Error("checkpoint: size mismatch for '" + p.name + "' in " + path);
    for (std::size_t i = 0; i < p.value->size(); ++i)
      (*p.value)[i] = static_cast<double>(it->second.data[i]);
    entries.erase(it);
  }
  if (!entries.empty())
    throw Error("checkpoint: unknown tensor '" + entries.begin()->first +
                "' in " + path);
}

std::map<std::string, std::vector<int>> read_checkpoint_shapes(const std::string& path) {
  std::map<std::string, std::vector<int>> shapes;
  for (const auto& [name, entry] : read_entries(path)) shapes[name] = entry.shape;
  return shapes;
}

}  // namespace ffsv
