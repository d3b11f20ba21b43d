#include "cgep/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "cgep/util.hpp"

namespace cgep {

namespace {

constexpr char kMagic[8] = {'C', 'G', 'E', 'P', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint truncated while reading " + what);
  return v;
}

std::string get_bytes(std::istream& in, size_t n, const std::string& what) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error("checkpoint truncated while reading " + what);
  return s;
}

std::ifstream open_checked(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + file.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw Error(file.string() + " is not a checkpoint file");
  uint32_t version = get<uint32_t>(in, "version");
  if (version != kVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version));
  return in;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file,
                     const std::vector<std::pair<std::string, Tensor<float>>>& params,
                     const std::string& meta_json) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + file.string());
  out.write(kMagic, 8);
  put<uint32_t>(out, kVersion);
  put<uint64_t>(out, meta_json.size());
  out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
  put<uint64_t>(out, params.size());
  for (const auto& [name, tensor] : params) {
    const Mat<float>& v = tensor.value();
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint32_t>(out, static_cast<uint32_t>(v.rows()));
    put<uint32_t>(out, static_cast<uint32_t>(v.cols()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(v.size())));
  }
  if (!out) throw Error("failed writing checkpoint " + file.string());
}

std::string checkpoint_meta(const std::filesystem::path& file) {
  std::ifstream in = open_checked(file);
  uint64_t meta_len = get<uint64_t>(in, "metadata length");
  return get_bytes(in, meta_len, "metadata");
}

std::string load_checkpoint(const std::filesystem::path& file,
                            std::vector<std::pair<std::string, Tensor<float>>> params) {
  std::ifstream in = open_checked(file);
  uint64_t meta_len = get<uint64_t>(in, "metadata length");
  std::string meta = get_bytes(in, meta_len, "metadata");

  std::map<std::string, Tensor<float>*> wanted;
  for (auto& [name, tensor] : params)
    if (!wanted.emplace(name, &tensor).second)
      throw Error("load_checkpoint: duplicate parameter name " + name);

  uint64_t count = get<uint64_t>(in, "parameter count");
  if (count != wanted.size())
    throw Error("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                std::to_string(wanted.size()));
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = get<uint32_t>(in, "parameter name length");
    std::string name = get_bytes(in, name_len, "parameter name");
    uint32_t rows = get<uint32_t>(in, name + " rows");
    uint32_t cols = get<uint32_t>(in, name + " cols");
    auto it = wanted.find(name);
    if (it == wanted.end()) throw Error("checkpoint parameter " + name + " not in model");
    Mat<float>& v = it->second->value();
    if (v.rows() != static_cast<long>(rows) || v.cols() != static_cast<long>(cols))
      throw Error("checkpoint parameter " + name + " is " + std::to_string(rows) + "x" +
                  std::to_string(cols) + ", model expects " + std::to_string(v.rows()) +
                  "x" + std::to_string(v.cols()));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(v.size())));
    if (!in) throw Error("checkpoint truncated while reading " + name);
    wanted.erase(it);
  }
  if (!wanted.empty())
    throw Error("checkpoint is missing parameter " + wanted.begin()->first);
  return meta;
}

}  // namespace cgep
