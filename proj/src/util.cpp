#include "cgep/util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cgep {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

uint64_t hash_file(const std::filesystem::path& path) {
  return fnv1a64(read_file(path));
}

uint64_t hash_tree(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(dir)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : files) {
    std::string rel = std::filesystem::relative(f, dir).generic_string();
    h = fnv1a64(rel.data(), rel.size(), h);
    std::string body = read_file(f);
    h = fnv1a64(body.data(), body.size(), h);
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace cgep
