#include "ugg/params.hpp"

#include <fstream>
#include <sstream>

#include "ugg/common.hpp"

namespace ugg {

Tensor& ParamStore::create(const std::string& path, const Shape& shape, bool trainable) {
  check(!has(path), "parameter '" + path + "' already exists");
  Entry e;
  e.path = path;
  e.value = Tensor::zeros(shape);
  e.grad = Tensor::zeros(shape);
  e.trainable = trainable;
  entries_.push_back(std::move(e));
  index_[path] = entries_.size() - 1;
  return entries_.back().value;
}

const ParamStore::Entry& ParamStore::entry(const std::string& path) const {
  auto it = index_.find(path);
  check(it != index_.end(), "unknown parameter '" + path + "'");
  return entries_[it->second];
}

ParamStore::Entry& ParamStore::entry(const std::string& path) {
  return const_cast<Entry&>(static_cast<const ParamStore*>(this)->entry(path));
}

Tensor& ParamStore::get(const std::string& path) { return entry(path).value; }
const Tensor& ParamStore::get(const std::string& path) const { return entry(path).value; }
Tensor& ParamStore::grad(const std::string& path) { return entry(path).grad; }

void ParamStore::zero_grads() {
  for (Entry& e : entries_) e.grad.fill(0.0);
}

std::vector<std::string> ParamStore::paths() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.path);
  return out;
}

int64_t ParamStore::num_scalars(bool trainable_only) const {
  int64_t n = 0;
  for (const Entry& e : entries_)
    if (!trainable_only || e.trainable) n += e.value.size();
  return n;
}

namespace {
constexpr char kMagic[4] = {'U', 'G', 'G', 'C'};
constexpr uint32_t kVersion = 1;
}  // namespace

void ParamStore::save(const std::string& file) const {
  std::ofstream os(file, std::ios::binary);
  check(os.good(), "cannot open '" + file + "' for writing");
  os.write(kMagic, 4);
  uint32_t ver = kVersion;
  os.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  std::ostringstream manifest;
  for (const auto& [k, v] : meta_) manifest << "meta " << k << " " << v << "\n";
  for (const Entry& e : entries_) {
    manifest << "param " << e.path << " " << (e.trainable ? 1 : 0) << " " << e.value.rank();
    for (int64_t d = 0; d < e.value.rank(); ++d) manifest << " " << e.value.dim(d);
    manifest << "\n";
  }
  manifest << "end\n";
  const std::string text = manifest.str();
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Entry& e : entries_) {
    for (int64_t i = 0; i < e.value.size(); ++i) {
      const float f = static_cast<float>(e.value[i]);
      os.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
  check(os.good(), "write failure on '" + file + "'");
}

ParamStore ParamStore::load(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  check(is.good(), "cannot open checkpoint '" + file + "'");
  char magic[4];
  is.read(magic, 4);
  check(is.good() && std::equal(magic, magic + 4, kMagic),
        "'" + file + "' is not a UGGC checkpoint");
  uint32_t ver = 0;
  is.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  check(is.good() && ver == kVersion,
        "unsupported UGGC version " + std::to_string(ver) + " in '" + file + "'");
  ParamStore store;
  std::string line;
  while (std::getline(is, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(value.begin());
      store.meta_[key] = value;
    } else if (kind == "param") {
      std::string path;
      int trainable = 1;
      int64_t rank = 0;
      ls >> path >> trainable >> rank;
      check(!ls.fail() && rank >= 0, "malformed manifest line in '" + file + "': " + line);
      Shape shape(static_cast<size_t>(rank));
      for (int64_t d = 0; d < rank; ++d) ls >> shape[static_cast<size_t>(d)];
      check(!ls.fail(), "malformed manifest shape in '" + file + "': " + line);
      store.create(path, shape, trainable != 0);
    } else {
      check(false, "unknown manifest record '" + kind + "' in '" + file + "'");
    }
  }
  check(line == "end", "truncated manifest in '" + file + "'");
  for (Entry& e : store.entries_) {
    for (int64_t i = 0; i < e.value.size(); ++i) {
      float f = 0.0f;
      is.read(reinterpret_cast<char*>(&f), sizeof(f));
      check(is.good(), "truncated parameter blob for '" + e.path + "' in '" + file + "'");
      e.value[i] = static_cast<double>(f);
    }
  }
  return store;
}

}  // namespace ugg
