#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ugg/tensor.hpp"

namespace ugg {

// Named parameter tensors in insertion order plus a matching gradient slot per
// entry. Entry order defines the blob order of the checkpoint file.
class ParamStore {
 public:
  struct Entry {
    std::string path;
    Tensor value;
    Tensor grad;
    bool trainable = true;
  };

  Tensor& create(const std::string& path, const Shape& shape, bool trainable = true);
  bool has(const std::string& path) const { return index_.count(path) > 0; }
  Tensor& get(const std::string& path);
  const Tensor& get(const std::string& path) const;
  Tensor& grad(const std::string& path);
  bool trainable(const std::string& path) const { return entry(path).trainable; }

  void zero_grads();
  std::vector<std::string> paths() const;
  size_t num_entries() const { return entries_.size(); }
  const Entry& entry_at(size_t i) const { return entries_[i]; }
  Entry& entry_at(size_t i) { return entries_[i]; }
  int64_t num_scalars(bool trainable_only = false) const;

  // Free-form metadata persisted with the checkpoint (config hash, counts...).
  std::map<std::string, std::string>& meta() { return meta_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }

  // "UGGC" checkpoint: magic, u32 version, text manifest, f32 blobs in
  // manifest order.
  void save(const std::string& file) const;
  static ParamStore load(const std::string& file);

 private:
  const Entry& entry(const std::string& path) const;
  Entry& entry(const std::string& path);
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
  std::map<std::string, std::string> meta_;
};

}  // namespace ugg
