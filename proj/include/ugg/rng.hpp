#pragma once

#include <cstdint>
#include <string>

#include "ugg/tensor.hpp"

namespace ugg {

// Counter-based random stream. A draw depends only on (seed, counter), so
// streams can be forked per work item and produce the same values regardless
// of execution order.
class RngStream {
 public:
  explicit RngStream(uint64_t seed, uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

  // Child stream keyed by index or label; independent of this stream's counter.
  RngStream fork(uint64_t key) const;
  RngStream fork(const std::string& key) const;

  uint64_t next_u64();
  double uniform();                 // [0, 1)
  double uniform(double lo, double hi);
  int64_t uniform_int(int64_t n);   // {0, ..., n-1}
  double normal();                  // N(0, 1)

  Tensor gaussian(Shape shape);
  Tensor uniform_tensor(Shape shape, double lo, double hi);

  // Fisher-Yates permutation of {0..n-1}.
  std::vector<int64_t> permutation(int64_t n);

 private:
  uint64_t seed_;
  uint64_t counter_;
};

}  // namespace ugg
