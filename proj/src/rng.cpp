#include "ugg/rng.hpp"

#include <cmath>

namespace ugg {
namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// splitmix64 finalizer
uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

RngStream RngStream::fork(uint64_t key) const {
  return RngStream(mix64(seed_ ^ mix64(key * kGolden + 0x5851f42d4c957f2dull)));
}

RngStream RngStream::fork(const std::string& key) const { return fork(fnv1a(key)); }

uint64_t RngStream::next_u64() { return mix64(seed_ + kGolden * ++counter_); }

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int64_t RngStream::uniform_int(int64_t n) {
  check(n > 0, "uniform_int needs n > 0");
  // Lemire's multiply-shift; bias is below 2^-64 * n, irrelevant here.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<int64_t>(m >> 64);
}

double RngStream::normal() {
  // Box-Muller, cosine branch only; two u64 per draw keeps the counter layout fixed.
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Tensor RngStream::gaussian(Shape shape) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = normal();
  return t;
}

Tensor RngStream::uniform_tensor(Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
  return t;
}

std::vector<int64_t> RngStream::permutation(int64_t n) {
  std::vector<int64_t> p(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
  for (int64_t i = n - 1; i > 0; --i) std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(uniform_int(i + 1))]);
  return p;
}

}  // namespace ugg
