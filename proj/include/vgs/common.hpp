#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vgs {

// Deterministic RNG. Distributions are implemented here rather than taken
// from <random> so that streams are reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi);

  // Standard normal via Box-Muller; the paired value is cached.
  double gaussian();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Stable seed for a named substream of a master seed, so that adding a new
// consumer of randomness never shifts the streams of existing ones.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

// Dense row-major matrix of doubles. Used for feature sequences, image
// vectors and codebooks; the autograd Tensor is separate.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  std::span<double> row(int r) {
    return {v.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {v.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }

  bool empty() const { return rows == 0 || cols == 0; }
};

// Matrix restricted to its first `rows` rows, sharing no storage.
Matrix take_rows(const Matrix& m, int rows);

// Thread cap: GSL_THREADS if set (must parse as a positive integer),
// otherwise hardware concurrency.
int max_threads();

// Runs fn(i) for i in [0, n). Work items must write to disjoint locations;
// the partition of indices onto threads is not part of the contract.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Shortest round-trippable decimal formatting for doubles, used by every
// CSV writer so that reruns are byte-comparable.
std::string format_double(double x);

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace vgs
