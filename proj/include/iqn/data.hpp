#pragma once

// Problem sources: LIBSVM text files and the seeded synthetic quadratic
// generator.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Uniform doubles are formed from the top 53 bits of each
// draw rather than std::uniform_real_distribution (whose algorithm is
// implementation-defined), so seeded outputs match across platforms.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "iqn/objectives.hpp"

namespace iqn {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  /// Uniform in [lo, hi]; returns lo exactly when lo == hi.
  double uniform(double lo, double hi) {
    if (lo == hi) return lo;
    const double v = lo + (hi - lo) * uniform01();
    return v < lo ? lo : (v > hi ? hi : v);
  }
  /// Standard normal via Box-Muller.
  double normal();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

struct LibsvmData {
  std::vector<SparseRow> rows;
  std::size_t dim = 0;
};

/// Parses LIBSVM text: `label (index:value)*` per line.
/// Labels: +1/1 -> 1, -1/0 -> 0, 2 -> 0. Blank lines and lines starting
/// with '#' are skipped; a trailing `# comment` on a data line is ignored.
LibsvmData parse_libsvm(std::istream& in);
LibsvmData load_libsvm(const std::string& path);

/// Writes rows in the grammar parse_libsvm accepts. Label 1 is written as
/// "+1" and label 0 as "-1"; values use the shortest round-trip form.
void write_libsvm(std::ostream& out, const std::vector<SparseRow>& rows);

struct GeneratorSpec {
  std::size_t n = 1;
  std::size_t d = 2;
  double xi = 0.0;
  double b_max = 1000.0;
  std::uint64_t seed = 0;
};

/// A_i = diag(a), first d/2 entries ~ U[1, 10^{xi/2}], rest
/// ~ U[10^{-xi/2}, 1]; b_i coordinates ~ U[0, b_max].
QuadraticComponents generate_quadratic(const GeneratorSpec& spec);

/// x0 = alpha_scale * v with v_j ~ U[0, 1].
Vector initial_point(std::size_t d, double alpha_scale, std::uint64_t seed);

/// Synthetic binary classification rows for tests and demos: Gaussian
/// features with `density` fraction of non-zeros, labels from a random
/// separating direction with logistic noise.
std::vector<SparseRow> generate_logistic_rows(std::size_t n, std::size_t d,
                                              double density,
                                              std::uint64_t seed);

/// Text format for quadratic components (see README).
void write_quadratic(std::ostream& out, const QuadraticComponents& q);
QuadraticComponents read_quadratic(std::istream& in);

}  // namespace iqn
