#pragma once

#include <stdexcept>
#include <string>

namespace ovallab {

/// Symmetry reduction used to collapse a hypersurface in R^{n+1} to a
/// low-dimensional grid of reduced angles.
///
/// Axial:  O(k) x O(n+1-k) symmetric surfaces; one reduced angle.
/// Block:  Z_2^k x O(n+1-k) symmetric surfaces; k reduced angles
///         (implemented for k <= 2).
enum class Reduction { Axial, Block };

struct SymmetrySpec {
  int n = 2;  // hypersurface dimension, surface lives in R^{n+1}
  int k = 1;  // number of flat directions, 1 <= k <= n-1
  Reduction reduction = Reduction::Axial;

  SymmetrySpec() = default;
  SymmetrySpec(int n_, int k_, Reduction red = Reduction::Axial)
      : n(n_), k(k_), reduction(red) {
    validate();
  }

  void validate() const {
    if (n < 2) throw std::invalid_argument("SymmetrySpec: need n >= 2");
    if (k < 1 || k > n - 1)
      throw std::invalid_argument("SymmetrySpec: need 1 <= k <= n-1, got k=" +
                                  std::to_string(k) + ", n=" + std::to_string(n));
    if (reduction == Reduction::Block && k > 2)
      throw std::invalid_argument("SymmetrySpec: Block reduction implemented for k <= 2 only");
  }

  bool operator==(const SymmetrySpec& o) const {
    return n == o.n && k == o.k && reduction == o.reduction;
  }
};

inline const char* reduction_name(Reduction r) {
  return r == Reduction::Axial ? "axial" : "block";
}

}  // namespace ovallab
