#pragma once

// Green's function of -Delta with the 8 pi normalisation,
// -Delta_x G(x, xi) = 8 pi delta_xi, and its regular part.

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <utility>

#include "bubbleforge/elliptic.hpp"

namespace bubbleforge {

/// Fundamental solution in the 8 pi normalisation, 4 log|x - y|.
/// Throws GeometryError for coincident points.
double gamma(Point x, Point y);

/// Cached regular parts H(., xi), keyed by the pole quantised to
/// min_spacing / 16. Safe for concurrent use.
class GreenEvaluator {
 public:
  explicit GreenEvaluator(LaplacianPtr op);

  const DiscreteLaplacian& laplacian() const { return *op_; }
  const Grid& grid() const { return op_->grid(); }

  /// Harmonic extension of Gamma(. - xi). Throws ConstructionError when
  /// xi is within 2h of the boundary.
  std::shared_ptr<const ScalarField> regular_part(Point xi) const;
  /// H(x, xi) by bilinear interpolation.
  double regular(Point x, Point xi) const;
  /// G(x, xi) = H(x, xi) - Gamma(x - xi). Refused for |x - xi| < 2h.
  double green(Point x, Point xi) const;
  /// H(xi, xi).
  double robin_diagonal(Point xi) const;

  std::size_t cache_size() const;
  double quantum() const { return quantum_; }

 private:
  using Key = std::pair<std::int64_t, std::int64_t>;

  LaplacianPtr op_;
  double quantum_;
  mutable std::shared_mutex mutex_;
  mutable std::map<Key, std::shared_ptr<const ScalarField>> cache_;
};

}  // namespace bubbleforge
