#include "bubbleforge/green.hpp"

#include <cmath>
#include <mutex>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

double gamma(Point x, Point y) {
  const double r = distance(x, y);
  if (!(r > 0.0)) throw GeometryError("Gamma is singular at coincident points");
  return 4.0 * std::log(r);
}

GreenEvaluator::GreenEvaluator(LaplacianPtr op) : op_(std::move(op)), quantum_(op_->grid().min_spacing() / 16.0) {}

std::shared_ptr<const ScalarField> GreenEvaluator::regular_part(Point xi) const {
  const Grid& g = op_->grid();
  if (!(g.domain().signed_distance(xi) < -2.0 * g.spacing()))
    throw ConstructionError("pole lies within 2h of the boundary");
  const Key key{std::llround(xi.x / quantum_), std::llround(xi.y / quantum_)};
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const Point pole{static_cast<double>(key.first) * quantum_, static_cast<double>(key.second) * quantum_};
  auto field = std::make_shared<const ScalarField>(
      harmonic_extension(*op_, [pole](Point x) { return 4.0 * std::log(distance(x, pole)); }));
  std::unique_lock lock(mutex_);
  return cache_.try_emplace(key, std::move(field)).first->second;
}

double GreenEvaluator::regular(Point x, Point xi) const { return interpolate(*regular_part(xi), x); }

double GreenEvaluator::green(Point x, Point xi) const {
  if (distance(x, xi) < 2.0 * grid().local_spacing(xi))
    throw ConstructionError("Green evaluation too close to the pole");
  return regular(x, xi) - gamma(x, xi);
}

double GreenEvaluator::robin_diagonal(Point xi) const { return regular(xi, xi); }

std::size_t GreenEvaluator::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

}  // namespace bubbleforge
