#pragma once

// Domains, tensor-product grids, node classification and the field
// operations every other module computes on: sampling, interpolation,
// quadrature, gradients and CSV dumps.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace bubbleforge {

struct Point {
  double x = 0.0;
  double y = 0.0;

  constexpr Point operator+(Point o) const { return {x + o.x, y + o.y}; }
  constexpr Point operator-(Point o) const { return {x - o.x, y - o.y}; }
  constexpr Point operator*(double a) const { return {a * x, a * y}; }
  constexpr Point& operator+=(Point o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Point& operator-=(Point o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr bool operator==(const Point&) const = default;
};

constexpr Point operator*(double a, Point p) { return p * a; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

using PointFunction = std::function<double(Point)>;

enum class DomainKind { unit_square, unit_disk, rectangle };

/// Bounded convex planar domain described by an exact signed distance.
/// Unit square is (0,1)^2, the unit disk is centred at the origin, a
/// rectangle spans (0,width) x (0,height).
class Domain {
 public:
  static Domain unit_square();
  static Domain unit_disk();
  static Domain rectangle(double width, double height);
  /// Accepts "square", "disk", "rectangle:WxH".
  static Domain parse(std::string_view spec);

  DomainKind kind() const { return kind_; }
  double width() const { return width_; }
  double height() const { return height_; }
  Point lower() const;
  Point upper() const;
  Point center() const;
  double inradius() const;

  /// Negative inside, zero on the boundary, positive outside.
  double signed_distance(Point p) const;
  bool contains(Point p) const { return signed_distance(p) < 0.0; }

  /// Distance from `origin` (inside) to the boundary along unit `dir`.
  double ray_exit(Point origin, Point dir) const;
  /// Boundary crossing on the segment from `inside` to `outside`.
  Point segment_crossing(Point inside, Point outside) const;
  /// Nearest boundary point.
  Point project(Point p) const;

  std::string name() const;

 private:
  Domain(DomainKind kind, double w, double h) : kind_(kind), width_(w), height_(h) {}

  DomainKind kind_;
  double width_;
  double height_;
};

enum class NodeKind : std::uint8_t { interior, boundary, exterior };

/// One axis arm of the stencil at an interior node.
struct Arm {
  std::size_t node = 0;      ///< grid index of the axis neighbour
  double length = 0.0;       ///< distance to the arm's end point
  bool ends_on_boundary = false;
  bool cut = false;          ///< neighbour is exterior, end point is the crossing
  Point at;                  ///< end point (neighbour node or crossing)
};

enum Direction : int { west = 0, east = 1, south = 2, north = 3 };

/// Geometric clustering of grid lines around given coordinates. Spacing
/// grows linearly with distance from the nearest focus,
/// h(x) = min(h_far, h_min + growth * |x - focus|), with h_far chosen so
/// the axis holds exactly n nodes. Foci become grid nodes.
struct GradingSpec {
  std::vector<double> foci_x;
  std::vector<double> foci_y;
  double h_min = 0.0;
  double growth = 0.1;
};

class Grid {
 public:
  /// Uniform grid with n nodes per axis over the domain's bounding box.
  static std::shared_ptr<const Grid> uniform(const Domain& domain, int n);
  static std::shared_ptr<const Grid> graded(const Domain& domain, int n, const GradingSpec& spec);
  static std::shared_ptr<const Grid> from_lines(const Domain& domain, std::vector<double> xs,
                                                std::vector<double> ys);

  const Domain& domain() const { return domain_; }
  int n() const { return static_cast<int>(xs_.size()); }
  int nx() const { return static_cast<int>(xs_.size()); }
  int ny() const { return static_cast<int>(ys_.size()); }
  std::span<const double> xs() const { return xs_; }
  std::span<const double> ys() const { return ys_; }
  bool is_uniform() const { return uniform_; }

  /// Largest line spacing over both axes (the uniform h).
  double spacing() const { return max_spacing_; }
  double min_spacing() const { return min_spacing_; }
  double spacing_x() const;
  double spacing_y() const;
  /// Largest width of the cells touching p.
  double local_spacing(Point p) const;

  std::size_t node_count() const { return xs_.size() * ys_.size(); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * xs_.size() + i; }
  int column(std::size_t node) const { return static_cast<int>(node % xs_.size()); }
  int row(std::size_t node) const { return static_cast<int>(node / xs_.size()); }
  Point node(std::size_t idx) const { return {xs_[column(idx)], ys_[row(idx)]}; }
  NodeKind kind(std::size_t idx) const { return kinds_[idx]; }
  bool in_closure(std::size_t idx) const { return kinds_[idx] != NodeKind::exterior; }

  std::size_t interior_count() const { return interior_nodes_.size(); }
  std::int64_t interior_index(std::size_t node) const { return interior_index_[node]; }
  std::size_t interior_node(std::size_t k) const { return interior_nodes_[k]; }
  std::span<const std::size_t> interior_nodes() const { return interior_nodes_; }
  const std::array<Arm, 4>& arms(std::size_t interior_k) const { return arms_[interior_k]; }
  /// True when some stencil arm ends on a boundary crossing between nodes.
  bool has_cut_arms() const { return has_cut_arms_; }

  /// Dual-cell widths of an interior node (half the sum of its arms).
  double dual_width_x(std::size_t interior_k) const;
  double dual_width_y(std::size_t interior_k) const;

  struct CellLocation {
    int i = 0;
    int j = 0;
    double tx = 0.0;  ///< local coordinate in [0,1]
    double ty = 0.0;
  };
  /// Cell of the bounding box containing p, nullopt outside the box.
  std::optional<CellLocation> locate(Point p) const;
  /// Closure node nearest to p.
  std::size_t nearest_node(Point p) const;
  /// Boundary data is evaluated here for boundary nodes.
  Point boundary_projection(std::size_t idx) const { return domain_.project(node(idx)); }

  /// Nodal weights w with integrate(f) == sum_i w_i f_i (exterior ghost
  /// nodes of cut cells carry weight too). Computed once, thread-safe.
  const std::vector<double>& quadrature_weights() const;

 private:
  Grid(Domain domain, std::vector<double> xs, std::vector<double> ys);
  void classify();

  Domain domain_;
  std::vector<double> xs_;
  std::vector<double> ys_;
  bool uniform_ = false;
  double max_spacing_ = 0.0;
  double min_spacing_ = 0.0;
  std::vector<NodeKind> kinds_;
  std::vector<std::int64_t> interior_index_;
  std::vector<std::size_t> interior_nodes_;
  std::vector<std::array<Arm, 4>> arms_;
  bool has_cut_arms_ = false;
  mutable std::once_flag weights_once_;
  mutable std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Nodal values on a grid. Exterior nodes carry ghost values (analytic
/// samples, or linear extrapolation through the boundary data) so that
/// interpolation and quadrature in cut cells stay consistent.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridPtr grid, double value = 0.0);
  ScalarField(GridPtr grid, std::vector<double> values);

  static ScalarField sample(GridPtr grid, const PointFunction& f);
  /// Interior values from `interior`, boundary nodes from `boundary`,
  /// exterior ghosts extrapolated.
  static ScalarField from_interior(GridPtr grid, const Eigen::VectorXd& interior,
                                   const PointFunction& boundary = nullptr);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  Eigen::VectorXd interior_vector() const;
  /// Refill exterior ghost values from interior values and boundary data.
  void fill_ghosts(const PointFunction& boundary = nullptr);

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double a);
  ScalarField& operator+=(double a);

  template <class F>
  ScalarField map(F&& f) const {
    ScalarField out(*this);
    for (double& v : out.values_) v = f(v);
    return out;
  }

  /// Extremes over closure (interior and boundary) nodes.
  double max_closure() const;
  double min_closure() const;
  double max_abs_interior() const;

 private:
  void require_same_grid(const ScalarField& o) const;

  GridPtr grid_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double a, ScalarField f);
/// Nodewise product.
ScalarField hadamard(const ScalarField& a, const ScalarField& b);

struct VectorField {
  ScalarField dx;
  ScalarField dy;
};

/// Bilinear interpolation from the enclosing cell. Throws GeometryError
/// for points outside the closed domain.
double interpolate(const ScalarField& field, Point p);

/// Composite trapezoid quadrature over the domain; cut cells use the
/// exact polygonal fraction of the cell inside the boundary.
double integrate(const ScalarField& field);
/// Quadrature over the part of the domain where `region_sd` < 0.
double integrate_region(const ScalarField& field, const PointFunction& region_sd);

/// Central differences at interior nodes, one-sided where an axis
/// neighbour is outside the closed domain.
VectorField gradient(const ScalarField& field);

/// Piecewise bicubic Hermite interpolant, C1 across cells, exposing its
/// exact gradient.
class SmoothSampler {
 public:
  explicit SmoothSampler(const ScalarField& field);

  double value(Point p) const;
  /// Returns value and writes the gradient of the interpolant.
  double value_and_gradient(Point p, Point& grad) const;

 private:
  GridPtr grid_;
  std::vector<double> f_;
  std::vector<double> fx_;
  std::vector<double> fy_;
  std::vector<double> fxy_;
};

/// CSV with header `x,y,value`, row-major over nodes, exterior omitted.
void write_csv(const ScalarField& field, std::ostream& out);

/// A field read from a CSV dump on some tensor grid, sampled by bilinear
/// interpolation (nearest closure node near the boundary).
class TabulatedField {
 public:
  static TabulatedField read_csv(std::istream& in);
  double operator()(Point p) const;

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> values_;  ///< NaN where absent
};

}  // namespace bubbleforge
