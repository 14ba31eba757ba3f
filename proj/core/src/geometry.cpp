#include "bubbleforge/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "bubbleforge/errors.hpp"

namespace bubbleforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double parse_double(std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("cannot parse number '" + std::string(text) + "'");
  return v;
}

// Derivative at t of the quadratic through (a,fa), (b,fb), (c,fc).
double quad_derivative(double t, double a, double fa, double b, double fb, double c, double fc) {
  return fa * (2 * t - b - c) / ((a - b) * (a - c)) + fb * (2 * t - a - c) / ((b - a) * (b - c)) +
         fc * (2 * t - a - b) / ((c - a) * (c - b));
}

// Derivative along one line of values at index i, using whichever of the
// neighbours `usable` admits: central, else one-sided three point, else two point.
template <class Usable>
double line_derivative(std::span<const double> x, const double* f, std::ptrdiff_t stride, int i, int n,
                       Usable usable) {
  auto v = [&](int k) { return f[static_cast<std::ptrdiff_t>(k) * stride]; };
  bool left = i > 0 && usable(i - 1);
  bool right = i < n - 1 && usable(i + 1);
  if (left && right) return quad_derivative(x[i], x[i - 1], v(i - 1), x[i], v(i), x[i + 1], v(i + 1));
  if (right) {
    if (i < n - 2 && usable(i + 2))
      return quad_derivative(x[i], x[i], v(i), x[i + 1], v(i + 1), x[i + 2], v(i + 2));
    return (v(i + 1) - v(i)) / (x[i + 1] - x[i]);
  }
  if (left) {
    if (i > 1 && usable(i - 2))
      return quad_derivative(x[i], x[i - 2], v(i - 2), x[i - 1], v(i - 1), x[i], v(i));
    return (v(i) - v(i - 1)) / (x[i] - x[i - 1]);
  }
  return 0.0;
}

Point bisect_crossing(const PointFunction& sd, Point inside, Point outside) {
  Point a = inside;
  Point b = outside;
  for (int it = 0; it < 200; ++it) {
    Point mid = 0.5 * (a + b);
    if (mid == a || mid == b) break;
    if (sd(mid) <= 0.0)
      a = mid;
    else
      b = mid;
  }
  return 0.5 * (a + b);
}

// Visits every cell of the bounding box that meets {sd <= 0}, calling
// emit(node, weight) so that sum(weight * f(node)) is the cell integral
// of the bilinear interpolant over the inside polygon.
template <class Emit>
void accumulate_cells(const Grid& grid, const PointFunction& sd, Emit emit) {
  auto xs = grid.xs();
  auto ys = grid.ys();
  const int nx = grid.nx();
  const int ny = grid.ny();
  std::vector<double> sdv(grid.node_count());
  for (std::size_t k = 0; k < sdv.size(); ++k) sdv[k] = sd(grid.node(k));
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const std::size_t c[4] = {grid.index(i, j), grid.index(i + 1, j), grid.index(i + 1, j + 1),
                                grid.index(i, j + 1)};
      int inside = 0;
      for (auto k : c) inside += sdv[k] <= 0.0;
      if (inside == 0) continue;
      const double x0 = xs[i], x1 = xs[i + 1], y0 = ys[j], y1 = ys[j + 1];
      const double dx = x1 - x0, dy = y1 - y0;
      if (inside == 4) {
        const double w = 0.25 * dx * dy;
        for (auto k : c) emit(k, w);
        continue;
      }
      Point pts[8];
      int np = 0;
      for (int e = 0; e < 4; ++e) {
        const std::size_t a = c[e], b = c[(e + 1) % 4];
        const bool ain = sdv[a] <= 0.0, bin = sdv[b] <= 0.0;
        if (ain) pts[np++] = grid.node(a);
        if (ain != bin) {
          pts[np++] = ain ? bisect_crossing(sd, grid.node(a), grid.node(b))
                          : bisect_crossing(sd, grid.node(b), grid.node(a));
        }
      }
      double area2 = 0.0, cx = 0.0, cy = 0.0;
      for (int q = 0; q < np; ++q) {
        const Point p = pts[q], r = pts[(q + 1) % np];
        const double cr = p.x * r.y - r.x * p.y;
        area2 += cr;
        cx += (p.x + r.x) * cr;
        cy += (p.y + r.y) * cr;
      }
      const double area = 0.5 * std::abs(area2);
      if (area <= 0.0) continue;
      cx /= 3.0 * area2;
      cy /= 3.0 * area2;
      const double tx = (cx - x0) / dx, ty = (cy - y0) / dy;
      emit(c[0], area * (1 - tx) * (1 - ty));
      emit(c[1], area * tx * (1 - ty));
      emit(c[2], area * tx * ty);
      emit(c[3], area * (1 - tx) * ty);
    }
  }
}

// ---- graded axis -------------------------------------------------------

struct AxisDensity {
  double h_min;
  double growth;
  double h_far;
  double d_switch() const { return (h_far - h_min) / growth; }
  // Integral of 1/h over distances [0, d] from a focus.
  double cumulative(double d) const {
    const double ds = d_switch();
    if (d <= ds) return std::log1p(growth * d / h_min) / growth;
    return std::log1p(growth * ds / h_min) / growth + (d - ds) / h_far;
  }
  double inverse(double v) const {
    const double ds = d_switch();
    const double vs = std::log1p(growth * ds / h_min) / growth;
    if (v <= vs) return h_min * std::expm1(growth * v) / growth;
    return ds + (v - vs) * h_far;
  }
};

std::vector<double> graded_axis(double lo, double hi, int n, std::vector<double> foci, double h_min,
                                double growth) {
  const double len = hi - lo;
  std::vector<double> out(n);
  std::sort(foci.begin(), foci.end());
  std::vector<double> merged;
  for (std::size_t a = 0; a < foci.size();) {
    std::size_t b = a;
    double sum = 0.0;
    while (b < foci.size() && foci[b] - foci[a] < 4.0 * h_min) sum += foci[b++];
    const double f = sum / static_cast<double>(b - a);
    if (f > lo + 4.0 * h_min && f < hi - 4.0 * h_min) merged.push_back(f);
    a = b;
  }
  if (merged.empty()) {
    for (int i = 0; i < n; ++i) out[i] = lo + len * i / (n - 1);
    return out;
  }
  std::vector<double> anchors{lo};
  anchors.insert(anchors.end(), merged.begin(), merged.end());
  anchors.push_back(hi);
  const std::size_t nseg = anchors.size() - 1;

  // Each segment is an end segment (one focus end) or spans two foci.
  auto segment_integral = [&](const AxisDensity& d, std::size_t s) {
    const double l = anchors[s + 1] - anchors[s];
    if (s == 0 || s == nseg - 1) return d.cumulative(l);
    return 2.0 * d.cumulative(0.5 * l);
  };
  auto total = [&](double h_far) {
    AxisDensity d{h_min, growth, h_far};
    double t = 0.0;
    for (std::size_t s = 0; s < nseg; ++s) t += segment_integral(d, s);
    return t;
  };
  const double target = n - 1;
  double a = h_min * (1 + 1e-12), b = len;
  if (total(b) > target - static_cast<double>(nseg))
    throw GeometryError("graded grid: " + std::to_string(n) + " lines cannot resolve h_min = " +
                        std::to_string(h_min));
  if (total(a) < target) {
    b = a;  // even uniform h_min spacing is coarse enough; clamp
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (total(mid) > target)
        a = mid;
      else
        b = mid;
    }
  }
  const AxisDensity dens{h_min, growth, b};

  bool symmetric = true;
  for (std::size_t k = 0; k < anchors.size(); ++k)
    symmetric = symmetric && std::abs((lo + hi - anchors[k]) - anchors[anchors.size() - 1 - k]) <= 1e-12 * len;

  std::vector<double> real(nseg);
  for (std::size_t s = 0; s < nseg; ++s) real[s] = segment_integral(dens, s) * target / total(b);
  std::vector<int> count(nseg);
  int assigned = 0;
  for (std::size_t s = 0; s < nseg; ++s) {
    count[s] = std::max(1, static_cast<int>(std::floor(real[s])));
    assigned += count[s];
  }
  std::vector<std::size_t> order(nseg);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t p, std::size_t q) { return real[p] - count[p] > real[q] - count[q]; });
  if (symmetric) {
    // Give out the remainder in mirrored pairs; the middle segment absorbs parity.
    int remaining = static_cast<int>(target) - assigned;
    const bool has_middle = nseg % 2 == 1;
    const std::size_t middle = nseg / 2;
    while (remaining > 0) {
      bool progressed = false;
      for (std::size_t s : order) {
        if (remaining <= 0) break;
        const std::size_t mirror = nseg - 1 - s;
        if (has_middle && s == middle) continue;
        if (s > mirror) continue;
        if (remaining >= 2) {
          ++count[s];
          ++count[mirror];
          remaining -= 2;
          progressed = true;
        }
      }
      if (remaining == 1 && has_middle) {
        ++count[middle];
        remaining = 0;
        progressed = true;
      }
      if (!progressed) break;
    }
    if (remaining != 0) throw GeometryError("graded grid: cannot allocate lines symmetrically");
  } else {
    int remaining = static_cast<int>(target) - assigned;
    for (std::size_t q = 0; remaining > 0; q = (q + 1) % nseg, --remaining) ++count[order[q]];
    while (remaining < 0) {
      auto it = std::max_element(count.begin(), count.end());
      --*it;
      ++remaining;
    }
  }

  int idx = 0;
  for (std::size_t s = 0; s < nseg; ++s) {
    const double A = anchors[s], B = anchors[s + 1], l = B - A;
    const int c = count[s];
    for (int k = 0; k < c; ++k) {
      double x;
      if (s == 0) {
        // Distance measured from the focus at B.
        const double full = dens.cumulative(l);
        x = B - dens.inverse(full * (c - k) / c);
      } else if (s == nseg - 1) {
        const double full = dens.cumulative(l);
        x = A + dens.inverse(full * k / c);
      } else {
        const double half = dens.cumulative(0.5 * l);
        const double v = 2.0 * half * k / c;
        x = v <= half ? A + dens.inverse(v) : B - dens.inverse(2.0 * half - v);
      }
      out[idx++] = k == 0 ? A : x;
    }
  }
  out[idx] = hi;
  if (symmetric) {
    for (int i = 0; i < n / 2; ++i) {
      const double avg = 0.5 * (out[i] + (lo + hi - out[n - 1 - i]));
      out[i] = avg;
      out[n - 1 - i] = lo + hi - avg;
    }
    if (n % 2 == 1) out[n / 2] = 0.5 * (lo + hi);
    for (double f : merged) {
      auto it = std::min_element(out.begin(), out.end(),
                                 [&](double p, double q) { return std::abs(p - f) < std::abs(q - f); });
      *it = f;
    }
  }
  for (int i = 1; i < n; ++i)
    if (!(out[i] > out[i - 1])) throw GeometryError("graded grid: nonmonotone lines");
  return out;
}

}  // namespace

// ---- Domain -------------------------------------------------------------

Domain Domain::unit_square() { return Domain(DomainKind::unit_square, 1.0, 1.0); }
Domain Domain::unit_disk() { return Domain(DomainKind::unit_disk, 2.0, 2.0); }

Domain Domain::rectangle(double width, double height) {
  if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height))
    throw ConfigError("rectangle sides must be positive");
  return Domain(DomainKind::rectangle, width, height);
}

Domain Domain::parse(std::string_view spec) {
  if (spec == "square" || spec == "unit-square") return unit_square();
  if (spec == "disk" || spec == "unit-disk") return unit_disk();
  constexpr std::string_view prefix = "rectangle:";
  if (spec.substr(0, prefix.size()) == prefix) {
    auto rest = spec.substr(prefix.size());
    auto x = rest.find('x');
    if (x == std::string_view::npos) throw ConfigError("rectangle spec must be rectangle:WxH");
    return rectangle(parse_double(rest.substr(0, x)), parse_double(rest.substr(x + 1)));
  }
  throw ConfigError("unknown domain '" + std::string(spec) + "'");
}

Point Domain::lower() const { return kind_ == DomainKind::unit_disk ? Point{-1.0, -1.0} : Point{0.0, 0.0}; }
Point Domain::upper() const { return kind_ == DomainKind::unit_disk ? Point{1.0, 1.0} : Point{width_, height_}; }
Point Domain::center() const { return kind_ == DomainKind::unit_disk ? Point{0.0, 0.0} : Point{0.5 * width_, 0.5 * height_}; }
double Domain::inradius() const { return kind_ == DomainKind::unit_disk ? 1.0 : 0.5 * std::min(width_, height_); }

double Domain::signed_distance(Point p) const {
  if (kind_ == DomainKind::unit_disk) return norm(p) - 1.0;
  const double dx = std::max(-p.x, p.x - width_);
  const double dy = std::max(-p.y, p.y - height_);
  if (dx <= 0.0 && dy <= 0.0) return std::max(dx, dy);
  return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
}

double Domain::ray_exit(Point o, Point d) const {
  if (kind_ == DomainKind::unit_disk) {
    const double b = dot(o, d);
    const double c = dot(o, o) - 1.0;
    return -b + std::sqrt(std::max(0.0, b * b - c));
  }
  double t = std::numeric_limits<double>::infinity();
  if (d.x > 0) t = std::min(t, (width_ - o.x) / d.x);
  if (d.x < 0) t = std::min(t, -o.x / d.x);
  if (d.y > 0) t = std::min(t, (height_ - o.y) / d.y);
  if (d.y < 0) t = std::min(t, -o.y / d.y);
  return std::max(0.0, t);
}

Point Domain::segment_crossing(Point inside, Point outside) const {
  if (kind_ == DomainKind::unit_disk) {
    const Point d = outside - inside;
    const double len = norm(d);
    return inside + (ray_exit(inside, d * (1.0 / len)) / len) * d;
  }
  return bisect_crossing([this](Point p) { return signed_distance(p); }, inside, outside);
}

Point Domain::project(Point p) const {
  if (kind_ == DomainKind::unit_disk) {
    const double r = norm(p);
    return r > 0.0 ? p * (1.0 / r) : Point{1.0, 0.0};
  }
  Point q{std::clamp(p.x, 0.0, width_), std::clamp(p.y, 0.0, height_)};
  if (signed_distance(q) < 0.0) {
    const double d[4] = {q.x, width_ - q.x, q.y, height_ - q.y};
    const int k = static_cast<int>(std::min_element(d, d + 4) - d);
    if (k == 0) q.x = 0.0;
    if (k == 1) q.x = width_;
    if (k == 2) q.y = 0.0;
    if (k == 3) q.y = height_;
  }
  return q;
}

std::string Domain::name() const {
  switch (kind_) {
    case DomainKind::unit_square: return "square";
    case DomainKind::unit_disk: return "disk";
    case DomainKind::rectangle: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "rectangle:%gx%g", width_, height_);
      return buf;
    }
  }
  return "?";
}

// ---- Grid ---------------------------------------------------------------

Grid::Grid(Domain domain, std::vector<double> xs, std::vector<double> ys)
    : domain_(domain), xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.size() < 3 || ys_.size() < 3) throw GeometryError("grid needs at least 3 lines per axis");
  max_spacing_ = 0.0;
  min_spacing_ = std::numeric_limits<double>::infinity();
  for (auto* v : {&xs_, &ys_}) {
    for (std::size_t i = 1; i < v->size(); ++i) {
      const double d = (*v)[i] - (*v)[i - 1];
      if (!(d > 0.0)) throw GeometryError("grid lines must be strictly increasing");
      max_spacing_ = std::max(max_spacing_, d);
      min_spacing_ = std::min(min_spacing_, d);
    }
  }
  uniform_ = max_spacing_ - min_spacing_ <= 1e-12 * max_spacing_;
  classify();
}

std::shared_ptr<const Grid> Grid::uniform(const Domain& domain, int n) {
  if (n < 3) throw GeometryError("resolution n = " + std::to_string(n) + " holds no interior node");
  const Point lo = domain.lower(), hi = domain.upper();
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = lo.x + (hi.x - lo.x) * i / (n - 1);
    ys[i] = lo.y + (hi.y - lo.y) * i / (n - 1);
  }
  auto g = std::shared_ptr<Grid>(new Grid(domain, std::move(xs), std::move(ys)));
  g->uniform_ = true;
  return g;
}

std::shared_ptr<const Grid> Grid::graded(const Domain& domain, int n, const GradingSpec& spec) {
  if (n < 3) throw GeometryError("resolution n = " + std::to_string(n) + " holds no interior node");
  if (!(spec.h_min > 0.0) || !(spec.growth > 0.0)) throw ConfigError("grading needs h_min > 0 and growth > 0");
  const Point lo = domain.lower(), hi = domain.upper();
  auto xs = graded_axis(lo.x, hi.x, n, spec.foci_x, spec.h_min, spec.growth);
  auto ys = graded_axis(lo.y, hi.y, n, spec.foci_y, spec.h_min, spec.growth);
  return std::shared_ptr<Grid>(new Grid(domain, std::move(xs), std::move(ys)));
}

std::shared_ptr<const Grid> Grid::from_lines(const Domain& domain, std::vector<double> xs, std::vector<double> ys) {
  const Point lo = domain.lower(), hi = domain.upper();
  const double tol = 1e-12 * std::max(hi.x - lo.x, hi.y - lo.y);
  if (xs.empty() || ys.empty() || std::abs(xs.front() - lo.x) > tol || std::abs(xs.back() - hi.x) > tol ||
      std::abs(ys.front() - lo.y) > tol || std::abs(ys.back() - hi.y) > tol)
    throw GeometryError("grid lines must span the domain's bounding box");
  return std::shared_ptr<Grid>(new Grid(domain, std::move(xs), std::move(ys)));
}

void Grid::classify() {
  const std::size_t count = node_count();
  kinds_.assign(count, NodeKind::exterior);
  interior_index_.assign(count, -1);
  interior_nodes_.clear();
  for (std::size_t k = 0; k < count; ++k) {
    const double eps = 1e-10 * min_spacing_;
    const double sd = domain_.signed_distance(node(k));
    if (sd < -eps) {
      kinds_[k] = NodeKind::interior;
    } else if (sd <= eps) {
      kinds_[k] = NodeKind::boundary;
    }
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (kinds_[k] != NodeKind::interior) continue;
    interior_index_[k] = static_cast<std::int64_t>(interior_nodes_.size());
    interior_nodes_.push_back(k);
  }
  if (interior_nodes_.empty()) throw GeometryError("grid contains no interior node");
  arms_.resize(interior_nodes_.size());
  has_cut_arms_ = false;
  for (std::size_t q = 0; q < interior_nodes_.size(); ++q) {
    const std::size_t k = interior_nodes_[q];
    const int i = column(k), j = row(k);
    const std::size_t nb[4] = {index(i - 1, j), index(i + 1, j), index(i, j - 1), index(i, j + 1)};
    for (int d = 0; d < 4; ++d) {
      Arm& arm = arms_[q][d];
      arm.node = nb[d];
      const Point p = node(k), e = node(nb[d]);
      switch (kinds_[nb[d]]) {
        case NodeKind::interior:
          arm.at = e;
          break;
        case NodeKind::boundary:
          arm.at = domain_.project(e);
          arm.ends_on_boundary = true;
          break;
        case NodeKind::exterior:
          arm.at = domain_.segment_crossing(p, e);
          arm.ends_on_boundary = true;
          arm.cut = true;
          has_cut_arms_ = true;
          break;
      }
      // Arms stay on the grid line so the stencil remains one-dimensional per axis.
      arm.length = (d < 2) ? std::abs(arm.at.x - p.x) : std::abs(arm.at.y - p.y);
      if (!(arm.length > 0.0)) arm.length = (d < 2) ? std::abs(e.x - p.x) : std::abs(e.y - p.y);
    }
  }
}

double Grid::spacing_x() const {
  double m = 0.0;
  for (std::size_t i = 1; i < xs_.size(); ++i) m = std::max(m, xs_[i] - xs_[i - 1]);
  return m;
}

double Grid::spacing_y() const {
  double m = 0.0;
  for (std::size_t i = 1; i < ys_.size(); ++i) m = std::max(m, ys_[i] - ys_[i - 1]);
  return m;
}

double Grid::local_spacing(Point p) const {
  auto loc = locate(p);
  if (!loc) return max_spacing_;
  double m = 0.0;
  for (int di = -1; di <= 1; ++di) {
    const int i = loc->i + di;
    if (i >= 0 && i + 1 < nx()) m = std::max(m, xs_[i + 1] - xs_[i]);
    const int j = loc->j + di;
    if (j >= 0 && j + 1 < ny()) m = std::max(m, ys_[j + 1] - ys_[j]);
  }
  return m;
}

double Grid::dual_width_x(std::size_t k) const { return 0.5 * (arms_[k][west].length + arms_[k][east].length); }
double Grid::dual_width_y(std::size_t k) const { return 0.5 * (arms_[k][south].length + arms_[k][north].length); }

std::optional<Grid::CellLocation> Grid::locate(Point p) const {
  const double tol = 1e-12 * max_spacing_;
  if (!(p.x >= xs_.front() - tol && p.x <= xs_.back() + tol && p.y >= ys_.front() - tol && p.y <= ys_.back() + tol))
    return std::nullopt;
  auto find = [](const std::vector<double>& v, double x) {
    const auto it = std::upper_bound(v.begin(), v.end(), x);
    int i = static_cast<int>(it - v.begin()) - 1;
    return std::clamp(i, 0, static_cast<int>(v.size()) - 2);
  };
  CellLocation c;
  c.i = find(xs_, p.x);
  c.j = find(ys_, p.y);
  c.tx = std::clamp((p.x - xs_[c.i]) / (xs_[c.i + 1] - xs_[c.i]), 0.0, 1.0);
  c.ty = std::clamp((p.y - ys_[c.j]) / (ys_[c.j + 1] - ys_[c.j]), 0.0, 1.0);
  return c;
}

std::size_t Grid::nearest_node(Point p) const {
  std::size_t best = 0;
  double bestd = std::numeric_limits<double>::infinity();
  if (auto loc = locate(p)) {
    for (int dj = 0; dj <= 1; ++dj)
      for (int di = 0; di <= 1; ++di) {
        const std::size_t k = index(loc->i + di, loc->j + dj);
        const double d = distance(node(k), p);
        if (in_closure(k) && d < bestd) {
          bestd = d;
          best = k;
        }
      }
    if (std::isfinite(bestd)) return best;
  }
  for (std::size_t k = 0; k < node_count(); ++k) {
    const double d = distance(node(k), p);
    if (in_closure(k) && d < bestd) {
      bestd = d;
      best = k;
    }
  }
  return best;
}

const std::vector<double>& Grid::quadrature_weights() const {
  std::call_once(weights_once_, [this] {
    weights_.assign(node_count(), 0.0);
    accumulate_cells(*this, [this](Point p) { return domain_.signed_distance(p); },
                     [this](std::size_t k, double w) { weights_[k] += w; });
  });
  return weights_;
}

// ---- ScalarField --------------------------------------------------------

ScalarField::ScalarField(GridPtr grid, double value) : grid_(std::move(grid)) {
  if (!grid_) throw GeometryError("field needs a grid");
  values_.assign(grid_->node_count(), value);
}

ScalarField::ScalarField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw GeometryError("field needs a grid");
  if (values_.size() != grid_->node_count()) throw GeometryError("field length does not match node count");
}

ScalarField ScalarField::sample(GridPtr grid, const PointFunction& f) {
  ScalarField out(std::move(grid));
  for (std::size_t k = 0; k < out.values_.size(); ++k) out.values_[k] = f(out.grid_->node(k));
  return out;
}

ScalarField ScalarField::from_interior(GridPtr grid, const Eigen::VectorXd& interior, const PointFunction& boundary) {
  ScalarField out(std::move(grid));
  const Grid& g = *out.grid_;
  if (static_cast<std::size_t>(interior.size()) != g.interior_count())
    throw GeometryError("interior vector length does not match the grid");
  for (std::size_t q = 0; q < g.interior_count(); ++q) out.values_[g.interior_node(q)] = interior[q];
  out.fill_ghosts(boundary);
  return out;
}

Eigen::VectorXd ScalarField::interior_vector() const {
  const Grid& g = *grid_;
  Eigen::VectorXd v(g.interior_count());
  for (std::size_t q = 0; q < g.interior_count(); ++q) v[q] = values_[g.interior_node(q)];
  return v;
}

void ScalarField::fill_ghosts(const PointFunction& boundary) {
  const Grid& g = *grid_;
  auto bval = [&](Point p) { return boundary ? boundary(p) : 0.0; };
  const std::size_t count = g.node_count();
  std::vector<char> filled(count, 0);
  for (std::size_t k = 0; k < count; ++k) {
    if (g.kind(k) == NodeKind::boundary) values_[k] = bval(g.boundary_projection(k));
    filled[k] = g.in_closure(k);
  }
  std::vector<double> sum(count, 0.0);
  std::vector<int> hits(count, 0);
  for (std::size_t q = 0; q < g.interior_count(); ++q) {
    const std::size_t k = g.interior_node(q);
    const Point p = g.node(k);
    for (const Arm& arm : g.arms(q)) {
      if (!arm.cut) continue;
      const double full = distance(g.node(arm.node), p);
      const double up = values_[k];
      sum[arm.node] += up + (bval(arm.at) - up) * full / arm.length;
      ++hits[arm.node];
    }
  }
  for (std::size_t k = 0; k < count; ++k)
    if (hits[k] > 0) {
      values_[k] = sum[k] / hits[k];
      filled[k] = 1;
    }

  // Remaining exterior corners of cells that touch the closure.
  const int nx = g.nx(), ny = g.ny();
  std::vector<char> relevant(count, 0);
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const std::size_t c[4] = {g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1)};
      bool touch = false;
      for (auto k : c) touch = touch || g.in_closure(k);
      if (touch)
        for (auto k : c) relevant[k] = 1;
    }
  for (int pass = 0; pass < 3; ++pass) {
    std::vector<std::pair<std::size_t, double>> updates;
    for (std::size_t k = 0; k < count; ++k) {
      if (filled[k] || !relevant[k]) continue;
      const int i = g.column(k), j = g.row(k);
      auto ok = [&](int a, int b) { return a >= 0 && a < nx && b >= 0 && b < ny && filled[g.index(a, b)]; };
      auto val = [&](int a, int b) { return values_[g.index(a, b)]; };
      double acc = 0.0;
      int cnt = 0;
      const int dirs[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (auto& d : dirs) {
        if (ok(i + d[0], j + d[1]) && ok(i + 2 * d[0], j + 2 * d[1])) {
          const Point p0 = g.node(k), p1 = g.node(g.index(i + d[0], j + d[1])),
                      p2 = g.node(g.index(i + 2 * d[0], j + 2 * d[1]));
          const double t = distance(p0, p1) / distance(p1, p2);
          acc += val(i + d[0], j + d[1]) + t * (val(i + d[0], j + d[1]) - val(i + 2 * d[0], j + 2 * d[1]));
          ++cnt;
        }
      }
      if (cnt == 0) {
        const int diag[4][2] = {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
        for (auto& d : diag) {
          if (ok(i + d[0], j) && ok(i, j + d[1]) && ok(i + d[0], j + d[1])) {
            acc += val(i + d[0], j) + val(i, j + d[1]) - val(i + d[0], j + d[1]);
            ++cnt;
          }
        }
      }
      if (cnt == 0) {
        for (auto& d : dirs)
          if (ok(i + d[0], j + d[1])) {
            acc += val(i + d[0], j + d[1]);
            ++cnt;
          }
      }
      if (cnt > 0) updates.emplace_back(k, acc / cnt);
    }
    if (updates.empty()) break;
    for (auto [k, v] : updates) {
      values_[k] = v;
      filled[k] = 1;
    }
  }
}

void ScalarField::require_same_grid(const ScalarField& o) const {
  if (grid_ != o.grid_) throw GeometryError("field arithmetic requires the same grid");
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(o);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(o);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}

ScalarField& ScalarField::operator*=(double a) {
  for (double& v : values_) v *= a;
  return *this;
}

ScalarField& ScalarField::operator+=(double a) {
  for (double& v : values_) v += a;
  return *this;
}

double ScalarField::max_closure() const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values_.size(); ++k)
    if (grid_->in_closure(k)) m = std::max(m, values_[k]);
  return m;
}

double ScalarField::min_closure() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values_.size(); ++k)
    if (grid_->in_closure(k)) m = std::min(m, values_[k]);
  return m;
}

double ScalarField::max_abs_interior() const {
  double m = 0.0;
  for (std::size_t k : grid_->interior_nodes()) m = std::max(m, std::abs(values_[k]));
  return m;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double a, ScalarField f) { return f *= a; }

ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
  if (a.grid_ptr() != b.grid_ptr()) throw GeometryError("field arithmetic requires the same grid");
  ScalarField out(a);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= b[k];
  return out;
}

// ---- field operations ---------------------------------------------------

double interpolate(const ScalarField& field, Point p) {
  const Grid& g = field.grid();
  if (g.domain().signed_distance(p) > 1e-9 * g.spacing())
    throw GeometryError("interpolation point lies outside the domain");
  auto loc = g.locate(p);
  if (!loc) throw GeometryError("interpolation point lies outside the grid");
  const double tx = loc->tx, ty = loc->ty;
  return (1 - tx) * (1 - ty) * field[g.index(loc->i, loc->j)] + tx * (1 - ty) * field[g.index(loc->i + 1, loc->j)] +
         tx * ty * field[g.index(loc->i + 1, loc->j + 1)] + (1 - tx) * ty * field[g.index(loc->i, loc->j + 1)];
}

double integrate(const ScalarField& field) {
  const auto& w = field.grid().quadrature_weights();
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (w[k] != 0.0) s += w[k] * field[k];
  return s;
}

double integrate_region(const ScalarField& field, const PointFunction& region_sd) {
  const Grid& g = field.grid();
  double s = 0.0;
  accumulate_cells(
      g, [&](Point p) { return std::max(g.domain().signed_distance(p), region_sd(p)); },
      [&](std::size_t k, double w) { s += w * field[k]; });
  return s;
}

VectorField gradient(const ScalarField& field) {
  const GridPtr& gp = field.grid_ptr();
  const Grid& g = *gp;
  VectorField out{ScalarField(gp), ScalarField(gp)};
  const int nx = g.nx(), ny = g.ny();
  const double* f = field.values().data();
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = g.index(i, j);
      const bool closure = g.in_closure(k);
      auto ux = [&](int a) { return !closure || g.in_closure(g.index(a, j)); };
      auto uy = [&](int b) { return !closure || g.in_closure(g.index(i, b)); };
      out.dx[k] = line_derivative(g.xs(), f + g.index(0, j), 1, i, nx, ux);
      out.dy[k] = line_derivative(g.ys(), f + g.index(i, 0), nx, j, ny, uy);
    }
  }
  return out;
}

SmoothSampler::SmoothSampler(const ScalarField& field) : grid_(field.grid_ptr()) {
  const Grid& g = *grid_;
  const int nx = g.nx(), ny = g.ny();
  f_.assign(field.values().begin(), field.values().end());
  fx_.assign(f_.size(), 0.0);
  fy_.assign(f_.size(), 0.0);
  fxy_.assign(f_.size(), 0.0);
  auto all = [](int) { return true; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = g.index(i, j);
      fx_[k] = line_derivative(g.xs(), f_.data() + g.index(0, j), 1, i, nx, all);
      fy_[k] = line_derivative(g.ys(), f_.data() + g.index(i, 0), nx, j, ny, all);
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      fxy_[g.index(i, j)] = line_derivative(g.ys(), fx_.data() + g.index(i, 0), nx, j, ny, all);
}

double SmoothSampler::value(Point p) const {
  Point grad;
  return value_and_gradient(p, grad);
}

double SmoothSampler::value_and_gradient(Point p, Point& grad) const {
  const Grid& g = *grid_;
  const Point lo{g.xs().front(), g.ys().front()}, hi{g.xs().back(), g.ys().back()};
  p.x = std::clamp(p.x, lo.x, hi.x);
  p.y = std::clamp(p.y, lo.y, hi.y);
  auto loc = g.locate(p);
  const int i = loc->i, j = loc->j;
  const double hx = g.xs()[i + 1] - g.xs()[i], hy = g.ys()[j + 1] - g.ys()[j];
  const double t = loc->tx, u = loc->ty;
  // Hermite basis: value shapes H0[a], slope shapes H1[a], with derivatives.
  const double H0[2] = {2 * t * t * t - 3 * t * t + 1, -2 * t * t * t + 3 * t * t};
  const double H1[2] = {t * t * t - 2 * t * t + t, t * t * t - t * t};
  const double dH0[2] = {6 * t * t - 6 * t, -6 * t * t + 6 * t};
  const double dH1[2] = {3 * t * t - 4 * t + 1, 3 * t * t - 2 * t};
  const double G0[2] = {2 * u * u * u - 3 * u * u + 1, -2 * u * u * u + 3 * u * u};
  const double G1[2] = {u * u * u - 2 * u * u + u, u * u * u - u * u};
  const double dG0[2] = {6 * u * u - 6 * u, -6 * u * u + 6 * u};
  const double dG1[2] = {3 * u * u - 4 * u + 1, 3 * u * u - 2 * u};
  double v = 0.0, gx = 0.0, gy = 0.0;
  for (int b = 0; b < 2; ++b)
    for (int a = 0; a < 2; ++a) {
      const std::size_t k = g.index(i + a, j + b);
      const double c0 = f_[k], c1 = hx * fx_[k], c2 = hy * fy_[k], c3 = hx * hy * fxy_[k];
      v += c0 * H0[a] * G0[b] + c1 * H1[a] * G0[b] + c2 * H0[a] * G1[b] + c3 * H1[a] * G1[b];
      gx += c0 * dH0[a] * G0[b] + c1 * dH1[a] * G0[b] + c2 * dH0[a] * G1[b] + c3 * dH1[a] * G1[b];
      gy += c0 * H0[a] * dG0[b] + c1 * H1[a] * dG0[b] + c2 * H0[a] * dG1[b] + c3 * H1[a] * dG1[b];
    }
  grad = {gx / hx, gy / hy};
  return v;
}

void write_csv(const ScalarField& field, std::ostream& out) {
  const Grid& g = field.grid();
  out << "x,y,value\n";
  char buf[96];
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (!g.in_closure(k)) continue;
    const Point p = g.node(k);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x, p.y, field[k]);
    out << buf;
  }
}

TabulatedField TabulatedField::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty field file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,value") throw ConfigError("field file header must be x,y,value");
  std::vector<std::array<double, 3>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 3> r{};
    std::string_view rest = line;
    for (int c = 0; c < 3; ++c) {
      auto comma = rest.find(',');
      if ((c < 2) != (comma != std::string_view::npos)) throw ConfigError("malformed field row: " + line);
      r[c] = parse_double(rest.substr(0, comma));
      if (c < 2) rest = rest.substr(comma + 1);
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw ConfigError("field file has no rows");
  TabulatedField t;
  for (auto& r : rows) {
    t.xs_.push_back(r[0]);
    t.ys_.push_back(r[1]);
  }
  for (auto* v : {&t.xs_, &t.ys_}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
    if (v->size() < 2) throw ConfigError("field file must span at least two lines per axis");
  }
  t.values_.assign(t.xs_.size() * t.ys_.size(), kNaN);
  for (auto& r : rows) {
    const auto i = std::lower_bound(t.xs_.begin(), t.xs_.end(), r[0]) - t.xs_.begin();
    const auto j = std::lower_bound(t.ys_.begin(), t.ys_.end(), r[1]) - t.ys_.begin();
    t.values_[j * t.xs_.size() + i] = r[2];
  }
  return t;
}

double TabulatedField::operator()(Point p) const {
  auto find = [](const std::vector<double>& v, double x) {
    const auto it = std::upper_bound(v.begin(), v.end(), x);
    return std::clamp(static_cast<int>(it - v.begin()) - 1, 0, static_cast<int>(v.size()) - 2);
  };
  const int i = find(xs_, p.x), j = find(ys_, p.y);
  const double tx = std::clamp((p.x - xs_[i]) / (xs_[i + 1] - xs_[i]), 0.0, 1.0);
  const double ty = std::clamp((p.y - ys_[j]) / (ys_[j + 1] - ys_[j]), 0.0, 1.0);
  const std::size_t w = xs_.size();
  const double vals[4] = {values_[j * w + i], values_[j * w + i + 1], values_[(j + 1) * w + i + 1],
                          values_[(j + 1) * w + i]};
  const double wts[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), tx * ty, (1 - tx) * ty};
  double s = 0.0, ws = 0.0;
  for (int c = 0; c < 4; ++c)
    if (!std::isnan(vals[c])) {
      s += wts[c] * vals[c];
      ws += wts[c];
    }
  if (ws > 0.0) return s / ws;
  for (int c = 0; c < 4; ++c)
    if (!std::isnan(vals[c])) return vals[c];
  throw GeometryError("tabulated field has no data near the requested point");
}

}  // namespace bubbleforge
