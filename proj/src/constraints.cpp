#include "ctphys/constraints.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ctphys {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Axes {
  double a, b;
};

// Semi-axes of each elliptic component.
std::vector<Axes> ellipse_components(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle: return {{1.0, 1.0}};
    case ManifoldKind::ellipse: return {{2.0, 0.5}};
    case ManifoldKind::double_ellipse: return {{2.0, 0.5}, {0.5, 2.0}};
    case ManifoldKind::saddle: return {};
  }
  return {};
}

std::size_t component_count(ManifoldKind kind) {
  return kind == ManifoldKind::double_ellipse ? 2 : 1;
}

double saddle_y(double x) {
  const double radicand = 0.25 + 2.0 * x * x - x * x * x * x;
  return std::sqrt(std::max(0.0, radicand));
}

// Closed-curve parameterization, u in [0, 1).
std::array<double, 2> curve_point(ManifoldKind kind, std::size_t component, double u) {
  const double angle = kTwoPi * u;
  if (kind == ManifoldKind::saddle) {
    const double x = saddle_x_max() * std::cos(angle);
    const double y = saddle_y(x);
    return {x, std::sin(angle) < 0.0 ? -y : y};
  }
  const Axes ax = ellipse_components(kind).at(component);
  return {ax.a * std::cos(angle), ax.b * std::sin(angle)};
}

// Cumulative chord length over a fine uniform-u table.
struct ArcTable {
  std::vector<double> cumulative;  // size samples + 1, last = total length
  std::size_t samples;

  double length() const { return cumulative.back(); }

  // Parameter u whose arc length from u = 0 is s.
  double invert(double s) const {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    std::size_t j = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
    j = std::clamp<std::size_t>(j, 1, samples) - 1;
    const double span = cumulative[j + 1] - cumulative[j];
    const double frac = span > 0.0 ? (s - cumulative[j]) / span : 0.0;
    return (static_cast<double>(j) + std::clamp(frac, 0.0, 1.0)) / static_cast<double>(samples);
  }
};

ArcTable arc_table(ManifoldKind kind, std::size_t component, std::size_t samples) {
  ArcTable table{.cumulative = std::vector<double>(samples + 1, 0.0), .samples = samples};
  auto prev = curve_point(kind, component, 0.0);
  for (std::size_t j = 1; j <= samples; ++j) {
    const auto cur = curve_point(kind, component,
                                 static_cast<double>(j) / static_cast<double>(samples));
    table.cumulative[j] = table.cumulative[j - 1] + std::hypot(cur[0] - prev[0], cur[1] - prev[1]);
    prev = cur;
  }
  return table;
}

}  // namespace

std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle: return "circle";
    case ManifoldKind::ellipse: return "ellipse";
    case ManifoldKind::double_ellipse: return "double_ellipse";
    case ManifoldKind::saddle: return "saddle";
  }
  return "unknown";
}

ManifoldKind parse_manifold(const std::string& name) {
  for (auto kind : {ManifoldKind::circle, ManifoldKind::ellipse, ManifoldKind::double_ellipse,
                    ManifoldKind::saddle}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown manifold '" + name + "'");
}

double BoundingBox::diagonal() const { return std::hypot(xmax - xmin, ymax - ymin); }

double saddle_x_max() { return std::sqrt(1.0 + std::sqrt(5.0) / 2.0); }

BoundingBox bounding_box(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle: return {-1.0, 1.0, -1.0, 1.0};
    case ManifoldKind::ellipse: return {-2.0, 2.0, -0.5, 0.5};
    case ManifoldKind::double_ellipse: return {-2.0, 2.0, -2.0, 2.0};
    case ManifoldKind::saddle: {
      // y^2 = 1/4 + 2x^2 - x^4 peaks at x^2 = 1
      const double ymax = std::sqrt(1.25);
      return {-saddle_x_max(), saddle_x_max(), -ymax, ymax};
    }
  }
  return {};
}

double residual(ManifoldKind kind, double x, double y) {
  const double x2 = x * x;
  const double y2 = y * y;
  switch (kind) {
    case ManifoldKind::circle: return x2 + y2 - 1.0;
    case ManifoldKind::ellipse: return x2 / 4.0 + y2 / 0.25 - 1.0;
    case ManifoldKind::double_ellipse:
      return (x2 / 4.0 + y2 / 0.25 - 1.0) * (x2 / 0.25 + y2 / 4.0 - 1.0);
    case ManifoldKind::saddle: return x2 * x2 - 2.0 * x2 + y2 - 0.25;
  }
  return 0.0;
}

ad::NodeId residual(ad::Tape& tape, ManifoldKind kind, ad::NodeId points) {
  const auto x2 = tape.square(tape.column(points, 0));
  const auto y2 = tape.square(tape.column(points, 1));
  const auto ellipse = [&](double a, double b) {
    return tape.shift(tape.add(tape.scale(x2, 1.0 / (a * a)), tape.scale(y2, 1.0 / (b * b))), -1.0);
  };
  switch (kind) {
    case ManifoldKind::circle: return tape.shift(tape.add(x2, y2), -1.0);
    case ManifoldKind::ellipse: return ellipse(2.0, 0.5);
    case ManifoldKind::double_ellipse: return tape.multiply(ellipse(2.0, 0.5), ellipse(0.5, 2.0));
    case ManifoldKind::saddle:
      return tape.shift(tape.add(tape.subtract(tape.square(x2), tape.scale(x2, 2.0)), y2), -0.25);
  }
  throw std::invalid_argument("residual: unknown manifold");
}

Dataset sample_manifold(ManifoldKind kind, std::size_t n, Rng& rng, CurveSampling sampling) {
  if (n == 0) throw std::invalid_argument("sample_manifold: n must be >= 1");
  Dataset data{.points = Matrix(static_cast<Eigen::Index>(n), 2), .kind = kind};
  const std::size_t components = component_count(kind);

  std::vector<ArcTable> tables;
  if (sampling == CurveSampling::arc_length) {
    for (std::size_t c = 0; c < components; ++c) tables.push_back(arc_table(kind, c, 1 << 16));
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const std::size_t component = components > 1 ? static_cast<std::size_t>(rng.uniform() < 0.5)
                                                 : 0;
    if (sampling == CurveSampling::arc_length) {
      const ArcTable& table = tables[component];
      const auto p = curve_point(kind, component, table.invert(rng.uniform() * table.length()));
      data.points(row, 0) = p[0];
      data.points(row, 1) = p[1];
    } else if (kind == ManifoldKind::saddle) {
      const double x = saddle_x_max() * (2.0 * rng.uniform() - 1.0);
      const double y = saddle_y(x);
      data.points(row, 0) = x;
      data.points(row, 1) = rng.uniform() < 0.5 ? -y : y;
    } else {
      const auto p = curve_point(kind, component, rng.uniform());
      data.points(row, 0) = p[0];
      data.points(row, 1) = p[1];
    }
  }
  return data;
}

std::vector<Polyline> curve_polyline(ManifoldKind kind, int resolution) {
  if (resolution < 16) throw std::invalid_argument("curve_polyline: resolution must be >= 16");
  std::vector<Polyline> lines;
  const auto res = static_cast<std::size_t>(resolution);
  for (std::size_t c = 0; c < component_count(kind); ++c) {
    const ArcTable table = arc_table(kind, c, 64 * res);
    Polyline line{.points = Matrix(resolution, 2)};
    for (std::size_t i = 0; i < res; ++i) {
      const double s = table.length() * static_cast<double>(i) / static_cast<double>(res);
      const auto p = curve_point(kind, c, table.invert(s));
      line.points(static_cast<Eigen::Index>(i), 0) = p[0];
      line.points(static_cast<Eigen::Index>(i), 1) = p[1];
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

CurveIndex::CurveIndex(ManifoldKind kind, int resolution)
    : kind_(kind), resolution_(resolution), polylines_(curve_polyline(kind, resolution)) {}

NearestVertex CurveIndex::nearest(double x, double y) const {
  NearestVertex best{0, 0, std::numeric_limits<double>::infinity()};
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < polylines_.size(); ++c) {
    const Matrix& pts = polylines_[c].points;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const double dx = pts(i, 0) - x;
      const double dy = pts(i, 1) - y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_sq) {
        best_sq = d2;
        best.component = c;
        best.vertex = static_cast<std::size_t>(i);
      }
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

double distance_to_curve(ManifoldKind kind, double x, double y) {
  static const std::array<CurveIndex, 4> indices{
      CurveIndex(ManifoldKind::circle), CurveIndex(ManifoldKind::ellipse),
      CurveIndex(ManifoldKind::double_ellipse), CurveIndex(ManifoldKind::saddle)};
  return indices[static_cast<std::size_t>(kind)].distance(x, y);
}

}  // namespace ctphys
