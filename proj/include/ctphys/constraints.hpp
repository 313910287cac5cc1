#pragma once

#include "ctphys/autodiff.hpp"
#include "ctphys/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ctphys {

using ad::Matrix;

enum class ManifoldKind { circle, ellipse, double_ellipse, saddle };

/// How points are spread along a curve by sample_manifold.
enum class CurveSampling { parameter, arc_length };

std::string to_string(ManifoldKind kind);
/// Throws std::invalid_argument on an unknown name.
ManifoldKind parse_manifold(const std::string& name);

struct BoundingBox {
  double xmin, xmax, ymin, ymax;
  double diagonal() const;
};

BoundingBox bounding_box(ManifoldKind kind);

/// Half-width of the saddle's real x-domain, sqrt(1 + sqrt(5)/2).
double saddle_x_max();

/// R(x, y). Zero exactly on the constraint curve.
double residual(ManifoldKind kind, double x, double y);

/// Row-wise residual of a B x 2 node, as a B x 1 node.
ad::NodeId residual(ad::Tape& tape, ManifoldKind kind, ad::NodeId points);

struct Dataset {
  Matrix points;  // n x 2
  ManifoldKind kind = ManifoldKind::circle;
  std::uint64_t seed = 0;
};

Dataset sample_manifold(ManifoldKind kind, std::size_t n, Rng& rng,
                        CurveSampling sampling = CurveSampling::parameter);

/// Closed polyline; `points` is m x 2 with the first vertex not repeated.
struct Polyline {
  Matrix points;
};

/// One closed polyline per curve component (two for the double ellipse),
/// `resolution` vertices each, equally spaced in arc length. Every vertex is an
/// exact curve point.
std::vector<Polyline> curve_polyline(ManifoldKind kind, int resolution);

struct NearestVertex {
  std::size_t component;
  std::size_t vertex;
  double distance;
};

/// Nearest-vertex queries against the reference polylines.
class CurveIndex {
 public:
  explicit CurveIndex(ManifoldKind kind, int resolution = 2048);

  NearestVertex nearest(double x, double y) const;
  double distance(double x, double y) const { return nearest(x, y).distance; }

  ManifoldKind kind() const { return kind_; }
  int resolution() const { return resolution_; }
  const std::vector<Polyline>& polylines() const { return polylines_; }

 private:
  ManifoldKind kind_;
  int resolution_;
  std::vector<Polyline> polylines_;
};

/// Minimum distance to the 2048-vertex reference polyline.
double distance_to_curve(ManifoldKind kind, double x, double y);

}  // namespace ctphys
