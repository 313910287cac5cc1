#include "ctphys/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

namespace ctphys::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_samples_csv(const fs::path& path, const SampleSet& samples) {
  std::string text = "x,y\n";
  for (Eigen::Index r = 0; r < samples.points.rows(); ++r) {
    text += format_double(samples.points(r, 0));
    text += ',';
    text += format_double(samples.points(r, 1));
    text += '\n';
  }
  write_text(path, text);
}

namespace {

bool parse_number(std::string_view text, double& out) {
  while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && end == text.data() + text.size();
}

}  // namespace

Matrix read_samples_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "x,y") throw IoError(path.string() + ": missing x,y header");
  std::vector<std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path.string() + ": malformed row '" + line + "'");
    double x = 0.0, y = 0.0;
    if (!parse_number(std::string_view(line).substr(0, comma), x) ||
        !parse_number(std::string_view(line).substr(comma + 1), y)) {
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
    rows.emplace_back(x, y);
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = rows[i].first;
    m(static_cast<Eigen::Index>(i), 1) = rows[i].second;
  }
  return m;
}

namespace {

std::vector<std::string> metric_values(const MetricsReport& r) {
  return {format_double(r.mean_abs_residual), format_double(r.p95_abs_residual),
          format_double(r.mean_distance_to_curve), format_double(r.bin_coverage),
          format_double(r.chamfer), std::to_string(r.n_samples)};
}

}  // namespace

std::string format_metrics(const MetricsReport& report) {
  const auto values = metric_values(report);
  std::string out;
  for (std::size_t i = 0; i < kMetricKeys.size(); ++i) {
    out += kMetricKeys[i] + " = " + values[i] + "\n";
  }
  return out;
}

std::string metrics_csv_header() {
  std::string out;
  for (std::size_t i = 0; i < kMetricKeys.size(); ++i) {
    if (i) out += ',';
    out += kMetricKeys[i];
  }
  return out;
}

std::string metrics_csv_row(const MetricsReport& report) {
  const auto values = metric_values(report);
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += values[i];
  }
  return out;
}

void write_metrics(const fs::path& path, const MetricsReport& report) {
  write_text(path, metrics_csv_header() + "\n" + metrics_csv_row(report) + "\n");
}

void write_record(const fs::path& path, const TrainRecord& record) {
  std::string text = "iteration,steps,ct_loss,residual_loss,lr\n";
  for (const auto& row : record.rows) {
    text += std::to_string(row.iteration) + ',' + std::to_string(row.steps) + ',' +
            format_double(row.ct_loss) + ',' + format_double(row.residual_loss) + ',' +
            format_double(row.lr) + '\n';
  }
  write_text(path, text);
}

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const Matrix& samples, ManifoldKind manifold, const std::string& title) {
  constexpr double kCanvas = 640.0;
  const BoundingBox box = bounding_box(manifold);
  const double pad_x = 0.1 * (box.xmax - box.xmin);
  const double pad_y = 0.1 * (box.ymax - box.ymin);
  const double x0 = box.xmin - pad_x;
  const double x1 = box.xmax + pad_x;
  const double y0 = box.ymin - pad_y;
  const double y1 = box.ymax + pad_y;
  // equal scale on both axes; the long side fills the canvas
  const double scale = kCanvas / std::max(x1 - x0, y1 - y0);
  const double width = (x1 - x0) * scale;
  const double height = (y1 - y0) * scale;
  const auto px = [&](double x) { return format_double((x - x0) * scale); };
  const auto py = [&](double y) { return format_double((y1 - y) * scale); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(width)
      << "\" height=\"" << format_double(height) << "\" viewBox=\"0 0 " << format_double(width)
      << ' ' << format_double(height) << "\">\n";
  if (!title.empty()) svg << "  <title>" << xml_escape(title) << "</title>\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << format_double(width) << "\" height=\""
      << format_double(height) << "\" fill=\"white\" stroke=\"#888888\"/>\n";
  if (x0 < 0.0 && x1 > 0.0) {
    svg << "  <line x1=\"" << px(0) << "\" y1=\"0\" x2=\"" << px(0) << "\" y2=\""
        << format_double(height) << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
  }
  if (y0 < 0.0 && y1 > 0.0) {
    svg << "  <line x1=\"0\" y1=\"" << py(0) << "\" x2=\"" << format_double(width) << "\" y2=\""
        << py(0) << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
  }

  const double radius = std::max(1.0, kCanvas / 320.0);
  svg << "  <g fill=\"red\" fill-opacity=\"0.6\" stroke=\"none\">\n";
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    svg << "    <circle cx=\"" << px(samples(r, 0)) << "\" cy=\"" << py(samples(r, 1))
        << "\" r=\"" << format_double(radius) << "\"/>\n";
  }
  svg << "  </g>\n";

  for (const Polyline& line : curve_polyline(manifold, 512)) {
    svg << "  <path fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\" d=\"";
    for (Eigen::Index i = 0; i < line.points.rows(); ++i) {
      svg << (i == 0 ? "M" : " L") << px(line.points(i, 0)) << ',' << py(line.points(i, 1));
    }
    svg << " Z\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_figure(const fs::path& path, const Matrix& samples, ManifoldKind manifold,
                   const std::string& title) {
  write_text(path, render_svg(samples, manifold, title));
}

}  // namespace ctphys::io
