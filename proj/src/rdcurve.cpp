#include "hlic/rdcurve.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hlic/error.hpp"
#include "hlic/textio.hpp"

namespace hlic {

const char* metric_kind_name(MetricKind kind) {
  return kind == MetricKind::kPsnr ? "psnr" : "ms_ssim";
}

MetricKind metric_kind_from_name(const std::string& name) {
  if (name == "psnr") return MetricKind::kPsnr;
  if (name == "ms_ssim") return MetricKind::kMsSsim;
  throw InvalidInput("rdcurve: unknown metric kind '" + name + "'");
}

RDCurve::RDCurve(MetricKind kind, std::string label,
                 std::vector<RDPoint> points)
    : kind_(kind), label_(std::move(label)), points_(std::move(points)) {
  if (points_.size() < 2) {
    throw InvalidInput("rdcurve: need at least 2 points, got " +
                       std::to_string(points_.size()));
  }
  for (size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].bpp > 0.0) || !std::isfinite(points_[i].metric)) {
      throw InvalidInput("rdcurve: point " + std::to_string(i) +
                         " has non-positive bpp or non-finite metric");
    }
    if (i > 0) {
      if (points_[i].bpp <= points_[i - 1].bpp) {
        throw InvalidInput(
            "rdcurve: bpp not strictly increasing between points " +
            std::to_string(i - 1) + " and " + std::to_string(i) + " (" +
            format_double(points_[i - 1].bpp) + " -> " +
            format_double(points_[i].bpp) + ")");
      }
      if (points_[i].metric <= points_[i - 1].metric) {
        throw InvalidInput(
            "rdcurve: metric not strictly increasing between points " +
            std::to_string(i - 1) + " and " + std::to_string(i) + " (" +
            format_double(points_[i - 1].metric) + " -> " +
            format_double(points_[i].metric) + ")");
      }
    }
  }
}

double RDCurve::clamp_bpp_to_domain(double bpp) const {
  if (bpp < min_bpp()) return min_bpp();
  if (bpp > max_bpp()) return max_bpp();
  return bpp;
}

MappedBpp RDCurve::metric_to_bpp(double metric_value) const {
  const auto& p = points_;
  // Exact knot hits stay exact.
  for (const RDPoint& knot : p) {
    if (metric_value == knot.metric) return {knot.bpp, false};
  }
  const size_t n = p.size();
  size_t seg = 0;
  bool extrapolated = false;
  if (metric_value < p.front().metric) {
    seg = 0;
    extrapolated = true;
  } else if (metric_value > p.back().metric) {
    seg = n - 2;
    extrapolated = true;
  } else {
    while (seg + 2 < n && metric_value > p[seg + 1].metric) ++seg;
  }
  const double m0 = p[seg].metric, m1 = p[seg + 1].metric;
  const double u0 = std::log2(p[seg].bpp), u1 = std::log2(p[seg + 1].bpp);
  const double t = (metric_value - m0) / (m1 - m0);
  double bpp = std::exp2(u0 + t * (u1 - u0));
  const double lo = 0.5 * min_bpp(), hi = 2.0 * max_bpp();
  if (bpp < lo) bpp = lo;
  if (bpp > hi) bpp = hi;
  return {bpp, extrapolated};
}

MappedMetric RDCurve::bpp_to_metric(double bpp) const {
  if (!(bpp > 0.0)) {
    throw InvalidInput("rdcurve: bpp_to_metric requires bpp > 0, got " +
                       format_double(bpp));
  }
  const auto& p = points_;
  const double lo = 0.5 * min_bpp(), hi = 2.0 * max_bpp();
  bool extrapolated = false;
  if (bpp < lo) {
    bpp = lo;
    extrapolated = true;
  } else if (bpp > hi) {
    bpp = hi;
    extrapolated = true;
  }
  for (const RDPoint& knot : p) {
    if (bpp == knot.bpp) return {knot.metric, extrapolated};
  }
  const size_t n = p.size();
  size_t seg = 0;
  if (bpp < p.front().bpp) {
    seg = 0;
    extrapolated = true;
  } else if (bpp > p.back().bpp) {
    seg = n - 2;
    extrapolated = true;
  } else {
    while (seg + 2 < n && bpp > p[seg + 1].bpp) ++seg;
  }
  const double u = std::log2(bpp);
  const double u0 = std::log2(p[seg].bpp), u1 = std::log2(p[seg + 1].bpp);
  const double t = (u - u0) / (u1 - u0);
  return {p[seg].metric + t * (p[seg + 1].metric - p[seg].metric),
          extrapolated};
}

RDCurve load_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("rdcurve: cannot open '" + path + "'");
  std::string line;
  int lineno = 0;

  auto next_line = [&](const char* what) {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty()) return;
    }
    throw InvalidInput("rdcurve '" + path + "': missing " + what);
  };

  next_line("metric_kind header");
  std::istringstream h1(line);
  std::string key, kind_name;
  h1 >> key >> kind_name;
  if (key != "metric_kind" || !h1) {
    throw InvalidInput("rdcurve '" + path + "' line " +
                       std::to_string(lineno) + ": expected 'metric_kind'");
  }
  const MetricKind kind = metric_kind_from_name(kind_name);

  next_line("label header");
  if (line.rfind("label ", 0) != 0) {
    throw InvalidInput("rdcurve '" + path + "' line " +
                       std::to_string(lineno) + ": expected 'label'");
  }
  const std::string label = line.substr(6);

  std::vector<RDPoint> points;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    RDPoint pt;
    ls >> pt.bpp >> pt.metric;
    std::string trailing;
    if (!ls || (ls >> trailing)) {
      throw InvalidInput("rdcurve '" + path + "' line " +
                         std::to_string(lineno) +
                         ": expected 'bpp metric' pair");
    }
    points.push_back(pt);
  }
  try {
    return RDCurve(kind, label, std::move(points));
  } catch (const InvalidInput& e) {
    throw InvalidInput("rdcurve '" + path + "': " + e.what());
  }
}

void save_curve(const RDCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("rdcurve: cannot write '" + path + "'");
  out << "metric_kind " << metric_kind_name(curve.kind()) << "\n";
  out << "label " << curve.label() << "\n";
  for (const RDPoint& p : curve.points()) {
    out << format_double(p.bpp) << " " << format_double(p.metric) << "\n";
  }
  if (!out) throw InvalidInput("rdcurve: write failed for '" + path + "'");
}

}  // namespace hlic
