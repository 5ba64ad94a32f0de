#pragma once

#include <string>
#include <vector>

namespace hlic {

enum class MetricKind { kPsnr, kMsSsim };

const char* metric_kind_name(MetricKind kind);
MetricKind metric_kind_from_name(const std::string& name);

struct RDPoint {
  double bpp = 0.0;
  double metric = 0.0;
  bool operator==(const RDPoint&) const = default;
};

struct MappedBpp {
  double bpp = 0.0;
  bool extrapolated = false;
};

struct MappedMetric {
  double metric = 0.0;
  bool extrapolated = false;
};

// A baseline rate-distortion frontier: bpp and metric both strictly
// increasing. Interpolation is piecewise linear in (metric, log2 bpp).
class RDCurve {
 public:
  RDCurve() = default;
  RDCurve(MetricKind kind, std::string label, std::vector<RDPoint> points);

  MetricKind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  const std::vector<RDPoint>& points() const { return points_; }

  double min_bpp() const { return points_.front().bpp; }
  double max_bpp() const { return points_.back().bpp; }
  double clamp_bpp_to_domain(double bpp) const;

  // f1/f2 of the reward: the bpp this baseline needs to reach the given
  // metric value. Outside the knot range the end segment is extrapolated
  // and the result clamped to [min_bpp/2, 2*max_bpp].
  MappedBpp metric_to_bpp(double metric_value) const;

  // Inverse mapping on the same log-bpp model, with the same clamped
  // extrapolation.
  MappedMetric bpp_to_metric(double bpp) const;

  bool operator==(const RDCurve&) const = default;

 private:
  MetricKind kind_ = MetricKind::kPsnr;
  std::string label_;
  std::vector<RDPoint> points_;
};

RDCurve load_curve(const std::string& path);
void save_curve(const RDCurve& curve, const std::string& path);

}  // namespace hlic
