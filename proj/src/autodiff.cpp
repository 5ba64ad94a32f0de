#include "hlic/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "hlic/error.hpp"
#include "hlic/rng.hpp"

namespace hlic {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

// How one operand of a binary elementwise op maps onto the output.
enum class Bcast { kFull, kScalar, kRow, kCol };

struct BcastPlan {
  std::vector<int> out_shape;
  Bcast a;
  Bcast b;
};

BcastPlan resolve_broadcast(Op op, const std::vector<int>& a,
                            const std::vector<int>& b) {
  if (a == b) return {a, Bcast::kFull, Bcast::kFull};
  if (numel_of(a) == 1) return {b, Bcast::kScalar, Bcast::kFull};
  if (numel_of(b) == 1) return {a, Bcast::kFull, Bcast::kScalar};
  if (a.size() == 2 && b.size() == 2 && a[1] == b[1]) {
    if (a[0] == 1) return {b, Bcast::kRow, Bcast::kFull};
    if (b[0] == 1) return {a, Bcast::kFull, Bcast::kRow};
  }
  if (a.size() == 2 && b.size() == 2 && a[0] == b[0]) {
    if (a[1] == 1) return {b, Bcast::kCol, Bcast::kFull};
    if (b[1] == 1) return {a, Bcast::kFull, Bcast::kCol};
  }
  throw InvalidInput(std::string(op_name(op)) + ": shape mismatch " +
                     shape_str(a) + " vs " + shape_str(b));
}

// Element index of a broadcast operand for output position (i of n, with
// rows x cols geometry when 2-D).
inline int64_t bcast_index(Bcast mode, int64_t flat, int cols) {
  switch (mode) {
    case Bcast::kFull:
      return flat;
    case Bcast::kScalar:
      return 0;
    case Bcast::kRow:
      return flat % cols;
    case Bcast::kCol:
      return flat / cols;
  }
  return flat;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

std::vector<double> gaussian_kernel(int radius, double sigma) {
  if (radius < 0 || sigma <= 0.0) {
    throw InvalidInput("gaussian_blur_2d: radius must be >= 0 and sigma > 0");
  }
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(numel_of(t.shape)), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t = zeros(std::move(shape));
  for (double& x : t.data) x = v;
  return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (numel_of(shape) != static_cast<int64_t>(values.size())) {
    throw InvalidInput("tensor: " + shape_str(shape) + " incompatible with " +
                       std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(values);
  return t;
}

int64_t Tensor::numel() const { return numel_of(shape); }

int Tensor::rows() const {
  if (shape.size() != 2) {
    throw InvalidInput("tensor: rank-2 access on shape " + shape_str(shape));
  }
  return shape[0];
}

int Tensor::cols() const {
  if (shape.size() != 2) {
    throw InvalidInput("tensor: rank-2 access on shape " + shape_str(shape));
  }
  return shape[1];
}

double& Tensor::at(int r, int c) {
  return data[static_cast<size_t>(r) * cols() + c];
}

double Tensor::at(int r, int c) const {
  return data[static_cast<size_t>(r) * cols() + c];
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() { grad.assign(data.size(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// --- Graph ------------------------------------------------------------------

const char* op_name(Op op) {
  switch (op) {
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kPowConst: return "pow_const";
    case Op::kClampMin: return "clamp_min";
    case Op::kMatmul: return "matmul";
    case Op::kReduceMean: return "reduce_mean";
    case Op::kReduceSum: return "reduce_sum";
    case Op::kGaussianBlur2d: return "gaussian_blur_2d";
    case Op::kAvgDownsample2x: return "avg_downsample_2x";
    case Op::kNormalCdf: return "normal_cdf";
    case Op::kAddUniformNoise: return "add_uniform_noise";
    case Op::kUntileBlocks: return "untile_blocks";
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
  }
  return "?";
}

const Tensor& Value::tensor() const { return graph->value_of(*this); }

double Value::scalar() const {
  const Tensor& t = tensor();
  if (t.numel() != 1) {
    throw InvalidInput("scalar: tensor has shape " + shape_str(t.shape));
  }
  return t.data[0];
}

Value Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Graph::leaf(Tensor& t) {
  Node n;
  n.op = Op::kLeaf;
  n.out = t;  // snapshot of the current values
  n.out.grad.clear();
  n.external = &t;
  n.out.requires_grad = t.requires_grad;
  return push(std::move(n));
}

Value Graph::constant(Tensor t) {
  Node n;
  n.op = Op::kConstant;
  n.out = std::move(t);
  n.out.requires_grad = false;
  n.out.grad.clear();
  return push(std::move(n));
}

Value Graph::constant(double v) { return constant(Tensor::scalar(v)); }

const Tensor& Graph::value_of(Value v) const {
  return nodes_[static_cast<size_t>(v.id)].out;
}

std::vector<double>& Graph::adj(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.adj.size() != n.out.data.size()) n.adj.assign(n.out.data.size(), 0.0);
  return n.adj;
}

Value Graph::apply(Op op, const std::vector<Value>& inputs,
                   const OpParams& params) {
  auto expect_inputs = [&](size_t k) {
    if (inputs.size() != k) {
      throw InvalidInput(std::string(op_name(op)) + ": expected " +
                         std::to_string(k) + " inputs, got " +
                         std::to_string(inputs.size()));
    }
    for (const Value& v : inputs) {
      if (v.graph != this) {
        throw InvalidInput(std::string(op_name(op)) +
                           ": input from another graph");
      }
    }
  };

  Node n;
  n.op = op;
  bool rg = false;
  for (const Value& v : inputs) {
    rg = rg || nodes_[static_cast<size_t>(v.id)].out.requires_grad;
  }

  switch (op) {
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      expect_inputs(2);
      const Tensor& a = inputs[0].tensor();
      const Tensor& b = inputs[1].tensor();
      BcastPlan plan = resolve_broadcast(op, a.shape, b.shape);
      n.in0 = inputs[0].id;
      n.in1 = inputs[1].id;
      n.out = Tensor::zeros(plan.out_shape);
      const int cols =
          plan.out_shape.size() == 2 ? plan.out_shape[1] : 1;
      const int64_t total = n.out.numel();
      for (int64_t i = 0; i < total; ++i) {
        const double x = a.data[bcast_index(plan.a, i, cols)];
        const double y = b.data[bcast_index(plan.b, i, cols)];
        double r;
        switch (op) {
          case Op::kAdd: r = x + y; break;
          case Op::kSub: r = x - y; break;
          case Op::kMul: r = x * y; break;
          default:
            if (y == 0.0) {
              throw NumericError("div: division by zero at element " +
                                 std::to_string(i));
            }
            r = x / y;
        }
        n.out.data[static_cast<size_t>(i)] = r;
      }
      break;
    }
    case Op::kNeg:
    case Op::kExp:
    case Op::kLog:
    case Op::kNormalCdf: {
      expect_inputs(1);
      const Tensor& a = inputs[0].tensor();
      n.in0 = inputs[0].id;
      n.out = Tensor::zeros(a.shape);
      for (size_t i = 0; i < a.data.size(); ++i) {
        const double x = a.data[i];
        switch (op) {
          case Op::kNeg: n.out.data[i] = -x; break;
          case Op::kExp: n.out.data[i] = std::exp(x); break;
          case Op::kNormalCdf: n.out.data[i] = ::hlic::normal_cdf(x); break;
          default:
            if (x <= 0.0) {
              throw NumericError("log: non-positive input " +
                                 std::to_string(x) + " at element " +
                                 std::to_string(i));
            }
            n.out.data[i] = std::log(x);
        }
      }
      break;
    }
    case Op::kPowConst: {
      expect_inputs(1);
      const Tensor& a = inputs[0].tensor();
      const double c = params.scalar;
      const bool integral_exponent = c == std::floor(c) && c >= 0.0;
      n.in0 = inputs[0].id;
      n.aux = c;
      n.out = Tensor::zeros(a.shape);
      for (size_t i = 0; i < a.data.size(); ++i) {
        const double x = a.data[i];
        if (!integral_exponent && x <= 0.0) {
          throw NumericError("pow_const: base " + std::to_string(x) +
                             " outside domain for exponent " +
                             std::to_string(c));
        }
        n.out.data[i] = std::pow(x, c);
      }
      break;
    }
    case Op::kClampMin: {
      expect_inputs(1);
      if (!std::isfinite(params.scalar)) {
        throw InvalidInput("clamp_min: bound must be finite");
      }
      const Tensor& a = inputs[0].tensor();
      n.in0 = inputs[0].id;
      n.aux = params.scalar;
      n.out = Tensor::zeros(a.shape);
      for (size_t i = 0; i < a.data.size(); ++i) {
        n.out.data[i] = a.data[i] < params.scalar ? params.scalar : a.data[i];
      }
      break;
    }
    case Op::kMatmul: {
      expect_inputs(2);
      const Tensor& a = inputs[0].tensor();
      const Tensor& b = inputs[1].tensor();
      if (a.shape.size() != 2 || b.shape.size() != 2 ||
          a.shape[1] != b.shape[0]) {
        throw InvalidInput("matmul: shape mismatch " + shape_str(a.shape) +
                           " vs " + shape_str(b.shape));
      }
      const int m = a.shape[0], k = a.shape[1], p = b.shape[1];
      n.in0 = inputs[0].id;
      n.in1 = inputs[1].id;
      n.out = Tensor::zeros({m, p});
      const double* A = a.data.data();
      const double* B = b.data.data();
      double* C = n.out.data.data();
      for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
          const double av = A[i * k + l];
          if (av == 0.0) continue;
          const double* Brow = B + static_cast<size_t>(l) * p;
          double* Crow = C + static_cast<size_t>(i) * p;
          for (int j = 0; j < p; ++j) Crow[j] += av * Brow[j];
        }
      }
      break;
    }
    case Op::kReduceMean:
    case Op::kReduceSum: {
      expect_inputs(1);
      const Tensor& a = inputs[0].tensor();
      n.in0 = inputs[0].id;
      double s = 0.0;
      for (double v : a.data) s += v;
      if (op == Op::kReduceMean) s /= static_cast<double>(a.numel());
      n.out = Tensor::scalar(s);
      break;
    }
    case Op::kGaussianBlur2d: {
      expect_inputs(1);
      const Tensor& a = inputs[0].tensor();
      const int r = params.radius;
      if (a.shape.size() != 2) {
        throw InvalidInput("gaussian_blur_2d: rank-2 input required, got " +
                           shape_str(a.shape));
      }
      const int h = a.shape[0], w = a.shape[1];
      if (h < 2 * r + 1 || w < 2 * r + 1) {
        throw InvalidInput("gaussian_blur_2d: input " + shape_str(a.shape) +
                           " smaller than kernel size " +
                           std::to_string(2 * r + 1));
      }
      std::vector<double> kern = gaussian_kernel(r, params.sigma);
      n.in0 = inputs[0].id;
      n.radius = r;
      n.sigma = params.sigma;
      const int wo = w - 2 * r, ho = h - 2 * r;
      // Horizontal pass saved for backward.
      n.saved.assign(static_cast<size_t>(h) * wo, 0.0);
      for (int i = 0; i < h; ++i) {
        const double* row = a.data.data() + static_cast<size_t>(i) * w;
        double* trow = n.saved.data() + static_cast<size_t>(i) * wo;
        for (int j = 0; j < wo; ++j) {
          double s = 0.0;
          for (int t = 0; t <= 2 * r; ++t) s += kern[t] * row[j + t];
          trow[j] = s;
        }
      }
      n.out = Tensor::zeros({ho, wo});
      for (int i = 0; i < ho; ++i) {
        double* orow = n.out.data.data() + static_cast<size_t>(i) * wo;
        for (int t = 0; t <= 2 * r; ++t) {
          const double kv = kern[t];
          const double* trow = n.saved.data() + static_cast<size_t>(i + t) * wo;
          for (int j = 0; j < wo; ++j) orow[j] += kv * trow[j];
        }
      }
      break;
    }
    case Op::kAvgDownsample2x: {
      expect_inputs(1);
      const Tensor& a = inputs[0].tensor();
      if (a.shape.size() != 2) {
        throw InvalidInput("avg_downsample_2x: rank-2 input required, got " +
                           shape_str(a.shape));
      }
      const int h = a.shape[0], w = a.shape[1];
      const int ho = h / 2, wo = w / 2;  // trailing odd row/col dropped
      if (ho < 1 || wo < 1) {
        throw InvalidInput("avg_downsample_2x: input " + shape_str(a.shape) +
                           " too small to halve");
      }
      n.in0 = inputs[0].id;
      n.out = Tensor::zeros({ho, wo});
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j) {
          const double s = a.at(2 * i, 2 * j) + a.at(2 * i, 2 * j + 1) +
                           a.at(2 * i + 1, 2 * j) + a.at(2 * i + 1, 2 * j + 1);
          n.out.at(i, j) = 0.25 * s;
        }
      }
      break;
    }
    case Op::kAddUniformNoise: {
      expect_inputs(1);
      if (params.rng == nullptr) {
        throw InvalidInput("add_uniform_noise: rng required");
      }
      const Tensor& a = inputs[0].tensor();
      n.in0 = inputs[0].id;
      n.out = Tensor::zeros(a.shape);
      n.saved.resize(a.data.size());
      for (size_t i = 0; i < a.data.size(); ++i) {
        n.saved[i] = params.rng->uniform() - 0.5;
        n.out.data[i] = a.data[i] + n.saved[i];
      }
      break;
    }
    case Op::kUntileBlocks: {
      expect_inputs(1);
      const Tensor& a = inputs[0].tensor();
      const int bh = params.block_h, bw = params.block_w;
      const int gh = params.grid_h, gw = params.grid_w;
      if (a.shape.size() != 2 || a.shape[0] != gh * gw ||
          a.shape[1] != bh * bw) {
        throw InvalidInput("untile_blocks: input " + shape_str(a.shape) +
                           " incompatible with grid " + std::to_string(gh) +
                           "x" + std::to_string(gw) + " of " +
                           std::to_string(bh) + "x" + std::to_string(bw) +
                           " blocks");
      }
      n.in0 = inputs[0].id;
      n.bh = bh;
      n.bw = bw;
      n.gh = gh;
      n.gw = gw;
      n.out = Tensor::zeros({gh * bh, gw * bw});
      const int W = gw * bw;
      for (int g = 0; g < gh * gw; ++g) {
        const int gi = g / gw, gj = g % gw;
        const double* src = a.data.data() + static_cast<size_t>(g) * bh * bw;
        for (int bi = 0; bi < bh; ++bi) {
          double* dst =
              n.out.data.data() +
              static_cast<size_t>(gi * bh + bi) * W + gj * bw;
          std::memcpy(dst, src + static_cast<size_t>(bi) * bw,
                      sizeof(double) * bw);
        }
      }
      break;
    }
    case Op::kLeaf:
    case Op::kConstant:
      throw InvalidInput("apply: leaf/constant are not applied ops");
  }

  n.out.requires_grad = rg;
  return push(std::move(n));
}

void Graph::backward(Value output) {
  if (output.graph != this) {
    throw InvalidInput("backward: output from another graph");
  }
  if (backward_done_) {
    throw InvalidInput("backward: graph already consumed; rebuild it");
  }
  const Tensor& out = value_of(output);
  if (out.numel() != 1) {
    throw InvalidInput("backward: output must be scalar, got shape " +
                       shape_str(out.shape));
  }
  backward_done_ = true;
  if (!nodes_[static_cast<size_t>(output.id)].out.requires_grad) return;
  adj(output.id)[0] = 1.0;

  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.out.requires_grad || n.adj.empty()) continue;
    const std::vector<double>& g = n.adj;

    switch (n.op) {
      case Op::kLeaf:
        if (n.external->requires_grad) {
          n.external->ensure_grad();
          for (size_t i = 0; i < g.size(); ++i) n.external->grad[i] += g[i];
        }
        break;
      case Op::kConstant:
        break;
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        const Tensor& b = nodes_[static_cast<size_t>(n.in1)].out;
        BcastPlan plan = resolve_broadcast(n.op, a.shape, b.shape);
        const int cols = plan.out_shape.size() == 2 ? plan.out_shape[1] : 1;
        const int64_t total = n.out.numel();
        const bool need_a = a.requires_grad;
        const bool need_b = b.requires_grad;
        std::vector<double>* ga = need_a ? &adj(n.in0) : nullptr;
        std::vector<double>* gb = need_b ? &adj(n.in1) : nullptr;
        for (int64_t i = 0; i < total; ++i) {
          const int64_t ia = bcast_index(plan.a, i, cols);
          const int64_t ib = bcast_index(plan.b, i, cols);
          const double gi = g[static_cast<size_t>(i)];
          switch (n.op) {
            case Op::kAdd:
              if (need_a) (*ga)[static_cast<size_t>(ia)] += gi;
              if (need_b) (*gb)[static_cast<size_t>(ib)] += gi;
              break;
            case Op::kSub:
              if (need_a) (*ga)[static_cast<size_t>(ia)] += gi;
              if (need_b) (*gb)[static_cast<size_t>(ib)] -= gi;
              break;
            case Op::kMul:
              if (need_a)
                (*ga)[static_cast<size_t>(ia)] +=
                    gi * b.data[static_cast<size_t>(ib)];
              if (need_b)
                (*gb)[static_cast<size_t>(ib)] +=
                    gi * a.data[static_cast<size_t>(ia)];
              break;
            default: {
              const double y = b.data[static_cast<size_t>(ib)];
              if (need_a) (*ga)[static_cast<size_t>(ia)] += gi / y;
              if (need_b)
                (*gb)[static_cast<size_t>(ib)] -=
                    gi * a.data[static_cast<size_t>(ia)] / (y * y);
            }
          }
        }
        break;
      }
      case Op::kNeg: {
        std::vector<double>& ga = adj(n.in0);
        for (size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case Op::kExp: {
        std::vector<double>& ga = adj(n.in0);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.out.data[i];
        break;
      }
      case Op::kLog: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        std::vector<double>& ga = adj(n.in0);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a.data[i];
        break;
      }
      case Op::kNormalCdf: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        std::vector<double>& ga = adj(n.in0);
        for (size_t i = 0; i < g.size(); ++i) {
          const double x = a.data[i];
          ga[i] += g[i] * kInvSqrt2Pi * std::exp(-0.5 * x * x);
        }
        break;
      }
      case Op::kPowConst: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        std::vector<double>& ga = adj(n.in0);
        for (size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * n.aux * std::pow(a.data[i], n.aux - 1.0);
        }
        break;
      }
      case Op::kClampMin: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        std::vector<double>& ga = adj(n.in0);
        for (size_t i = 0; i < g.size(); ++i) {
          if (a.data[i] >= n.aux) ga[i] += g[i];
        }
        break;
      }
      case Op::kMatmul: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        const Tensor& b = nodes_[static_cast<size_t>(n.in1)].out;
        const int m = a.shape[0], k = a.shape[1], p = b.shape[1];
        if (a.requires_grad) {
          std::vector<double>& ga = adj(n.in0);
          // dA = G * B^T
          for (int i = 0; i < m; ++i) {
            for (int l = 0; l < k; ++l) {
              double s = 0.0;
              const double* Grow = g.data() + static_cast<size_t>(i) * p;
              const double* Brow = b.data.data() + static_cast<size_t>(l) * p;
              for (int j = 0; j < p; ++j) s += Grow[j] * Brow[j];
              ga[static_cast<size_t>(i) * k + l] += s;
            }
          }
        }
        if (b.requires_grad) {
          std::vector<double>& gb = adj(n.in1);
          // dB = A^T * G
          for (int l = 0; l < k; ++l) {
            for (int i = 0; i < m; ++i) {
              const double av = a.data[static_cast<size_t>(i) * k + l];
              if (av == 0.0) continue;
              const double* Grow = g.data() + static_cast<size_t>(i) * p;
              double* gBrow = gb.data() + static_cast<size_t>(l) * p;
              for (int j = 0; j < p; ++j) gBrow[j] += av * Grow[j];
            }
          }
        }
        break;
      }
      case Op::kReduceMean: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        std::vector<double>& ga = adj(n.in0);
        const double gi = g[0] / static_cast<double>(a.numel());
        for (double& v : ga) v += gi;
        break;
      }
      case Op::kReduceSum: {
        std::vector<double>& ga = adj(n.in0);
        for (double& v : ga) v += g[0];
        break;
      }
      case Op::kGaussianBlur2d: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        const int r = n.radius;
        const int h = a.shape[0], w = a.shape[1];
        const int ho = h - 2 * r, wo = w - 2 * r;
        std::vector<double> kern = gaussian_kernel(r, n.sigma);
        // Transpose of the separable forward: vertical scatter into the
        // horizontal-pass grid, then horizontal scatter into the input.
        std::vector<double> gt(static_cast<size_t>(h) * wo, 0.0);
        for (int i = 0; i < ho; ++i) {
          const double* grow = g.data() + static_cast<size_t>(i) * wo;
          for (int t = 0; t <= 2 * r; ++t) {
            const double kv = kern[t];
            double* trow = gt.data() + static_cast<size_t>(i + t) * wo;
            for (int j = 0; j < wo; ++j) trow[j] += kv * grow[j];
          }
        }
        std::vector<double>& ga = adj(n.in0);
        for (int i = 0; i < h; ++i) {
          const double* trow = gt.data() + static_cast<size_t>(i) * wo;
          double* arow = ga.data() + static_cast<size_t>(i) * w;
          for (int j = 0; j < wo; ++j) {
            const double gv = trow[j];
            if (gv == 0.0) continue;
            for (int t = 0; t <= 2 * r; ++t) arow[j + t] += kern[t] * gv;
          }
        }
        break;
      }
      case Op::kAvgDownsample2x: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in0)].out;
        const int w = a.shape[1];
        const int ho = n.out.shape[0], wo = n.out.shape[1];
        std::vector<double>& ga = adj(n.in0);
        for (int i = 0; i < ho; ++i) {
          for (int j = 0; j < wo; ++j) {
            const double gv = 0.25 * g[static_cast<size_t>(i) * wo + j];
            ga[static_cast<size_t>(2 * i) * w + 2 * j] += gv;
            ga[static_cast<size_t>(2 * i) * w + 2 * j + 1] += gv;
            ga[static_cast<size_t>(2 * i + 1) * w + 2 * j] += gv;
            ga[static_cast<size_t>(2 * i + 1) * w + 2 * j + 1] += gv;
          }
        }
        break;
      }
      case Op::kAddUniformNoise: {
        // Additive noise is a constant offset once drawn.
        std::vector<double>& ga = adj(n.in0);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::kUntileBlocks: {
        std::vector<double>& ga = adj(n.in0);
        const int W = n.gw * n.bw;
        for (int gidx = 0; gidx < n.gh * n.gw; ++gidx) {
          const int gi = gidx / n.gw, gj = gidx % n.gw;
          double* dst = ga.data() + static_cast<size_t>(gidx) * n.bh * n.bw;
          for (int bi = 0; bi < n.bh; ++bi) {
            const double* src = g.data() +
                                static_cast<size_t>(gi * n.bh + bi) * W +
                                gj * n.bw;
            for (int bj = 0; bj < n.bw; ++bj) {
              dst[static_cast<size_t>(bi) * n.bw + bj] += src[bj];
            }
          }
        }
        break;
      }
    }
  }
}

// --- Adam -------------------------------------------------------------------

void AdamOptimizer::add_param(const std::string& name, Tensor* t) {
  Slot s;
  s.name = name;
  s.param = t;
  s.m.assign(t->data.size(), 0.0);
  s.v.assign(t->data.size(), 0.0);
  slots_.push_back(std::move(s));
}

void AdamOptimizer::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (Slot& s : slots_) {
    s.param->ensure_grad();
    for (size_t i = 0; i < s.param->data.size(); ++i) {
      const double g = s.param->grad[i];
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in parameter '" +
                           s.name + "' at element " + std::to_string(i));
      }
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      s.param->data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (Slot& s : slots_) s.param->zero_grad();
}

}  // namespace hlic
