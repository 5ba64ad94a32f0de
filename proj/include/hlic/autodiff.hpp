#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hlic {

class Rng;

// Dense row-major multi-dimensional array of 64-bit floats.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty, or same length as data

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor scalar(double v);
  static Tensor from(std::vector<int> shape, std::vector<double> values);

  int64_t numel() const;
  int rows() const;
  int cols() const;
  double& at(int r, int c);
  double at(int r, int c) const;

  void ensure_grad();  // allocate and zero if absent
  void zero_grad();
  bool all_finite() const;
};

enum class Op {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kPowConst,
  kClampMin,
  kMatmul,
  kReduceMean,
  kReduceSum,
  kGaussianBlur2d,
  kAvgDownsample2x,
  kNormalCdf,
  kAddUniformNoise,
  kUntileBlocks,
  kLeaf,
  kConstant,
};

const char* op_name(Op op);

struct OpParams {
  double scalar = 0.0;  // pow exponent or clamp bound
  int radius = 0;       // blur kernel radius
  double sigma = 0.0;   // blur kernel sigma
  Rng* rng = nullptr;   // uniform noise source
  int block_h = 0, block_w = 0, grid_h = 0, grid_w = 0;  // untile geometry
};

class Graph;

// Lightweight handle to a node on a graph.
struct Value {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& tensor() const;
  double scalar() const;  // requires numel() == 1
};

// Reverse-mode tape. Nodes are recorded in topological (insertion) order;
// backward visits them exactly once in reverse. A graph is built, run
// backward once, and discarded.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Registers an external tensor. If it has requires_grad set, backward
  // accumulates into its grad buffer.
  Value leaf(Tensor& t);

  Value constant(Tensor t);
  Value constant(double v);

  Value apply(Op op, const std::vector<Value>& inputs,
              const OpParams& params = {});

  Value add(Value a, Value b) { return apply(Op::kAdd, {a, b}); }
  Value sub(Value a, Value b) { return apply(Op::kSub, {a, b}); }
  Value mul(Value a, Value b) { return apply(Op::kMul, {a, b}); }
  Value div(Value a, Value b) { return apply(Op::kDiv, {a, b}); }
  Value neg(Value a) { return apply(Op::kNeg, {a}); }
  Value exp(Value a) { return apply(Op::kExp, {a}); }
  Value log(Value a) { return apply(Op::kLog, {a}); }
  Value pow_const(Value a, double exponent) {
    OpParams p;
    p.scalar = exponent;
    return apply(Op::kPowConst, {a}, p);
  }
  Value clamp_min(Value a, double bound) {
    OpParams p;
    p.scalar = bound;
    return apply(Op::kClampMin, {a}, p);
  }
  Value matmul(Value a, Value b) { return apply(Op::kMatmul, {a, b}); }
  Value reduce_mean(Value a) { return apply(Op::kReduceMean, {a}); }
  Value reduce_sum(Value a) { return apply(Op::kReduceSum, {a}); }
  Value gaussian_blur_2d(Value a, int radius, double sigma) {
    OpParams p;
    p.radius = radius;
    p.sigma = sigma;
    return apply(Op::kGaussianBlur2d, {a}, p);
  }
  Value avg_downsample_2x(Value a) { return apply(Op::kAvgDownsample2x, {a}); }
  Value normal_cdf(Value a) { return apply(Op::kNormalCdf, {a}); }
  Value add_uniform_noise(Value a, Rng& rng) {
    OpParams p;
    p.rng = &rng;
    return apply(Op::kAddUniformNoise, {a}, p);
  }
  // Reassembles a [grid_h*grid_w, block_h*block_w] stack of flattened blocks
  // into a [grid_h*block_h, grid_w*block_w] raster.
  Value untile_blocks(Value blocks, int block_h, int block_w, int grid_h,
                      int grid_w) {
    OpParams p;
    p.block_h = block_h;
    p.block_w = block_w;
    p.grid_h = grid_h;
    p.grid_w = grid_w;
    return apply(Op::kUntileBlocks, {blocks}, p);
  }

  // Accumulates d(output)/d(leaf) into every requires_grad leaf's grad
  // buffer. The graph may not be run backward twice.
  void backward(Value output);

  const Tensor& value_of(Value v) const;
  size_t node_count() const { return nodes_.size(); }

 private:
  friend struct Value;

  struct Node {
    Op op;
    int in0 = -1;
    int in1 = -1;
    Tensor out;
    std::vector<double> adj;     // adjoint, lazily allocated
    double aux = 0.0;            // pow exponent / clamp bound
    int radius = 0;
    double sigma = 0.0;
    int bh = 0, bw = 0, gh = 0, gw = 0;
    Tensor* external = nullptr;  // leaf binding
    std::vector<double> saved;   // op-specific intermediates
  };

  Value push(Node node);
  std::vector<double>& adj(int id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Normal CDF used by kNormalCdf and the entropy models.
double normal_cdf(double x);
// Gaussian kernel weights for radius r and given sigma; sums to 1.
std::vector<double> gaussian_kernel(int radius, double sigma);

// Adam with bias correction. Parameters are registered by name; gradients
// are read from each tensor's grad buffer and cleared by the caller.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg) : cfg_(cfg) {}

  void add_param(const std::string& name, Tensor* t);
  // Applies one Adam update from each parameter's grad buffer and
  // increments the shared step counter. Throws NumericError on non-finite
  // gradients, naming the parameter.
  void step();
  void zero_grad();

  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  struct Slot {
    std::string name;
    Tensor* param = nullptr;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  void set_step_count(int64_t n) { step_ = n; }

 private:
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  int64_t step_ = 0;
};

}  // namespace hlic
