#pragma once

// A small reverse-mode differentiation engine over dense vectors.
//
// Values live in a flat arena owned by a Tape. Parameters live in a
// ParameterStore and are referenced by index, so a Tape never copies a
// weight matrix; gradients are scattered into the store during backward().

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace evmarl {

using Rng = std::mt19937_64;

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> values_);
  static Tensor zeros(std::vector<std::size_t> shape_);
  static Tensor vector(std::vector<double> values_);

  std::size_t size() const { return values.size(); }
  bool all_finite() const;
};

std::size_t shape_product(std::span<const std::size_t> shape);

struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> grad;
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  std::size_t fan_in = 1;

  std::size_t rows() const { return value.shape.empty() ? 1 : value.shape.front(); }
  std::size_t cols() const { return value.shape.size() < 2 ? 1 : value.shape[1]; }
};

using ParamId = std::uint32_t;

class ParameterStore {
 public:
  /// Registers a zero-initialized parameter. Names must be unique.
  ParamId add(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in);

  ParamId id(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Parameter& operator[](ParamId id) { return params_[id]; }
  const Parameter& operator[](ParamId id) const { return params_[id]; }
  Parameter& get(const std::string& name) { return params_[id(name)]; }
  const Parameter& get(const std::string& name) const { return params_[id(name)]; }

  std::span<Parameter> params() { return params_; }
  std::span<const Parameter> params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], in registration order.
  void init_uniform(Rng& rng);
  void fill(double value);
  void zero_grad();
  double grad_norm() const;
  /// Rescales gradients so their global L2 norm is at most max_norm.
  /// Returns the norm before clipping.
  double clip_grad_norm(double max_norm);
  bool all_finite() const;

  std::uint64_t step_count = 0;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, ParamId> index_;
};

enum class Activation { Identity, ReLU, Sigmoid, Softplus, Tanh };

double softplus(double x);
double sigmoid(double x);

/// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
};

class Tape {
 public:
  explicit Tape(const ParameterStore& store) : store_(&store) {}

  void clear();
  std::size_t num_nodes() const { return nodes_.size(); }

  Var input(std::span<const double> values);
  /// An input whose gradient is kept, readable through grad() after backward.
  Var variable(std::span<const double> values);
  Var scalar(double value);
  /// Copies a parameter onto the tape; gradient flows back into the store.
  Var param(ParamId p);
  /// W x + b with W of shape [out, in].
  Var affine(ParamId w, ParamId b, Var x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var add_scalar(Var a, double k);
  Var activation(Var a, Activation act);
  Var sigmoid(Var a) { return activation(a, Activation::Sigmoid); }
  Var tanh(Var a) { return activation(a, Activation::Tanh); }
  Var relu(Var a) { return activation(a, Activation::ReLU); }
  Var softplus(Var a) { return activation(a, Activation::Softplus); }
  Var log(Var a);
  Var square(Var a);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts);
  Var slice(Var a, std::size_t offset, std::size_t n);
  Var sum(Var a);
  Var mean(Var a);
  /// Elementwise sum of same-sized vars.
  Var add_n(std::span<const Var> parts);
  Var log_softmax(Var a);

  std::span<const double> value(Var v) const;
  double scalar_value(Var v) const { return value(v)[0]; }
  std::size_t size(Var v) const;
  bool requires_grad(Var v) const;

  /// Accumulates d(loss)/d(param) into store gradients. The store must be the
  /// one this tape reads from. Throws if the tape is empty or loss is not a
  /// scalar.
  void backward(Var loss, ParameterStore& store);

  /// Gradient of the last backward() with respect to a tape node.
  std::span<const double> grad(Var v) const;

 private:
  enum class Op : std::uint8_t {
    Input, Param, Affine, Add, Sub, Mul, Scale, AddScalar, Act, Log, Concat, Slice, Sum, AddN,
    LogSoftmax,
  };
  struct Node {
    Op op;
    bool needs_grad;
    Activation act;
    std::uint32_t a, b;
    std::uint32_t off, n;
    std::uint32_t aux;  // param id, extra-list offset, or slice offset
    double k;
  };

  Var push(Op op, std::size_t n, bool needs_grad);
  double* val(std::uint32_t id) { return vals_.data() + nodes_[id].off; }
  const double* val(std::uint32_t id) const { return vals_.data() + nodes_[id].off; }
  double* gr(std::uint32_t id) { return grads_.data() + nodes_[id].off; }
  void check(Var v) const;

  const ParameterStore* store_;
  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> grads_;
  std::vector<std::uint32_t> extra_;
};

struct Dense {
  ParamId w = 0;
  ParamId b = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::Identity;
};

Dense make_dense(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                 Activation act);
Var dense(Tape& tape, const Dense& layer, Var x);

/// Value-level dense layer: activation(W x + b). Throws on shape mismatch.
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     Activation act);

struct GruCell {
  ParamId w_ih = 0;  // [3H, in]   rows: reset, update, candidate
  ParamId w_hh = 0;  // [3H, H]
  ParamId b_ih = 0;
  ParamId b_hh = 0;
  std::size_t in = 0;
  std::size_t hidden = 0;
};

GruCell make_gru(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden);

/// r = sig(Wir x + bir + Whr h + bhr), z = sig(...), n = tanh(Win x + bin + r*(Whn h + bhn)),
/// h' = (1 - z) * n + z * h.
Var gru_step(Tape& tape, const GruCell& cell, Var x, Var h);

struct GruState {
  Tensor hidden;
};

GruState gru_step(const GruState& state, const Tensor& input, const ParameterStore& store,
                  const GruCell& cell);

std::vector<double> softmax(std::span<const double> logits);

/// Index drawn from probs with one uniform draw. Throws std::invalid_argument
/// unless probs sum to 1 within 1e-6 and are nonnegative.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam step over every parameter; increments step_count and
/// clears gradients.
void adam_update(ParameterStore& store, const AdamConfig& cfg);

/// Binary checkpoint: version header, metadata blob, then every parameter
/// with shape, values and both moment buffers as little-endian float64,
/// followed by a 64-bit FNV-1a checksum of all preceding bytes.
std::string serialize_checkpoint(const ParameterStore& store, const std::string& metadata);

struct Checkpoint {
  ParameterStore store;
  std::string metadata;
};

/// Throws std::runtime_error on bad magic, version, truncation or checksum.
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace evmarl
