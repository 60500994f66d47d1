#include "evmarl/diffcomp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace evmarl {

// ---------------------------------------------------------------------------
// Tensor / ParameterStore

std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
  if (shape_product(shape) != values.size())
    throw std::invalid_argument("tensor shape does not match number of values");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape_) {
  const std::size_t n = shape_product(shape_);
  return Tensor(std::move(shape_), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values_) {
  const std::size_t n = values_.size();
  return Tensor({n}, std::move(values_));
}

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

ParamId ParameterStore::add(const std::string& name, std::vector<std::size_t> shape,
                            std::size_t fan_in) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Parameter p;
  p.name = name;
  p.value = Tensor::zeros(std::move(shape));
  const std::size_t n = p.value.size();
  p.grad.assign(n, 0.0);
  p.m.assign(n, 0.0);
  p.v.assign(n, 0.0);
  p.fan_in = std::max<std::size_t>(fan_in, 1);
  const auto id = static_cast<ParamId>(params_.size());
  params_.push_back(std::move(p));
  index_.emplace(name, id);
  return id;
}

ParamId ParameterStore::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

void ParameterStore::init_uniform(Rng& rng) {
  for (auto& p : params_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : p.value.values) x = dist(rng);
  }
}

void ParameterStore::fill(double value) {
  for (auto& p : params_) std::fill(p.value.values.begin(), p.value.values.end(), value);
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad) sq += g * g;
  return std::sqrt(sq);
}

double ParameterStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& p : params_)
      for (double& g : p.grad) g *= k;
  }
  return norm;
}

bool ParameterStore::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.all_finite()) return false;
    for (double g : p.grad)
      if (!std::isfinite(g)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Scalar helpers

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

double apply_act(double x, Activation act) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Softplus: return softplus(x);
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

// d act / d x, written in terms of input x and output y.
double act_grad(double x, double y, Activation act) {
  switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Softplus: return sigmoid(x);
    case Activation::Tanh: return 1.0 - y * y;
  }
  return 1.0;
}

// Four independent accumulators keep the reduction order fixed while still
// giving the compiler room to pipeline.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

void Tape::clear() {
  nodes_.clear();
  vals_.clear();
  grads_.clear();
  extra_.clear();
}

Var Tape::push(Op op, std::size_t n, bool needs_grad) {
  Node node{};
  node.op = op;
  node.needs_grad = needs_grad;
  node.off = static_cast<std::uint32_t>(vals_.size());
  node.n = static_cast<std::uint32_t>(n);
  vals_.resize(vals_.size() + n, 0.0);
  nodes_.push_back(node);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("var does not belong to this tape");
}

std::span<const double> Tape::value(Var v) const {
  check(v);
  return {val(v.id), nodes_[v.id].n};
}

std::size_t Tape::size(Var v) const {
  check(v);
  return nodes_[v.id].n;
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id].needs_grad;
}

std::span<const double> Tape::grad(Var v) const {
  check(v);
  if (grads_.size() < vals_.size()) throw std::logic_error("backward() has not been run");
  return {grads_.data() + nodes_[v.id].off, nodes_[v.id].n};
}

Var Tape::input(std::span<const double> values) {
  Var v = push(Op::Input, values.size(), false);
  std::copy(values.begin(), values.end(), val(v.id));
  return v;
}

Var Tape::variable(std::span<const double> values) {
  Var v = push(Op::Input, values.size(), true);
  std::copy(values.begin(), values.end(), val(v.id));
  return v;
}

Var Tape::scalar(double value) { return input(std::span<const double>(&value, 1)); }

Var Tape::param(ParamId p) {
  const Parameter& prm = (*store_)[p];
  Var v = push(Op::Param, prm.value.size(), true);
  nodes_[v.id].aux = p;
  std::copy(prm.value.values.begin(), prm.value.values.end(), val(v.id));
  return v;
}

Var Tape::affine(ParamId w, ParamId b, Var x) {
  check(x);
  const Parameter& W = (*store_)[w];
  const Parameter& B = (*store_)[b];
  const std::size_t out = W.rows(), in = W.cols();
  if (nodes_[x.id].n != in || B.value.size() != out)
    throw std::invalid_argument("affine: shape mismatch for " + W.name);
  Var y = push(Op::Affine, out, true);
  nodes_[y.id].a = x.id;
  nodes_[y.id].aux = w;
  nodes_[y.id].b = b;
  const double* xv = val(x.id);
  double* yv = val(y.id);
  const double* wv = W.value.values.data();
  for (std::size_t i = 0; i < out; ++i) yv[i] = B.value.values[i] + dot(wv + i * in, xv, in);
  return y;
}

Var Tape::add(Var a, Var b) {
  check(a), check(b);
  const std::size_t n = nodes_[a.id].n;
  if (nodes_[b.id].n != n) throw std::invalid_argument("add: size mismatch");
  Var y = push(Op::Add, n, nodes_[a.id].needs_grad || nodes_[b.id].needs_grad);
  nodes_[y.id].a = a.id;
  nodes_[y.id].b = b.id;
  const double *av = val(a.id), *bv = val(b.id);
  double* yv = val(y.id);
  for (std::size_t i = 0; i < n; ++i) yv[i] = av[i] + bv[i];
  return y;
}

Var Tape::sub(Var a, Var b) {
  check(a), check(b);
  const std::size_t n = nodes_[a.id].n;
  if (nodes_[b.id].n != n) throw std::invalid_argument("sub: size mismatch");
  Var y = push(Op::Sub, n, nodes_[a.id].needs_grad || nodes_[b.id].needs_grad);
  nodes_[y.id].a = a.id;
  nodes_[y.id].b = b.id;
  const double *av = val(a.id), *bv = val(b.id);
  double* yv = val(y.id);
  for (std::size_t i = 0; i < n; ++i) yv[i] = av[i] - bv[i];
  return y;
}

Var Tape::mul(Var a, Var b) {
  check(a), check(b);
  const std::size_t n = nodes_[a.id].n;
  if (nodes_[b.id].n != n) throw std::invalid_argument("mul: size mismatch");
  Var y = push(Op::Mul, n, nodes_[a.id].needs_grad || nodes_[b.id].needs_grad);
  nodes_[y.id].a = a.id;
  nodes_[y.id].b = b.id;
  const double *av = val(a.id), *bv = val(b.id);
  double* yv = val(y.id);
  for (std::size_t i = 0; i < n; ++i) yv[i] = av[i] * bv[i];
  return y;
}

Var Tape::scale(Var a, double k) {
  check(a);
  const std::size_t n = nodes_[a.id].n;
  Var y = push(Op::Scale, n, nodes_[a.id].needs_grad);
  nodes_[y.id].a = a.id;
  nodes_[y.id].k = k;
  const double* av = val(a.id);
  double* yv = val(y.id);
  for (std::size_t i = 0; i < n; ++i) yv[i] = k * av[i];
  return y;
}

Var Tape::add_scalar(Var a, double k) {
  check(a);
  const std::size_t n = nodes_[a.id].n;
  Var y = push(Op::AddScalar, n, nodes_[a.id].needs_grad);
  nodes_[y.id].a = a.id;
  const double* av = val(a.id);
  double* yv = val(y.id);
  for (std::size_t i = 0; i < n; ++i) yv[i] = av[i] + k;
  return y;
}

Var Tape::activation(Var a, Activation act) {
  check(a);
  const std::size_t n = nodes_[a.id].n;
  if (act == Activation::Identity) return a;
  Var y = push(Op::Act, n, nodes_[a.id].needs_grad);
  nodes_[y.id].a = a.id;
  nodes_[y.id].act = act;
  const double* av = val(a.id);
  double* yv = val(y.id);
  for (std::size_t i = 0; i < n; ++i) yv[i] = apply_act(av[i], act);
  return y;
}

Var Tape::log(Var a) {
  check(a);
  const std::size_t n = nodes_[a.id].n;
  Var y = push(Op::Log, n, nodes_[a.id].needs_grad);
  nodes_[y.id].a = a.id;
  const double* av = val(a.id);
  double* yv = val(y.id);
  for (std::size_t i = 0; i < n; ++i) yv[i] = std::log(av[i]);
  return y;
}

Var Tape::square(Var a) { return mul(a, a); }

Var Tape::concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Tape::concat(std::span<const Var> parts) {
  std::size_t n = 0;
  bool needs = false;
  for (Var p : parts) {
    check(p);
    n += nodes_[p.id].n;
    needs = needs || nodes_[p.id].needs_grad;
  }
  Var y = push(Op::Concat, n, needs);
  nodes_[y.id].aux = static_cast<std::uint32_t>(extra_.size());
  nodes_[y.id].b = static_cast<std::uint32_t>(parts.size());
  double* yv = val(y.id);
  for (Var p : parts) {
    extra_.push_back(p.id);
    const double* pv = val(p.id);
    yv = std::copy(pv, pv + nodes_[p.id].n, yv);
  }
  return y;
}

Var Tape::slice(Var a, std::size_t offset, std::size_t n) {
  check(a);
  if (offset + n > nodes_[a.id].n) throw std::out_of_range("slice out of range");
  Var y = push(Op::Slice, n, nodes_[a.id].needs_grad);
  nodes_[y.id].a = a.id;
  nodes_[y.id].aux = static_cast<std::uint32_t>(offset);
  const double* av = val(a.id) + offset;
  std::copy(av, av + n, val(y.id));
  return y;
}

Var Tape::sum(Var a) {
  check(a);
  Var y = push(Op::Sum, 1, nodes_[a.id].needs_grad);
  nodes_[y.id].a = a.id;
  const double* av = val(a.id);
  double s = 0.0;
  for (std::size_t i = 0; i < nodes_[a.id].n; ++i) s += av[i];
  *val(y.id) = s;
  return y;
}

Var Tape::mean(Var a) {
  const double n = static_cast<double>(size(a));
  return scale(sum(a), 1.0 / n);
}

Var Tape::add_n(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("add_n of nothing");
  const std::size_t n = size(parts.front());
  bool needs = false;
  for (Var p : parts) {
    if (size(p) != n) throw std::invalid_argument("add_n: size mismatch");
    needs = needs || nodes_[p.id].needs_grad;
  }
  Var y = push(Op::AddN, n, needs);
  nodes_[y.id].aux = static_cast<std::uint32_t>(extra_.size());
  nodes_[y.id].b = static_cast<std::uint32_t>(parts.size());
  double* yv = val(y.id);
  for (Var p : parts) {
    extra_.push_back(p.id);
    const double* pv = val(p.id);
    for (std::size_t i = 0; i < n; ++i) yv[i] += pv[i];
  }
  return y;
}

Var Tape::log_softmax(Var a) {
  check(a);
  const std::size_t n = nodes_[a.id].n;
  if (n == 0) throw std::invalid_argument("log_softmax of empty vector");
  Var y = push(Op::LogSoftmax, n, nodes_[a.id].needs_grad);
  nodes_[y.id].a = a.id;
  const double* av = val(a.id);
  double* yv = val(y.id);
  const double mx = *std::max_element(av, av + n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(av[i] - mx);
  const double lse = mx + std::log(z);
  for (std::size_t i = 0; i < n; ++i) yv[i] = av[i] - lse;
  return y;
}

void Tape::backward(Var loss, ParameterStore& store) {
  if (nodes_.empty()) throw std::logic_error("backward: no recorded computation");
  check(loss);
  if (nodes_[loss.id].n != 1) throw std::invalid_argument("backward: loss must be a scalar");
  if (&store != store_) throw std::invalid_argument("backward: store does not match tape");
  grads_.assign(vals_.size(), 0.0);
  *gr(loss.id) = 1.0;

  for (std::int64_t idx = loss.id; idx >= 0; --idx) {
    const auto id = static_cast<std::uint32_t>(idx);
    const Node& node = nodes_[id];
    if (!node.needs_grad) continue;
    const std::size_t n = node.n;
    const double* g = grads_.data() + node.off;
    auto wants = [&](std::uint32_t child) { return nodes_[child].needs_grad; };

    switch (node.op) {
      case Op::Input: break;
      case Op::Param: {
        auto& pg = store[node.aux].grad;
        for (std::size_t i = 0; i < n; ++i) pg[i] += g[i];
        break;
      }
      case Op::Affine: {
        Parameter& W = store[node.aux];
        Parameter& B = store[node.b];
        const std::size_t in = W.cols();
        const double* xv = val(node.a);
        for (std::size_t i = 0; i < n; ++i) {
          if (g[i] == 0.0) continue;
          B.grad[i] += g[i];
          axpy(g[i], xv, W.grad.data() + i * in, in);
        }
        if (wants(node.a)) {
          double* gx = gr(node.a);
          const double* wv = W.value.values.data();
          for (std::size_t i = 0; i < n; ++i)
            if (g[i] != 0.0) axpy(g[i], wv + i * in, gx, in);
        }
        break;
      }
      case Op::Add:
      case Op::Sub: {
        const double sign = node.op == Op::Add ? 1.0 : -1.0;
        if (wants(node.a)) axpy(1.0, g, gr(node.a), n);
        if (wants(node.b)) axpy(sign, g, gr(node.b), n);
        break;
      }
      case Op::Mul: {
        const double* av = val(node.a);
        const double* bv = val(node.b);
        if (wants(node.a)) {
          double* ga = gr(node.a);
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
        }
        if (wants(node.b)) {
          double* gb = gr(node.b);
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::Scale: axpy(node.k, g, gr(node.a), n); break;
      case Op::AddScalar: axpy(1.0, g, gr(node.a), n); break;
      case Op::Act: {
        const double* xv = val(node.a);
        const double* yv = val(id);
        double* ga = gr(node.a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * act_grad(xv[i], yv[i], node.act);
        break;
      }
      case Op::Log: {
        const double* xv = val(node.a);
        double* ga = gr(node.a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / xv[i];
        break;
      }
      case Op::Concat: {
        std::size_t off = 0;
        for (std::uint32_t k = 0; k < node.b; ++k) {
          const std::uint32_t child = extra_[node.aux + k];
          const std::size_t cn = nodes_[child].n;
          if (wants(child)) axpy(1.0, g + off, gr(child), cn);
          off += cn;
        }
        break;
      }
      case Op::Slice: axpy(1.0, g, gr(node.a) + node.aux, n); break;
      case Op::Sum: {
        double* ga = gr(node.a);
        for (std::size_t i = 0; i < nodes_[node.a].n; ++i) ga[i] += g[0];
        break;
      }
      case Op::AddN: {
        for (std::uint32_t k = 0; k < node.b; ++k) {
          const std::uint32_t child = extra_[node.aux + k];
          if (wants(child)) axpy(1.0, g, gr(child), n);
        }
        break;
      }
      case Op::LogSoftmax: {
        const double* yv = val(id);
        double* ga = gr(node.a);
        double gs = 0.0;
        for (std::size_t i = 0; i < n; ++i) gs += g[i];
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] - std::exp(yv[i]) * gs;
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Layers

Dense make_dense(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                 Activation act) {
  Dense d;
  d.w = store.add(name + ".w", {out, in}, in);
  d.b = store.add(name + ".b", {out}, in);
  d.in = in;
  d.out = out;
  d.act = act;
  return d;
}

Var dense(Tape& tape, const Dense& layer, Var x) {
  return tape.activation(tape.affine(layer.w, layer.b, x), layer.act);
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     Activation act) {
  if (weights.shape.size() != 2 || weights.shape[1] != input.size() ||
      bias.size() != weights.shape[0])
    throw std::invalid_argument("dense_forward: shape mismatch");
  const std::size_t out = weights.shape[0], in = weights.shape[1];
  std::vector<double> y(out);
  for (std::size_t i = 0; i < out; ++i)
    y[i] = apply_act(bias.values[i] + dot(weights.values.data() + i * in, input.values.data(), in),
                     act);
  return Tensor::vector(std::move(y));
}

GruCell make_gru(ParameterStore& store, const std::string& name, std::size_t in,
                 std::size_t hidden) {
  GruCell c;
  c.w_ih = store.add(name + ".w_ih", {3 * hidden, in}, hidden);
  c.w_hh = store.add(name + ".w_hh", {3 * hidden, hidden}, hidden);
  c.b_ih = store.add(name + ".b_ih", {3 * hidden}, hidden);
  c.b_hh = store.add(name + ".b_hh", {3 * hidden}, hidden);
  c.in = in;
  c.hidden = hidden;
  return c;
}

Var gru_step(Tape& tape, const GruCell& cell, Var x, Var h) {
  const std::size_t H = cell.hidden;
  if (tape.size(x) != cell.in || tape.size(h) != H)
    throw std::invalid_argument("gru_step: shape mismatch");
  Var gi = tape.affine(cell.w_ih, cell.b_ih, x);
  Var gh = tape.affine(cell.w_hh, cell.b_hh, h);
  Var r = tape.sigmoid(tape.add(tape.slice(gi, 0, H), tape.slice(gh, 0, H)));
  Var z = tape.sigmoid(tape.add(tape.slice(gi, H, H), tape.slice(gh, H, H)));
  Var n = tape.tanh(tape.add(tape.slice(gi, 2 * H, H), tape.mul(r, tape.slice(gh, 2 * H, H))));
  return tape.add(n, tape.mul(z, tape.sub(h, n)));
}

GruState gru_step(const GruState& state, const Tensor& input, const ParameterStore& store,
                  const GruCell& cell) {
  Tape tape(store);
  Var h = gru_step(tape, cell, tape.input(input.values), tape.input(state.hidden.values));
  auto v = tape.value(h);
  return GruState{Tensor::vector({v.begin(), v.end()})};
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (double& x : p) x /= z;
  return p;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  if (probs.empty()) throw std::invalid_argument("sample_categorical: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("sample_categorical: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("sample_categorical: probabilities do not sum to 1");
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_nonzero = i;
    acc += probs[i];
    if (u < acc && probs[i] > 0.0) return i;
  }
  return last_nonzero;
}

// ---------------------------------------------------------------------------
// Optimizer

void adam_update(ParameterStore& store, const AdamConfig& cfg) {
  store.step_count += 1;
  const double t = static_cast<double>(store.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : store.params()) {
    auto& w = p.value.values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p.m[i] / c1;
      const double vhat = p.v[i] / c2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      p.grad[i] = 0.0;
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'E', 'V', 'M', 'A', 'R', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename U>
void put_le(std::string& out, U x) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double x) { put_le(out, std::bit_cast<std::uint64_t>(x)); }

class Reader {
 public:
  Reader(const std::string& s, std::size_t limit) : s_(s), limit_(limit) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U x = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      x |= static_cast<U>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return x;
  }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > limit_) throw std::runtime_error("checkpoint truncated");
  }
  const std::string& s_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ParameterStore& store, const std::string& metadata) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, store.step_count);
  put_le<std::uint64_t>(out, metadata.size());
  out += metadata;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& p : store.params()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (auto d : p.value.shape) put_le<std::uint64_t>(out, d);
    put_le<std::uint64_t>(out, p.fan_in);
    for (double x : p.value.values) put_f64(out, x);
    for (double x : p.m) put_f64(out, x);
    for (double x : p.v) put_f64(out, x);
  }
  put_le<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || bytes.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic)");
  const std::size_t body = bytes.size() - 8;
  {
    Reader tail(bytes, bytes.size());
    tail.bytes(body);
    if (tail.get<std::uint64_t>() != fnv1a(bytes.data(), body))
      throw std::runtime_error("checkpoint checksum mismatch");
  }
  Reader r(bytes, body);
  r.bytes(sizeof(kMagic));
  if (r.get<std::uint32_t>() != kVersion) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ck;
  ck.store.step_count = r.get<std::uint64_t>();
  ck.metadata = r.bytes(r.get<std::uint64_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.get<std::uint32_t>());
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) throw std::runtime_error("checkpoint: implausible tensor rank");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    const auto fan_in = r.get<std::uint64_t>();
    const std::size_t n = shape_product(shape);
    if (n * 24 > body) throw std::runtime_error("checkpoint: implausible tensor size");
    Parameter& p = ck.store[ck.store.add(name, shape, fan_in)];
    for (double& x : p.value.values) x = r.f64();
    for (double& x : p.m) x = r.f64();
    for (double& x : p.v) x = r.f64();
  }
  if (r.pos() != body) throw std::runtime_error("checkpoint has trailing bytes");
  return ck;
}

}  // namespace evmarl
