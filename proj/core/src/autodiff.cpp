#include "spsn/autodiff.hpp"

#include <Eigen/Dense>

#include <cassert>
#include <cmath>

#include "spsn/numerics.hpp"

namespace spsn {

template <typename Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatrixMap = Eigen::Map<RowMatrix<Real>>;
template <typename Real>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Real>>;

// ---------------------------------------------------------------------------
// Tape

template <typename Real>
const Tensor<Real>& Gradients<Real>::of(const Var<Real>& v) const {
  if (!contains(v)) {
    throw std::out_of_range("no gradient recorded for tape node " + std::to_string(v.id()));
  }
  return *grads_[v.id()];
}

template <typename Real>
bool Gradients<Real>::contains(const Var<Real>& v) const {
  return v.id() < grads_.size() && grads_[v.id()].has_value();
}

template <typename Real>
Var<Real> Tape<Real>::leaf(Tensor<Real> value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, {}, requires_grad, true});
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
Var<Real> Tape<Real>::record(Tensor<Real> value, std::vector<std::size_t> inputs,
                             BackwardFn backward) {
  bool needs_grad = false;
  for (auto id : inputs) {
    assert(id < nodes_.size() && "tape inputs must precede their consumer");
    needs_grad = needs_grad || nodes_[id].requires_grad;
  }
  if (!needs_grad) backward = nullptr;
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), needs_grad,
                        false});
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
Tensor<Real>& Tape<Real>::grad_slot(std::size_t id) {
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  auto& slot = grads_[id];
  if (!slot) slot.emplace(nodes_[id].value.shape());
  return *slot;
}

template <typename Real>
Gradients<Real> backward(Tape<Real>& tape, const Var<Real>& loss) {
  if (loss.tape() != &tape) throw std::invalid_argument("loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  tape.grads_.assign(tape.nodes_.size(), std::nullopt);
  tape.grad_slot(loss.id()).fill(Real{1});

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = tape.nodes_[i];
    if (node.leaf || !node.backward || !tape.grads_[i]) continue;
    // The output gradient is complete here: all consumers have larger ids.
    Tensor<Real> grad_out = std::move(*tape.grads_[i]);
    tape.grads_[i].reset();
    node.backward(grad_out, tape);
  }

  Gradients<Real> out;
  out.grads_.resize(tape.nodes_.size());
  for (std::size_t i = 0; i < tape.nodes_.size(); ++i) {
    const auto& node = tape.nodes_[i];
    if (!node.leaf || !node.requires_grad) continue;
    if (tape.grads_[i]) {
      out.grads_[i] = std::move(*tape.grads_[i]);
    } else {
      out.grads_[i].emplace(node.value.shape());
    }
  }
  tape.grads_.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Operations

namespace {

template <typename Real>
void add_into(Tensor<Real>& dst, const Tensor<Real>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename Real>
Tensor<Real> map_values(const Tensor<Real>& x, auto&& fn) {
  Tensor<Real> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<Real>(fn(x[i]));
  return y;
}

}  // namespace

template <typename Real>
Var<Real> op_dense(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (xs.empty() || ws.size() != 2 || xs.back() != ws[0] || bias.shape() != Shape{ws[1]}) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "dense: incompatible shapes x" + shape_string(xs) + " W" +
                        shape_string(ws) + " b" + shape_string(bias.shape()));
  }
  const auto n_in = static_cast<Eigen::Index>(ws[0]);
  const auto n_out = static_cast<Eigen::Index>(ws[1]);
  const auto rows = static_cast<Eigen::Index>(x.value().size() / ws[0]);

  Shape ys = xs;
  ys.back() = ws[1];
  Tensor<Real> y(ys);
  {
    ConstMatrixMap<Real> X(x.value().data().data(), rows, n_in);
    ConstMatrixMap<Real> W(weight.value().data().data(), n_in, n_out);
    Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>> b(bias.value().data().data(),
                                                                n_out);
    MatrixMap<Real> Y(y.data().data(), rows, n_out);
    Y.noalias() = X * W;
    Y.rowwise() += b;
  }

  const auto xid = x.id(), wid = weight.id(), bid = bias.id();
  return x.tape()->record(
      std::move(y), {xid, wid, bid},
      [xid, wid, bid, rows, n_in, n_out](const Tensor<Real>& g, Tape<Real>& tape) {
        ConstMatrixMap<Real> G(g.data().data(), rows, n_out);
        ConstMatrixMap<Real> X(tape.value(xid).data().data(), rows, n_in);
        ConstMatrixMap<Real> W(tape.value(wid).data().data(), n_in, n_out);
        if (tape.requires_grad(xid)) {
          MatrixMap<Real> GX(tape.grad_slot(xid).data().data(), rows, n_in);
          GX.noalias() += G * W.transpose();
        }
        if (tape.requires_grad(wid)) {
          MatrixMap<Real> GW(tape.grad_slot(wid).data().data(), n_in, n_out);
          GW.noalias() += X.transpose() * G;
        }
        if (tape.requires_grad(bid)) {
          Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>> GB(
              tape.grad_slot(bid).data().data(), n_out);
          GB += G.colwise().sum();
        }
      });
}

template <typename Real>
Var<Real> op_relu(const Var<Real>& x) {
  auto y = map_values(x.value(), [](Real v) { return v > Real{0} ? v : Real{0}; });
  const auto xid = x.id();
  return x.tape()->record(std::move(y), {xid}, [xid](const Tensor<Real>& g, Tape<Real>& tape) {
    const auto& xv = tape.value(xid);
    auto& gx = tape.grad_slot(xid);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > Real{0}) gx[i] += g[i];
    }
  });
}

template <typename Real>
Var<Real> op_add(const Var<Real>& a, const Var<Real>& b) {
  require_shape(b.shape(), a.shape(), "add");
  Tensor<Real> y = a.value();
  add_into(y, b.value());
  const auto aid = a.id(), bid = b.id();
  return a.tape()->record(std::move(y), {aid, bid},
                          [aid, bid](const Tensor<Real>& g, Tape<Real>& tape) {
                            if (tape.requires_grad(aid)) add_into(tape.grad_slot(aid), g);
                            if (tape.requires_grad(bid)) add_into(tape.grad_slot(bid), g);
                          });
}

template <typename Real>
Var<Real> op_scale(const Var<Real>& a, double factor) {
  const auto c = static_cast<Real>(factor);
  auto y = map_values(a.value(), [c](Real v) { return v * c; });
  const auto aid = a.id();
  return a.tape()->record(std::move(y), {aid}, [aid, c](const Tensor<Real>& g, Tape<Real>& tape) {
    auto& ga = tape.grad_slot(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

template <typename Real>
Var<Real> op_sum(const Var<Real>& x) {
  double total = 0.0;
  for (auto v : x.value().data()) total += v;
  const auto xid = x.id();
  return x.tape()->record(Tensor<Real>::scalar(static_cast<Real>(total)), {xid},
                          [xid](const Tensor<Real>& g, Tape<Real>& tape) {
                            auto& gx = tape.grad_slot(xid);
                            const Real gv = g[0];
                            for (auto& v : gx.storage()) v += gv;
                          });
}

template <typename Real>
Var<Real> op_causal_conv(const Var<Real>& x, std::span<const Real> kernel) {
  auto y = causal_fft_convolve<Real>(kernel, x.value());
  const auto xid = x.id();
  std::vector<Real> k(kernel.begin(), kernel.end());
  return x.tape()->record(std::move(y), {xid},
                          [xid, k = std::move(k)](const Tensor<Real>& g, Tape<Real>& tape) {
                            add_into(tape.grad_slot(xid),
                                     causal_fft_correlate<Real>(std::span<const Real>(k), g));
                          });
}

double surrogate_factor(double delta, double slope) {
  const double d = 1.0 + slope * std::abs(delta);
  return 1.0 / (d * d);
}

template <typename Real>
Var<Real> op_heaviside_surrogate(const Var<Real>& u, double threshold, double slope) {
  if (!(slope > 0.0)) throw ConfigError("surrogate slope must be > 0");
  auto s = map_values(u.value(), [threshold](Real v) {
    return static_cast<double>(v) >= threshold ? 1.0 : 0.0;
  });
  const auto uid = u.id();
  return u.tape()->record(
      std::move(s), {uid}, [uid, threshold, slope](const Tensor<Real>& g, Tape<Real>& tape) {
        const auto& uv = tape.value(uid);
        auto& gu = tape.grad_slot(uid);
        for (std::size_t i = 0; i < g.size(); ++i) {
          gu[i] += g[i] * static_cast<Real>(surrogate_factor(uv[i] - threshold, slope));
        }
      });
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Real>
Var<Real> op_sigmoid_bernoulli(const Var<Real>& u, Rng& rng, double offset) {
  const auto& uv = u.value();
  Tensor<Real> s(uv.shape());
  Tensor<Real> factor(uv.shape());
  for (std::size_t i = 0; i < uv.size(); ++i) {
    const double rho = sigmoid(static_cast<double>(uv[i]) - offset);
    s[i] = rng.uniform() < rho ? Real{1} : Real{0};
    factor[i] = static_cast<Real>(rho * rho * (1.0 - rho));
  }
  const auto uid = u.id();
  return u.tape()->record(std::move(s), {uid},
                          [uid, factor = std::move(factor)](const Tensor<Real>& g,
                                                            Tape<Real>& tape) {
                            auto& gu = tape.grad_slot(uid);
                            for (std::size_t i = 0; i < g.size(); ++i) gu[i] += g[i] * factor[i];
                          });
}

template <typename Real>
Tensor<Real> sample_logistic_noise(Rng& rng, const Shape& shape) {
  auto g1 = sample_gumbel<Real>(rng, shape);
  auto g2 = sample_gumbel<Real>(rng, shape);
  for (std::size_t i = 0; i < g1.size(); ++i) g1[i] -= g2[i];
  return g1;
}

namespace {

template <typename Real>
Var<Real> gumbel_impl(const Var<Real>& u, double temperature, const Tensor<Real>& noise,
                      bool hard) {
  if (!(temperature > 0.0)) throw ConfigError("Gumbel temperature must be > 0");
  require_shape(noise.shape(), u.shape(), "gumbel noise");
  const auto& uv = u.value();
  Tensor<Real> out(uv.shape());
  Tensor<Real> factor(uv.shape());
  for (std::size_t i = 0; i < uv.size(); ++i) {
    const double y = sigmoid((static_cast<double>(uv[i]) + noise[i]) / temperature);
    out[i] = hard ? (y >= 0.5 ? Real{1} : Real{0}) : static_cast<Real>(y);
    factor[i] = static_cast<Real>(y * (1.0 - y) / temperature);
  }
  const auto uid = u.id();
  return u.tape()->record(std::move(out), {uid},
                          [uid, factor = std::move(factor)](const Tensor<Real>& g,
                                                            Tape<Real>& tape) {
                            auto& gu = tape.grad_slot(uid);
                            for (std::size_t i = 0; i < g.size(); ++i) gu[i] += g[i] * factor[i];
                          });
}

}  // namespace

template <typename Real>
Var<Real> op_gumbel_relaxed(const Var<Real>& u, double temperature, const Tensor<Real>& noise) {
  return gumbel_impl(u, temperature, noise, false);
}

template <typename Real>
Var<Real> op_gumbel_spike(const Var<Real>& u, double temperature, const Tensor<Real>& noise) {
  return gumbel_impl(u, temperature, noise, true);
}

template <typename Real>
Var<Real> op_gumbel_spike(const Var<Real>& u, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw ConfigError("Gumbel temperature must be > 0");
  return gumbel_impl(u, temperature, sample_logistic_noise<Real>(rng, u.shape()), true);
}

#define SPSN_INSTANTIATE(Real)                                                                \
  template class Gradients<Real>;                                                           \
  template class Tape<Real>;                                                                \
  template Gradients<Real> backward<Real>(Tape<Real>&, const Var<Real>&);                   \
  template Var<Real> op_dense<Real>(const Var<Real>&, const Var<Real>&, const Var<Real>&);  \
  template Var<Real> op_relu<Real>(const Var<Real>&);                                       \
  template Var<Real> op_add<Real>(const Var<Real>&, const Var<Real>&);                      \
  template Var<Real> op_scale<Real>(const Var<Real>&, double);                              \
  template Var<Real> op_sum<Real>(const Var<Real>&);                                        \
  template Var<Real> op_causal_conv<Real>(const Var<Real>&, std::span<const Real>);         \
  template Var<Real> op_heaviside_surrogate<Real>(const Var<Real>&, double, double);        \
  template Var<Real> op_sigmoid_bernoulli<Real>(const Var<Real>&, Rng&, double);            \
  template Tensor<Real> sample_logistic_noise<Real>(Rng&, const Shape&);                    \
  template Var<Real> op_gumbel_relaxed<Real>(const Var<Real>&, double, const Tensor<Real>&); \
  template Var<Real> op_gumbel_spike<Real>(const Var<Real>&, double, const Tensor<Real>&);   \
  template Var<Real> op_gumbel_spike<Real>(const Var<Real>&, double, Rng&);

SPSN_INSTANTIATE(float)
SPSN_INSTANTIATE(double)

#undef SPSN_INSTANTIATE

}  // namespace spsn
