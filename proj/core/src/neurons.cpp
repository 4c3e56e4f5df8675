#include "spsn/neurons.hpp"

#include <cmath>
#include <vector>

#include "spsn/numerics.hpp"

namespace spsn {

double NeuronParams::alpha() const { return std::exp(-dt / tau_syn); }
double NeuronParams::beta() const { return std::exp(-dt / tau_mem); }

void NeuronParams::validate() const {
  if (!(tau_syn > 0.0) || !(tau_mem > 0.0) || !(dt > 0.0)) {
    throw ConfigError("neuron time constants and dt must be > 0");
  }
  if (!std::isfinite(u_th)) throw ConfigError("u_th must be finite");
}

namespace {

template <typename Real>
void require_sequence(const Var<Real>& x, const char* what) {
  if (x.value().rank() != 3) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    std::string(what) + ": expected [T x B x N] input, got " +
                        shape_string(x.shape()));
  }
  require_finite(x.value(), what);
}

}  // namespace

template <typename Real>
SpikingOutput<Real> lif_forward(const Var<Real>& x, const NeuronParams& params,
                                double surrogate_slope) {
  params.validate();
  require_sequence(x, "lif_forward");
  if (!(surrogate_slope > 0.0)) throw ConfigError("surrogate slope must be > 0");

  const auto& xv = x.value();
  const std::size_t steps = xv.dim(0);
  const std::size_t lanes = xv.dim(1) * xv.dim(2);
  const Real alpha = static_cast<Real>(params.alpha());
  const Real beta = static_cast<Real>(params.beta());
  const Real gain = Real{1} - beta;
  const Real th = static_cast<Real>(params.u_th);

  Tensor<Real> current(xv.shape());
  Tensor<Real> potential(xv.shape());
  Tensor<Real> spikes(xv.shape());
  std::vector<Real> i_prev(lanes, Real{0}), u_prev(lanes, Real{0}), s_prev(lanes, Real{0});
  for (std::size_t t = 0; t < steps; ++t) {
    const Real* xr = xv.data().data() + t * lanes;
    Real* ir = current.data().data() + t * lanes;
    Real* ur = potential.data().data() + t * lanes;
    Real* sr = spikes.data().data() + t * lanes;
    for (std::size_t l = 0; l < lanes; ++l) {
      const Real i = alpha * i_prev[l] + xr[l];
      const Real u = (beta * u_prev[l] + gain * i) * (Real{1} - s_prev[l]);
      const Real s = u >= th ? Real{1} : Real{0};
      ir[l] = i;
      ur[l] = u;
      sr[l] = s;
      i_prev[l] = i;
      u_prev[l] = u;
      s_prev[l] = s;
    }
  }

  auto& tape = *x.tape();
  auto current_var = tape.constant(std::move(current));
  auto potential_var = tape.constant(std::move(potential));
  const auto xid = x.id();
  const auto uid = potential_var.id();
  const double th_d = params.u_th;

  auto spikes_var = tape.record(
      std::move(spikes), {xid, uid},
      [=](const Tensor<Real>& g, Tape<Real>& tp) {
        const auto& uv = tp.value(uid);
        auto& gx = tp.grad_slot(xid);
        std::vector<Real> du_carry(lanes, Real{0}), di_carry(lanes, Real{0});
        for (std::size_t t = steps; t-- > 0;) {
          const Real* ur = uv.data().data() + t * lanes;
          const Real* prev = t > 0 ? uv.data().data() + (t - 1) * lanes : nullptr;
          const Real* gr = g.data().data() + t * lanes;
          Real* gxr = gx.data().data() + t * lanes;
          for (std::size_t l = 0; l < lanes; ++l) {
            const Real gate = (prev && prev[l] >= th) ? Real{0} : Real{1};
            const Real du =
                gr[l] * static_cast<Real>(surrogate_factor(ur[l] - th_d, surrogate_slope)) +
                du_carry[l];
            const Real di = du * gate * gain + di_carry[l];
            gxr[l] += di;
            du_carry[l] = du * gate * beta;
            di_carry[l] = di * alpha;
          }
        }
      });
  return {spikes_var, {current_var, potential_var}};
}

template <typename Real>
MembraneTrace<Real> li_forward_sequential(const Var<Real>& x, const NeuronParams& params) {
  params.validate();
  require_sequence(x, "li_forward_sequential");
  const auto& xv = x.value();
  const std::size_t steps = xv.dim(0);
  const std::size_t lanes = xv.dim(1) * xv.dim(2);
  const Real alpha = static_cast<Real>(params.alpha());
  const Real beta = static_cast<Real>(params.beta());
  const Real gain = Real{1} - beta;

  Tensor<Real> current(xv.shape());
  Tensor<Real> potential(xv.shape());
  std::vector<Real> i_prev(lanes, Real{0}), u_prev(lanes, Real{0});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < lanes; ++l) {
      const std::size_t k = t * lanes + l;
      i_prev[l] = alpha * i_prev[l] + xv[k];
      u_prev[l] = beta * u_prev[l] + gain * i_prev[l];
      current[k] = i_prev[l];
      potential[k] = u_prev[l];
    }
  }

  auto& tape = *x.tape();
  auto current_var = tape.constant(std::move(current));
  const auto xid = x.id();
  auto potential_var =
      tape.record(std::move(potential), {xid}, [=](const Tensor<Real>& g, Tape<Real>& tp) {
        auto& gx = tp.grad_slot(xid);
        std::vector<Real> du(lanes, Real{0}), di(lanes, Real{0});
        for (std::size_t t = steps; t-- > 0;) {
          for (std::size_t l = 0; l < lanes; ++l) {
            const std::size_t k = t * lanes + l;
            du[l] = g[k] + beta * du[l];
            di[l] = gain * du[l] + alpha * di[l];
            gx[k] += di[l];
          }
        }
      });
  return {current_var, potential_var};
}

template <typename Real>
MembraneTrace<Real> li_forward_parallel(const Var<Real>& x, const NeuronParams& params) {
  params.validate();
  require_sequence(x, "li_forward_parallel");
  const std::size_t steps = x.value().dim(0);
  const auto current_kernel = build_decay_kernel<Real>(params.alpha(), 1.0, steps);
  const auto membrane_kernel = build_decay_kernel<Real>(params.beta(), 1.0 - params.beta(), steps);
  auto current = op_causal_conv<Real>(x, current_kernel.values);
  auto potential = op_causal_conv<Real>(current, membrane_kernel.values);
  return {current, potential};
}

std::vector<double> membrane_kernel(const NeuronParams& params, std::size_t length) {
  params.validate();
  const double alpha = params.alpha();
  const double beta = params.beta();
  std::vector<double> c(length);
  double beta_pow = 1.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    acc = alpha * acc + (1.0 - beta) * beta_pow;
    c[t] = acc;
    beta_pow *= beta;
  }
  return c;
}

template <typename Real>
Var<Real> li_potential_parallel(const Var<Real>& x, const NeuronParams& params) {
  require_sequence(x, "li_potential_parallel");
  const auto kernel = membrane_kernel(params, x.value().dim(0));
  const std::vector<Real> values(kernel.begin(), kernel.end());
  return op_causal_conv<Real>(x, values);
}

double escape_intensity(double u, double a, double b, double c) {
  if (!(a > 0.0)) throw ConfigError("escape parameter a must be > 0");
  if (c == 0.0) throw ConfigError("escape parameter c must be non-zero");
  return std::exp((u - b) / c) / a;
}

template <typename Real>
Tensor<Real> escape_rate(const Tensor<Real>& u, double a, double b, double c, double dt) {
  Tensor<Real> p(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) {
    p[i] = static_cast<Real>(std::min(1.0, escape_intensity(u[i], a, b, c) * dt));
  }
  return p;
}

template <typename Real>
Var<Real> op_escape_spike(const Var<Real>& u, double a, double b, double c, double dt,
                          Rng& rng) {
  const auto& uv = u.value();
  Tensor<Real> s(uv.shape());
  Tensor<Real> factor(uv.shape());
  for (std::size_t i = 0; i < uv.size(); ++i) {
    const double raw = escape_intensity(uv[i], a, b, c) * dt;
    const double p = std::min(1.0, raw);
    s[i] = rng.uniform() < p ? Real{1} : Real{0};
    const double dp = raw < 1.0 ? raw / c : 0.0;
    factor[i] = static_cast<Real>(p * dp);
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
SpikingOutput<Real> spsn_forward(const Var<Real>& x, const NeuronParams& params,
                                 const FiringOptions& firing, Rng& rng) {
  params.validate();
  MembraneTrace<Real> trace{Var<Real>{}, li_potential_parallel(x, params)};
  Var<Real> spikes;
  switch (firing.kind) {
    case FiringKind::SigmoidBernoulli:
      spikes = op_sigmoid_bernoulli(trace.potential, rng, firing.u_offset);
      break;
    case FiringKind::GumbelSoftmax:
      spikes = op_gumbel_spike(trace.potential, firing.temperature, rng);
      break;
    case FiringKind::Escape:
      spikes = op_escape_spike(trace.potential, firing.escape.a,
                               firing.escape.b.value_or(params.u_th), firing.escape.c,
                               params.dt, rng);
      break;
    default:
      throw ConfigError("unknown firing variant");
  }
  return {spikes, trace};
}

template <typename Real>
MembraneTrace<Real> readout_forward(const Var<Real>& x, const NeuronParams& params,
                                    std::size_t classes) {
  if (x.value().rank() != 3 || x.value().dim(2) != classes) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "readout expects " + std::to_string(classes) + " class lanes, got " +
                        shape_string(x.shape()));
  }
  return li_forward_parallel(x, params);
}

#define SPSN_INSTANTIATE(Real)                                                                \
  template SpikingOutput<Real> lif_forward<Real>(const Var<Real>&, const NeuronParams&,     \
                                                 double);                                  \
  template MembraneTrace<Real> li_forward_sequential<Real>(const Var<Real>&,                \
                                                           const NeuronParams&);           \
  template MembraneTrace<Real> li_forward_parallel<Real>(const Var<Real>&,                  \
                                                         const NeuronParams&);             \
  template Var<Real> li_potential_parallel<Real>(const Var<Real>&, const NeuronParams&);    \
  template SpikingOutput<Real> spsn_forward<Real>(const Var<Real>&, const NeuronParams&,    \
                                                  const FiringOptions&, Rng&);              \
  template Tensor<Real> escape_rate<Real>(const Tensor<Real>&, double, double, double,      \
                                          double);                                          \
  template Var<Real> op_escape_spike<Real>(const Var<Real>&, double, double, double, double, \
                                           Rng&);                                           \
  template MembraneTrace<Real> readout_forward<Real>(const Var<Real>&, const NeuronParams&, \
                                                     std::size_t);

SPSN_INSTANTIATE(float)
SPSN_INSTANTIATE(double)

#undef SPSN_INSTANTIATE

}  // namespace spsn
