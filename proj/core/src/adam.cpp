#include "rankscl/adam.hpp"

#include <cmath>
#include <string>

#include "rankscl/errors.hpp"

namespace rankscl {

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const Tensor<T>& param, const AdamHyper& hyper) {
  AdamState state;
  state.m = Tensor<T>(param.shape());
  state.v = Tensor<T>(param.shape());
  state.hyper = hyper;
  return state;
}

template <typename T>
AdamResult<T> adam_step(const Tensor<T>& param, const Tensor<T>& grad, const AdamState<T>& state,
                        std::string_view name) {
  if (grad.shape() != param.shape() || state.m.shape() != param.shape() ||
      state.v.shape() != param.shape()) {
    throw DimensionError("adam_step(" + std::string(name) + "): gradient/moment shape " +
                         shape_string(grad.shape()) + " vs parameter " +
                         shape_string(param.shape()));
  }
  if (!grad.all_finite()) {
    throw NumericError("adam_step: non-finite gradient for parameter '" + std::string(name) + "'");
  }

  const AdamHyper& h = state.hyper;
  AdamResult<T> out{param, state};
  out.state.step_count = state.step_count + 1;
  const double t = static_cast<double>(out.state.step_count);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  const double decay = h.learning_rate * h.weight_decay;

  for (std::size_t i = 0; i < param.size(); ++i) {
    double p = param[i];
    p -= decay * p;
    const double g = grad[i];
    const double m = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    const double v = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    out.state.m[i] = static_cast<T>(m);
    out.state.v[i] = static_cast<T>(v);
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    p -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    out.param[i] = static_cast<T>(p);
  }
  return out;
}

template struct AdamState<float>;
template struct AdamState<double>;
template AdamResult<float> adam_step(const Tensor<float>&, const Tensor<float>&,
                                     const AdamState<float>&, std::string_view);
template AdamResult<double> adam_step(const Tensor<double>&, const Tensor<double>&,
                                      const AdamState<double>&, std::string_view);

}  // namespace rankscl
