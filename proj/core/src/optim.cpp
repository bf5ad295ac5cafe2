#include "pdgan/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pdgan {

void Adam::step(ParamMap& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (auto& [name, param] : params) {
    if (!param.has_grad()) continue;
    auto& st = state_[name];
    const auto& g = param.grad();
    auto& theta = param.data();
    if (st.m.empty()) {
      st.m.assign(g.size(), 0.0);
      st.v.assign(g.size(), 0.0);
    }
    if (st.m.size() != g.size())
      throw std::runtime_error("adam: state shape mismatch for " + name);
    for (size_t i = 0; i < g.size(); ++i) {
      st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g[i];
      st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mhat = st.m[i] / bc1;
      double vhat = st.v[i] / bc2;
      theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad(ParamMap& params) {
  for (auto& [name, param] : params) param.zero_grad();
}

void Sgd::step(ParamMap& params) {
  for (auto& [name, param] : params) {
    if (!param.has_grad()) continue;
    const auto& g = param.grad();
    auto& theta = param.data();
    if (cfg_.momentum == 0.0) {
      for (size_t i = 0; i < g.size(); ++i) theta[i] -= cfg_.lr * g[i];
    } else {
      auto& v = velocity_[name];
      if (v.empty()) v.assign(g.size(), 0.0);
      if (v.size() != g.size())
        throw std::runtime_error("sgd: velocity shape mismatch for " + name);
      for (size_t i = 0; i < g.size(); ++i) {
        v[i] = cfg_.momentum * v[i] + g[i];
        theta[i] -= cfg_.lr * v[i];
      }
    }
  }
}

void Sgd::zero_grad(ParamMap& params) {
  for (auto& [name, param] : params) param.zero_grad();
}

}  // namespace pdgan
