#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdgan/tensor.hpp"

namespace pdgan {

// Named trainable parameters. std::map keeps iteration order deterministic,
// which fixes gradient/update order across runs.
using ParamMap = std::map<std::string, Tensor>;

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SgdConfig {
  double lr = 1e-5;
  double momentum = 0.0;
};

// Bias-corrected Adam over a named parameter set.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParamMap& params);
  void zero_grad(ParamMap& params);
  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }

 private:
  struct State {
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamConfig cfg_;
  long t_ = 0;
  std::map<std::string, State> state_;
};

class Sgd {
 public:
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) {}

  void step(ParamMap& params);
  void zero_grad(ParamMap& params);
  const SgdConfig& config() const { return cfg_; }

 private:
  SgdConfig cfg_;
  std::map<std::string, std::vector<double>> velocity_;
};

}  // namespace pdgan
