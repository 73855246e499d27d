#pragma once

#include <map>

#include "slatelab/tensor.hpp"

namespace slatelab {

/// SGD with optional momentum. Aborts with NumericError if a step would
/// write non-finite parameters.
class Sgd {
 public:
  Sgd(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {}

  void step(ParamStore& params, const std::map<std::string, Tensor>& grads) {
    for (const auto& [name, g] : grads) {
      Tensor& p = params.lookup(name);
      if (g.numel() != p.numel())
        throw DimensionError("sgd: gradient shape mismatch for " + name);
      if (momentum_ != 0.0) {
        auto [it, fresh] = velocity_.try_emplace(name, Tensor::zeros(p.rows(), p.cols()));
        Tensor& v = it->second;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
          v.data[i] = momentum_ * v.data[i] + g.data[i];
          p.data[i] -= lr_ * v.data[i];
        }
      } else {
        for (std::size_t i = 0; i < p.data.size(); ++i)
          p.data[i] -= lr_ * g.data[i];
      }
      if (!p.finite())
        throw NumericError("sgd: non-finite parameter after update: " + name);
    }
    params.bump_version();
  }

 private:
  double lr_;
  double momentum_;
  std::map<std::string, Tensor> velocity_;
};

}  // namespace slatelab
