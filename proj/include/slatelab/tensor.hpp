#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slatelab/common.hpp"

namespace slatelab {

/// Dense row-major tensor of doubles. All computation in the project is
/// 64-bit; ops treat tensors as 2-D (scalars are 1x1, vectors 1xN).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor full(std::size_t rows, std::size_t cols, double v);
  static Tensor scalar(double v) { return full(1, 1, v); }
  static Tensor row(std::vector<double> v);

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return numel() == 1; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool finite() const { return all_finite(data); }
};

/// C = op(A) * op(B) with optional transposes. Plain dense matmul.
Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false,
              bool tb = false);

/// Uniform init in [-s, s] with s = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);

/// Named parameter tensors with checkpoint identity. Names are unique and
/// shapes immutable after creation; version increases on every mutation.
class ParamStore {
 public:
  Tensor& create(const std::string& name, Tensor init);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  /// Mutable access for optimizers; shape must be preserved by the caller.
  Tensor& lookup(const std::string& name);
  void bump_version() { ++version_; }

  std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  const std::map<std::string, Tensor>& entries() const { return entries_; }
  std::map<std::string, Tensor>& entries() { return entries_; }

 private:
  std::map<std::string, Tensor> entries_;
  std::uint64_t version_ = 0;
};

}  // namespace slatelab
