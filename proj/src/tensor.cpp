#include "slatelab/tensor.hpp"

#include <cmath>

namespace slatelab {

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  std::size_t n = 1;
  for (std::size_t dim : shape) n *= dim;
  if (n != data.size())
    throw DimensionError("tensor: shape does not match data length");
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double v) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, v));
}

Tensor Tensor::row(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({1, n}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (shape.empty()) return 1;
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() < 2) return shape.empty() ? 1 : shape[0];
  return shape[1];
}

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t ka = ta ? a.rows() : a.cols();
  const std::size_t kb = tb ? b.cols() : b.rows();
  const std::size_t n = tb ? b.rows() : b.cols();
  if (ka != kb)
    throw DimensionError("matmul: inner dimensions disagree (" +
                         std::to_string(ka) + " vs " + std::to_string(kb) +
                         ")");
  Tensor c = Tensor::zeros(m, n);
  const std::size_t ar = a.rows(), ac = a.cols();
  const std::size_t bc = b.cols();
  (void)ar;
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = &c.data[i * n];
    for (std::size_t k = 0; k < ka; ++k) {
      const double av = ta ? a.data[k * ac + i] : a.data[i * ac + k];
      if (av == 0.0) continue;
      if (!tb) {
        const double* brow = &b.data[k * bc];
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b.data[j * bc + k];
      }
    }
  }
  return c;
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t = Tensor::zeros(rows, cols);
  for (double& x : t.data) x = rng.uniform(-s, s);
  return t;
}

Tensor& ParamStore::create(const std::string& name, Tensor init) {
  auto [it, inserted] = entries_.emplace(name, std::move(init));
  if (!inserted) throw DomainError("param store: duplicate name " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw DomainError("param store: unknown name " + name);
  return it->second;
}

Tensor& ParamStore::lookup(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw DomainError("param store: unknown name " + name);
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : entries_) n += v.numel();
  return n;
}

}  // namespace slatelab
