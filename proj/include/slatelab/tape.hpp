#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slatelab/tensor.hpp"

namespace slatelab {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Activation { identity, relu, tanh, sigmoid };

/// Reverse-mode computation tape. Forward ops append nodes; backward()
/// replays them in reverse and returns d(loss)/d(param) for every entry of
/// the bound ParamStore (zeros for parameters the loss does not reach).
///
/// All ops treat values as 2-D row-major matrices; scalars are 1x1.
class Tape {
 public:
  Var constant(Tensor v);
  Var constant_row(std::vector<double> v) { return constant(Tensor::row(std::move(v))); }
  Var scalar(double v) { return constant(Tensor::scalar(v)); }

  /// Leaf bound to a named parameter; cached so repeated lookups share one
  /// node and gradients accumulate. A tape binds to a single store.
  Var param(const ParamStore& store, const std::string& name);

  const Tensor& val(Var v) const { return nodes_[check(v)].value; }
  double scalar_val(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // --- arithmetic ---
  Var matmul(Var a, Var b, bool ta = false, bool tb = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_rowvec(Var m, Var rowv);  // broadcast 1xC over RxC
  Var affine(Var a, double k, double b);  // k*a + b elementwise
  Var scale(Var a, double k) { return affine(a, k, 0.0); }

  // --- nonlinearities ---
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh_(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var clamp(Var a, double lo, double hi);
  Var activation(Var a, Activation act);

  /// Row-wise temperature softmax with max subtraction; beta > 0.
  Var softmax_rows(Var a, double beta);
  /// Softmax over a 1xN vector restricted to keep[i] != 0; dropped entries
  /// are exactly zero in the output.
  Var masked_softmax(Var logits, const std::vector<std::uint8_t>& keep,
                     double beta);

  // --- structure ---
  Var concat_cols(std::span<const Var> parts);
  Var concat_cols(std::initializer_list<Var> parts);
  Var stack_rows(std::span<const Var> rows1xc);
  Var stack_rows(std::initializer_list<Var> rows1xc);
  Var row(Var m, std::size_t i);
  Var pick(Var v, std::size_t flat_index);  // scalar element
  Var gather_rows(Var table, const std::vector<int>& ids);
  Var tile_rows(Var rowv, std::size_t n);
  Var flatten_row(Var a);                   // reshape to 1xnumel
  Var pad_cols(Var rowv, std::size_t width);  // zero-pad 1xC to 1xwidth

  // --- reductions ---
  Var sum(Var a);
  Var mean(Var a);
  Var row_mean(Var m);  // 1xC mean over rows
  Var sum_cols(Var m);  // Rx1 sum over each row
  Var prod(Var a);      // product of all elements
  Var wsum(Var a, std::vector<double> w);  // sum_i w[i]*a[i] over flat data
  Var min2(Var a, Var b);  // elementwise min; ties route grad to a

  /// Backprop from a scalar loss. Returns gradients for every parameter in
  /// the bound store; disconnected parameters get zero tensors.
  std::map<std::string, Tensor> backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    std::function<void()> backprop;  // may be empty for leaves
    int param_index = -1;
  };

  int check(Var v) const;
  Tensor& grad_of(int id);
  bool touched(int id) const { return nodes_[id].has_grad; }
  Var push(Tensor value, std::function<void()> backprop = nullptr);

  std::vector<Node> nodes_;
  const ParamStore* store_ = nullptr;
  std::vector<std::string> param_names_;
  std::unordered_map<std::string, int> param_cache_;
};

/// activation(input * weights + bias). input RxK, weights KxN, bias 1xN.
Var dense_forward(Tape& t, Var input, Var weights, Var bias, Activation act);

struct GruParams {
  Var wr, ur, br;
  Var wz, uz, bz;
  Var wh, uh, bh;
};

GruParams gru_params(Tape& t, const ParamStore& ps, const std::string& prefix);

/// Standard GRU update. Convention: h_next = z*h_prev + (1-z)*candidate,
/// so an update gate saturated at 1 keeps the previous state unchanged.
Var gru_cell(Tape& t, Var x, Var h_prev, const GruParams& p);

/// Create the nine GRU parameter tensors "<prefix>.{wr,ur,br,...}".
void init_gru_params(ParamStore& ps, const std::string& prefix,
                     std::size_t in_dim, std::size_t hidden_dim, Rng& rng);

/// Plain (non-tape) temperature softmax used by evaluation-side code.
std::vector<double> softmax_values(const std::vector<double>& logits,
                                   double beta);

}  // namespace slatelab
