#include "slatelab/tape.hpp"

#include <algorithm>
#include <cmath>

namespace slatelab {

int Tape::check(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw DomainError("tape: invalid var handle");
  return v.id;
}

Tensor& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::push(Tensor value, std::function<void()> backprop) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, std::move(backprop), -1});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor v) { return push(std::move(v)); }

Var Tape::param(const ParamStore& store, const std::string& name) {
  if (store_ == nullptr) store_ = &store;
  if (store_ != &store) throw DomainError("tape: bound to a different store");
  auto it = param_cache_.find(name);
  if (it != param_cache_.end()) return Var{it->second};
  Var v = push(store.at(name));
  nodes_[v.id].param_index = static_cast<int>(param_names_.size());
  param_names_.push_back(name);
  param_cache_[name] = v.id;
  return v;
}

double Tape::scalar_val(Var v) const {
  const Tensor& t = val(v);
  if (!t.is_scalar()) throw DimensionError("tape: expected scalar");
  return t.data[0];
}

Var Tape::matmul(Var a, Var b, bool ta, bool tb) {
  int ia = check(a), ib = check(b);
  Tensor c = slatelab::matmul(nodes_[ia].value, nodes_[ib].value, ta, tb);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, ib, io, ta, tb] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& av = nodes_[ia].value;
    const Tensor& bv = nodes_[ib].value;
    Tensor da, db;
    if (!ta && !tb) {
      da = slatelab::matmul(g, bv, false, true);
      db = slatelab::matmul(av, g, true, false);
    } else if (ta && !tb) {
      da = slatelab::matmul(bv, g, false, true);
      db = slatelab::matmul(av, g, false, false);
    } else if (!ta && tb) {
      da = slatelab::matmul(g, bv, false, false);
      db = slatelab::matmul(g, av, true, false);
    } else {
      da = slatelab::matmul(bv, g, true, true);
      db = slatelab::matmul(g, av, true, true);
    }
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += da.data[i];
    Tensor& gb = grad_of(ib);
    for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += db.data[i];
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  int ia = check(a), ib = check(b);
  const Tensor& av = nodes_[ia].value;
  const Tensor& bv = nodes_[ib].value;
  if (!av.same_shape(bv)) throw DimensionError("add: shape mismatch");
  Tensor c = av;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += bv.data[i];
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, ib, io] {
    const Tensor& g = nodes_[io].grad;
    Tensor& ga = grad_of(ia);
    Tensor& gb = grad_of(ib);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  int ia = check(a), ib = check(b);
  const Tensor& av = nodes_[ia].value;
  const Tensor& bv = nodes_[ib].value;
  if (!av.same_shape(bv)) throw DimensionError("sub: shape mismatch");
  Tensor c = av;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= bv.data[i];
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, ib, io] {
    const Tensor& g = nodes_[io].grad;
    Tensor& ga = grad_of(ia);
    Tensor& gb = grad_of(ib);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] -= g.data[i];
    }
  };
  return out;
}

Var Tape::mul(Var a, Var b) {
  int ia = check(a), ib = check(b);
  const Tensor& av = nodes_[ia].value;
  const Tensor& bv = nodes_[ib].value;
  if (!av.same_shape(bv)) throw DimensionError("mul: shape mismatch");
  Tensor c = av;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= bv.data[i];
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, ib, io] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& av2 = nodes_[ia].value;
    const Tensor& bv2 = nodes_[ib].value;
    Tensor& ga = grad_of(ia);
    Tensor& gb = grad_of(ib);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * bv2.data[i];
      gb.data[i] += g.data[i] * av2.data[i];
    }
  };
  return out;
}

Var Tape::add_rowvec(Var m, Var rowv) {
  int im = check(m), ir = check(rowv);
  const Tensor& mv = nodes_[im].value;
  const Tensor& rv = nodes_[ir].value;
  if (rv.rows() != 1 || rv.cols() != mv.cols())
    throw DimensionError("add_rowvec: bias width mismatch");
  Tensor c = mv;
  const std::size_t rows = mv.rows(), cols = mv.cols();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c.data[i * cols + j] += rv.data[j];
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, im, ir, io, rows, cols] {
    const Tensor& g = nodes_[io].grad;
    Tensor& gm = grad_of(im);
    Tensor& gr = grad_of(ir);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        gm.data[i * cols + j] += g.data[i * cols + j];
        gr.data[j] += g.data[i * cols + j];
      }
  };
  return out;
}

Var Tape::affine(Var a, double k, double b) {
  int ia = check(a);
  Tensor c = nodes_[ia].value;
  for (double& x : c.data) x = k * x + b;
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io, k] {
    const Tensor& g = nodes_[io].grad;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += k * g.data[i];
  };
  return out;
}

Var Tape::relu(Var a) {
  int ia = check(a);
  Tensor c = nodes_[ia].value;
  for (double& x : c.data) x = x > 0.0 ? x : 0.0;
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& av = nodes_[ia].value;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      if (av.data[i] > 0.0) ga.data[i] += g.data[i];
  };
  return out;
}

Var Tape::sigmoid(Var a) {
  int ia = check(a);
  Tensor c = nodes_[ia].value;
  for (double& x : c.data) x = 1.0 / (1.0 + std::exp(-x));
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& yv = nodes_[io].value;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      ga.data[i] += g.data[i] * yv.data[i] * (1.0 - yv.data[i]);
  };
  return out;
}

Var Tape::tanh_(Var a) {
  int ia = check(a);
  Tensor c = nodes_[ia].value;
  for (double& x : c.data) x = std::tanh(x);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& yv = nodes_[io].value;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      ga.data[i] += g.data[i] * (1.0 - yv.data[i] * yv.data[i]);
  };
  return out;
}

Var Tape::exp_(Var a) {
  int ia = check(a);
  Tensor c = nodes_[ia].value;
  for (double& x : c.data) x = std::exp(x);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& yv = nodes_[io].value;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      ga.data[i] += g.data[i] * yv.data[i];
  };
  return out;
}

Var Tape::log_(Var a) {
  int ia = check(a);
  Tensor c = nodes_[ia].value;
  for (double& x : c.data) x = std::log(x);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& av = nodes_[ia].value;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      ga.data[i] += g.data[i] / av.data[i];
  };
  return out;
}

Var Tape::clamp(Var a, double lo, double hi) {
  int ia = check(a);
  Tensor c = nodes_[ia].value;
  for (double& x : c.data) x = std::min(std::max(x, lo), hi);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io, lo, hi] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& av = nodes_[ia].value;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      if (av.data[i] > lo && av.data[i] < hi) ga.data[i] += g.data[i];
  };
  return out;
}

Var Tape::activation(Var a, Activation act) {
  switch (act) {
    case Activation::identity: return a;
    case Activation::relu: return relu(a);
    case Activation::tanh: return tanh_(a);
    case Activation::sigmoid: return sigmoid(a);
  }
  throw DomainError("unknown activation");
}

Var Tape::softmax_rows(Var a, double beta) {
  if (beta <= 0.0) throw DomainError("softmax: beta must be positive");
  int ia = check(a);
  const Tensor& av = nodes_[ia].value;
  if (av.numel() == 0) throw DomainError("softmax: empty input");
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor c = Tensor::zeros(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = -1e300;
    for (std::size_t j = 0; j < cols; ++j)
      mx = std::max(mx, beta * av.data[i * cols + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      double e = std::exp(beta * av.data[i * cols + j] - mx);
      c.data[i * cols + j] = e;
      s += e;
    }
    for (std::size_t j = 0; j < cols; ++j) c.data[i * cols + j] /= s;
  }
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io, beta, rows, cols] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& p = nodes_[io].value;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j)
        dot += g.data[i * cols + j] * p.data[i * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        ga.data[i * cols + j] +=
            beta * p.data[i * cols + j] * (g.data[i * cols + j] - dot);
    }
  };
  return out;
}

Var Tape::masked_softmax(Var logits, const std::vector<std::uint8_t>& keep,
                         double beta) {
  if (beta <= 0.0) throw DomainError("masked_softmax: beta must be positive");
  int ia = check(logits);
  const Tensor& av = nodes_[ia].value;
  if (av.rows() != 1 || av.cols() != keep.size())
    throw DimensionError("masked_softmax: logits/mask size mismatch");
  const std::size_t n = keep.size();
  bool any = false;
  double mx = -1e300;
  for (std::size_t j = 0; j < n; ++j)
    if (keep[j]) {
      any = true;
      mx = std::max(mx, beta * av.data[j]);
    }
  if (!any) throw StateError("masked_softmax: no unmasked entries");
  Tensor c = Tensor::zeros(1, n);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (keep[j]) {
      c.data[j] = std::exp(beta * av.data[j] - mx);
      s += c.data[j];
    }
  for (std::size_t j = 0; j < n; ++j) c.data[j] /= s;
  Var out = push(std::move(c));
  int io = out.id;
  auto mask = keep;
  nodes_[io].backprop = [this, ia, io, beta, mask = std::move(mask), n] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& p = nodes_[io].value;
    Tensor& ga = grad_of(ia);
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (mask[j]) dot += g.data[j] * p.data[j];
    for (std::size_t j = 0; j < n; ++j)
      if (mask[j]) ga.data[j] += beta * p.data[j] * (g.data[j] - dot);
  };
  return out;
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: empty");
  std::vector<int> ids;
  std::size_t rows = nodes_[check(parts[0])].value.rows();
  std::size_t total = 0;
  for (Var v : parts) {
    int id = check(v);
    if (nodes_[id].value.rows() != rows)
      throw DimensionError("concat_cols: row mismatch");
    total += nodes_[id].value.cols();
    ids.push_back(id);
  }
  Tensor c = Tensor::zeros(rows, total);
  std::size_t off = 0;
  for (int id : ids) {
    const Tensor& p = nodes_[id].value;
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(&p.data[i * p.cols()], &p.data[i * p.cols()] + p.cols(),
                &c.data[i * total + off]);
    off += p.cols();
  }
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ids, io, rows, total] {
    const Tensor& g = nodes_[io].grad;
    std::size_t off2 = 0;
    for (int id : ids) {
      Tensor& gp = grad_of(id);
      const std::size_t pc = gp.cols();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < pc; ++j)
          gp.data[i * pc + j] += g.data[i * total + off2 + j];
      off2 += pc;
    }
  };
  return out;
}

Var Tape::concat_cols(std::initializer_list<Var> parts) {
  std::vector<Var> v(parts);
  return concat_cols(std::span<const Var>(v));
}

Var Tape::stack_rows(std::span<const Var> rows1xc) {
  if (rows1xc.empty()) throw DimensionError("stack_rows: empty");
  std::vector<int> ids;
  std::size_t cols = nodes_[check(rows1xc[0])].value.cols();
  for (Var v : rows1xc) {
    int id = check(v);
    if (nodes_[id].value.rows() != 1 || nodes_[id].value.cols() != cols)
      throw DimensionError("stack_rows: parts must be 1xC of equal width");
    ids.push_back(id);
  }
  const std::size_t n = ids.size();
  Tensor c = Tensor::zeros(n, cols);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(nodes_[ids[i]].value.data.begin(), nodes_[ids[i]].value.data.end(),
              &c.data[i * cols]);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ids, io, cols] {
    const Tensor& g = nodes_[io].grad;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Tensor& gp = grad_of(ids[i]);
      for (std::size_t j = 0; j < cols; ++j) gp.data[j] += g.data[i * cols + j];
    }
  };
  return out;
}

Var Tape::stack_rows(std::initializer_list<Var> rows1xc) {
  std::vector<Var> v(rows1xc);
  return stack_rows(std::span<const Var>(v));
}

Var Tape::row(Var m, std::size_t i) {
  int im = check(m);
  const Tensor& mv = nodes_[im].value;
  if (i >= mv.rows()) throw DimensionError("row: index out of range");
  const std::size_t cols = mv.cols();
  Tensor c = Tensor::zeros(1, cols);
  std::copy(&mv.data[i * cols], &mv.data[i * cols] + cols, c.data.begin());
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, im, io, i, cols] {
    const Tensor& g = nodes_[io].grad;
    Tensor& gm = grad_of(im);
    for (std::size_t j = 0; j < cols; ++j) gm.data[i * cols + j] += g.data[j];
  };
  return out;
}

Var Tape::pick(Var v, std::size_t flat_index) {
  int iv = check(v);
  const Tensor& tv = nodes_[iv].value;
  if (flat_index >= tv.numel()) throw DimensionError("pick: index out of range");
  Var out = push(Tensor::scalar(tv.data[flat_index]));
  int io = out.id;
  nodes_[io].backprop = [this, iv, io, flat_index] {
    grad_of(iv).data[flat_index] += nodes_[io].grad.data[0];
  };
  return out;
}

Var Tape::gather_rows(Var table, const std::vector<int>& ids) {
  int it = check(table);
  const Tensor& tv = nodes_[it].value;
  const std::size_t cols = tv.cols();
  Tensor c = Tensor::zeros(ids.size(), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows())
      throw DimensionError("gather_rows: id out of vocabulary range");
    std::copy(&tv.data[static_cast<std::size_t>(ids[i]) * cols],
              &tv.data[static_cast<std::size_t>(ids[i]) * cols] + cols,
              &c.data[i * cols]);
  }
  Var out = push(std::move(c));
  int io = out.id;
  auto idc = ids;
  nodes_[io].backprop = [this, it, io, idc = std::move(idc), cols] {
    const Tensor& g = nodes_[io].grad;
    Tensor& gt = grad_of(it);
    for (std::size_t i = 0; i < idc.size(); ++i)
      for (std::size_t j = 0; j < cols; ++j)
        gt.data[static_cast<std::size_t>(idc[i]) * cols + j] +=
            g.data[i * cols + j];
  };
  return out;
}

Var Tape::tile_rows(Var rowv, std::size_t n) {
  int ir = check(rowv);
  const Tensor& rv = nodes_[ir].value;
  if (rv.rows() != 1) throw DimensionError("tile_rows: expected 1xC");
  const std::size_t cols = rv.cols();
  Tensor c = Tensor::zeros(n, cols);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(rv.data.begin(), rv.data.end(), &c.data[i * cols]);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ir, io, n, cols] {
    const Tensor& g = nodes_[io].grad;
    Tensor& gr = grad_of(ir);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < cols; ++j) gr.data[j] += g.data[i * cols + j];
  };
  return out;
}

Var Tape::flatten_row(Var a) {
  int ia = check(a);
  const Tensor& av = nodes_[ia].value;
  Tensor c({1, av.numel()}, av.data);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io] {
    const Tensor& g = nodes_[io].grad;
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
  };
  return out;
}

Var Tape::pad_cols(Var rowv, std::size_t width) {
  int ir = check(rowv);
  const Tensor& rv = nodes_[ir].value;
  if (rv.rows() != 1) throw DimensionError("pad_cols: expected 1xC");
  if (rv.cols() > width) throw DimensionError("pad_cols: input wider than pad");
  Tensor c = Tensor::zeros(1, width);
  std::copy(rv.data.begin(), rv.data.end(), c.data.begin());
  Var out = push(std::move(c));
  int io = out.id;
  const std::size_t cols = rv.cols();
  nodes_[io].backprop = [this, ir, io, cols] {
    const Tensor& g = nodes_[io].grad;
    Tensor& gr = grad_of(ir);
    for (std::size_t j = 0; j < cols; ++j) gr.data[j] += g.data[j];
  };
  return out;
}

Var Tape::sum(Var a) {
  int ia = check(a);
  double s = 0.0;
  for (double x : nodes_[ia].value.data) s += x;
  Var out = push(Tensor::scalar(s));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io] {
    const double g = nodes_[io].grad.data[0];
    Tensor& ga = grad_of(ia);
    for (double& x : ga.data) x += g;
  };
  return out;
}

Var Tape::mean(Var a) {
  int ia = check(a);
  const std::size_t n = nodes_[ia].value.numel();
  if (n == 0) throw DimensionError("mean: empty");
  double s = 0.0;
  for (double x : nodes_[ia].value.data) s += x;
  Var out = push(Tensor::scalar(s / static_cast<double>(n)));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io, n] {
    const double g = nodes_[io].grad.data[0] / static_cast<double>(n);
    Tensor& ga = grad_of(ia);
    for (double& x : ga.data) x += g;
  };
  return out;
}

Var Tape::row_mean(Var m) {
  int im = check(m);
  const Tensor& mv = nodes_[im].value;
  const std::size_t rows = mv.rows(), cols = mv.cols();
  if (rows == 0) throw DimensionError("row_mean: empty");
  Tensor c = Tensor::zeros(1, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c.data[j] += mv.data[i * cols + j];
  for (double& x : c.data) x /= static_cast<double>(rows);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, im, io, rows, cols] {
    const Tensor& g = nodes_[io].grad;
    Tensor& gm = grad_of(im);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        gm.data[i * cols + j] += g.data[j] / static_cast<double>(rows);
  };
  return out;
}

Var Tape::sum_cols(Var m) {
  int im = check(m);
  const Tensor& mv = nodes_[im].value;
  const std::size_t rows = mv.rows(), cols = mv.cols();
  Tensor c = Tensor::zeros(rows, 1);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c.data[i] += mv.data[i * cols + j];
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, im, io, rows, cols] {
    const Tensor& g = nodes_[io].grad;
    Tensor& gm = grad_of(im);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) gm.data[i * cols + j] += g.data[i];
  };
  return out;
}

Var Tape::prod(Var a) {
  int ia = check(a);
  const std::vector<double>& x = nodes_[ia].value.data;
  const std::size_t n = x.size();
  double p = 1.0;
  for (double v : x) p *= v;
  Var out = push(Tensor::scalar(p));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io, n] {
    const double g = nodes_[io].grad.data[0];
    const std::vector<double>& xv = nodes_[ia].value.data;
    Tensor& ga = grad_of(ia);
    // prefix/suffix products avoid dividing by zero entries
    std::vector<double> pre(n + 1, 1.0), suf(n + 1, 1.0);
    for (std::size_t i = 0; i < n; ++i) pre[i + 1] = pre[i] * xv[i];
    for (std::size_t i = n; i > 0; --i) suf[i - 1] = suf[i] * xv[i - 1];
    for (std::size_t i = 0; i < n; ++i)
      ga.data[i] += g * pre[i] * suf[i + 1];
  };
  return out;
}

Var Tape::wsum(Var a, std::vector<double> w) {
  int ia = check(a);
  const Tensor& av = nodes_[ia].value;
  if (av.numel() != w.size()) throw DimensionError("wsum: weight length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * av.data[i];
  Var out = push(Tensor::scalar(s));
  int io = out.id;
  nodes_[io].backprop = [this, ia, io, w = std::move(w)] {
    const double g = nodes_[io].grad.data[0];
    Tensor& ga = grad_of(ia);
    for (std::size_t i = 0; i < w.size(); ++i) ga.data[i] += g * w[i];
  };
  return out;
}

Var Tape::min2(Var a, Var b) {
  int ia = check(a), ib = check(b);
  const Tensor& av = nodes_[ia].value;
  const Tensor& bv = nodes_[ib].value;
  if (!av.same_shape(bv)) throw DimensionError("min2: shape mismatch");
  Tensor c = av;
  for (std::size_t i = 0; i < c.data.size(); ++i)
    c.data[i] = std::min(av.data[i], bv.data[i]);
  Var out = push(std::move(c));
  int io = out.id;
  nodes_[io].backprop = [this, ia, ib, io] {
    const Tensor& g = nodes_[io].grad;
    const Tensor& av2 = nodes_[ia].value;
    const Tensor& bv2 = nodes_[ib].value;
    Tensor& ga = grad_of(ia);
    Tensor& gb = grad_of(ib);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      if (av2.data[i] <= bv2.data[i])
        ga.data[i] += g.data[i];
      else
        gb.data[i] += g.data[i];
    }
  };
  return out;
}

std::map<std::string, Tensor> Tape::backward(Var loss) {
  int il = check(loss);
  if (!nodes_[il].value.is_scalar())
    throw DimensionError("backward: loss must be scalar");
  grad_of(il).data[0] = 1.0;
  for (int i = il; i >= 0; --i) {
    if (!nodes_[i].has_grad) continue;
    if (nodes_[i].backprop) nodes_[i].backprop();
  }
  std::map<std::string, Tensor> grads;
  if (store_ != nullptr) {
    for (const auto& [name, tensor] : store_->entries())
      grads.emplace(name, Tensor::zeros(tensor.rows(), tensor.cols()));
  }
  for (const auto& [name, id] : param_cache_) {
    if (nodes_[id].has_grad) grads[name] = nodes_[id].grad;
  }
  return grads;
}

Var dense_forward(Tape& t, Var input, Var weights, Var bias, Activation act) {
  Var z = t.add_rowvec(t.matmul(input, weights), bias);
  return t.activation(z, act);
}

GruParams gru_params(Tape& t, const ParamStore& ps, const std::string& prefix) {
  GruParams p;
  p.wr = t.param(ps, prefix + ".wr");
  p.ur = t.param(ps, prefix + ".ur");
  p.br = t.param(ps, prefix + ".br");
  p.wz = t.param(ps, prefix + ".wz");
  p.uz = t.param(ps, prefix + ".uz");
  p.bz = t.param(ps, prefix + ".bz");
  p.wh = t.param(ps, prefix + ".wh");
  p.uh = t.param(ps, prefix + ".uh");
  p.bh = t.param(ps, prefix + ".bh");
  return p;
}

Var gru_cell(Tape& t, Var x, Var h_prev, const GruParams& p) {
  Var r = t.sigmoid(t.add_rowvec(
      t.add(t.matmul(x, p.wr), t.matmul(h_prev, p.ur)), p.br));
  Var z = t.sigmoid(t.add_rowvec(
      t.add(t.matmul(x, p.wz), t.matmul(h_prev, p.uz)), p.bz));
  Var cand = t.tanh_(t.add_rowvec(
      t.add(t.matmul(x, p.wh), t.matmul(t.mul(r, h_prev), p.uh)), p.bh));
  return t.add(t.mul(z, h_prev), t.mul(t.affine(z, -1.0, 1.0), cand));
}

void init_gru_params(ParamStore& ps, const std::string& prefix,
                     std::size_t in_dim, std::size_t hidden_dim, Rng& rng) {
  for (const char* gate : {"r", "z", "h"}) {
    ps.create(prefix + ".w" + gate, xavier_uniform(in_dim, hidden_dim, rng));
    ps.create(prefix + ".u" + gate, xavier_uniform(hidden_dim, hidden_dim, rng));
    ps.create(prefix + ".b" + gate, Tensor::zeros(1, hidden_dim));
  }
}

std::vector<double> softmax_values(const std::vector<double>& logits,
                                   double beta) {
  if (beta <= 0.0) throw DomainError("softmax: beta must be positive");
  if (logits.empty()) throw DomainError("softmax: empty input");
  double mx = -1e300;
  for (double x : logits) mx = std::max(mx, beta * x);
  std::vector<double> out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(beta * logits[i] - mx);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

}  // namespace slatelab
