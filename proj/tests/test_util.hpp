#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "slatelab/config.hpp"
#include "slatelab/oracle.hpp"
#include "slatelab/pipeline.hpp"
#include "slatelab/tape.hpp"

namespace slatelab::testutil {

/// Central finite difference of the loss w.r.t. one parameter coordinate.
inline double fd_gradient(ParamStore& ps,
                          const std::function<Var(Tape&)>& build_loss,
                          const std::string& name, std::size_t idx,
                          double h = 1e-5) {
  Tensor& p = ps.lookup(name);
  const double saved = p.data[idx];
  p.data[idx] = saved + h;
  double up;
  {
    Tape t;
    up = t.scalar_val(build_loss(t));
  }
  p.data[idx] = saved - h;
  double down;
  {
    Tape t;
    down = t.scalar_val(build_loss(t));
  }
  p.data[idx] = saved;
  return (up - down) / (2.0 * h);
}

struct GradCheckStats {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;
  std::string worst_name;
};

/// Compares backward() gradients against central finite differences on
/// `coords_per_tensor` random coordinates of every named tensor.
inline GradCheckStats check_gradients(
    ParamStore& ps, const std::function<Var(Tape&)>& build_loss, Rng& rng,
    std::size_t coords_per_tensor = 2, double rtol = 1e-4, double atol = 1e-6,
    double h = 1e-5) {
  std::map<std::string, Tensor> grads;
  {
    Tape t;
    Var loss = build_loss(t);
    grads = t.backward(loss);
  }
  GradCheckStats stats;
  for (const auto& [name, g] : grads) {
    for (std::size_t c = 0; c < coords_per_tensor; ++c) {
      const std::size_t idx =
          static_cast<std::size_t>(rng.uniform_int(g.numel()));
      const double fd = fd_gradient(ps, build_loss, name, idx, h);
      const double an = g.data[idx];
      const double err = std::fabs(an - fd);
      const double tol = atol + rtol * std::max(std::fabs(an), std::fabs(fd));
      ++stats.checked;
      if (err > tol) {
        ++stats.failures;
        const double rel = err / std::max(1e-300, std::fabs(fd));
        if (rel > stats.worst_rel) {
          stats.worst_rel = rel;
          stats.worst_name = name + "[" + std::to_string(idx) + "]";
        }
      }
    }
  }
  return stats;
}

/// Small-vocabulary configuration for fast tests.
inline VocabConfig tiny_vocab() {
  VocabConfig v;
  v.items = 60;
  v.categories = 8;
  v.brands = 12;
  v.sellers = 15;
  v.shops = 15;
  v.price_buckets = 6;
  v.queries = 10;
  v.users = 20;
  v.stats_dim = 4;
  v.user_pref_dim = 3;
  v.max_session_len = 6;
  return v;
}

inline CriticConfig tiny_critic_config(int k = 4) {
  CriticConfig c;
  c.embed_dim = 3;
  c.hidden_dim = 6;
  c.gru_dim = 4;
  c.pin_dim = 4;
  c.fcn_dim = 4;
  c.relpos_dim = 3;
  c.slate_size = k;
  return c;
}

inline PolicyConfig tiny_policy_config(int k = 3) {
  PolicyConfig p;
  p.embed_dim = 3;
  p.hidden_dim = 6;
  p.su_dim = 4;
  p.sg_dim = 4;
  p.slate_size = k;
  return p;
}

inline OracleConfig tiny_oracle_config(std::uint64_t seed = 11) {
  OracleConfig c;
  c.seed = seed;
  return c;
}

/// Fresh temporary directory under the system temp root.
inline std::string make_temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() /
                        ("slatelab_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);
  return base.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace slatelab::testutil
