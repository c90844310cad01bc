#include "synplug/tape.hpp"

#include <algorithm>
#include <cmath>

namespace synplug::ad {

namespace {

// C += A (m x k) * B (k x n), row-major.
void gemm_acc(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = A + i * k;
    double* c_row = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double a = a_row[p];
      if (a == 0.0) continue;
      const double* b_row = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// C += A (m x n) * B^T where B is (k x n): result (m x k).
void gemm_bt_acc(const double* A, const double* B, double* C, std::size_t m, std::size_t n,
                 std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = A + i * n;
    double* c_row = C + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* b_row = B + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a_row[j] * b_row[j];
      c_row[p] += acc;
    }
  }
}

// C += A^T (k x m <- A is m x k) * B (m x n): result (k x n).
void gemm_at_acc(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = A + i * k;
    const double* b_row = B + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double a = a_row[p];
      if (a == 0.0) continue;
      double* c_row = C + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
    }
  }
}

}  // namespace

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

double grad_norm(const std::vector<Parameter*>& params) {
  double s = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.vec()) s += g * g;
  return std::sqrt(s);
}

std::uint64_t params_hash(const std::vector<Parameter*>& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const unsigned char* bytes, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const Parameter* p : params) {
    mix(reinterpret_cast<const unsigned char*>(p->value.data()),
        p->value.numel() * sizeof(double));
  }
  return h;
}

Tape::Id Tape::push(Tensor val, std::function<void(Tape&, Id)> back) {
  nodes_.push_back(Node{std::move(val), Tensor{}, std::move(back), nullptr});
  return static_cast<Id>(nodes_.size() - 1);
}

void Tape::check(Id id, const char* op) const {
  if (id >= nodes_.size())
    throw ValidationError(std::string(op) + ": invalid tape id " + std::to_string(id));
}

Tape::Id Tape::param(Parameter& p) {
  Id id = push(p.value);
  nodes_[id].bound = &p;
  return id;
}

Tape::Id Tape::input(Tensor v) { return push(std::move(v)); }

const Tensor& Tape::grad(Id id) const {
  if (!ran_backward_) throw ValidationError("grad() before backward()");
  return nodes_[id].grad;
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

Tape::Id Tape::matmul(Id a, Id b) {
  check(a, "matmul");
  check(b, "matmul");
  const Tensor& A = val_of(a);
  const Tensor& B = val_of(b);
  if (A.ndim() == 2 && B.ndim() == 2) {
    if (A.cols() != B.rows()) shape_fail("matmul", A, B);
    std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C({m, n});
    gemm_acc(A.data(), B.data(), C.data(), m, k, n);
    return push(std::move(C), [a, b, m, k, n](Tape& t, Id self) {
      const Tensor& G = t.nodes_[self].grad;
      gemm_bt_acc(G.data(), t.val_of(b).data(), t.grad_mut(a).data(), m, n, k);
      gemm_at_acc(t.val_of(a).data(), G.data(), t.grad_mut(b).data(), m, k, n);
    });
  }
  if (A.ndim() == 2 && B.ndim() == 1) {
    if (A.cols() != B.len()) shape_fail("matmul", A, B);
    std::size_t m = A.rows(), k = A.cols();
    Tensor y({m});
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += A.at(i, p) * B[p];
      y[i] = acc;
    }
    return push(std::move(y), [a, b, m, k](Tape& t, Id self) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& A2 = t.val_of(a);
      const Tensor& B2 = t.val_of(b);
      Tensor& ga = t.grad_mut(a);
      Tensor& gb = t.grad_mut(b);
      for (std::size_t i = 0; i < m; ++i) {
        double gi = g[i];
        if (gi == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) {
          ga.at(i, p) += gi * B2[p];
          gb[p] += gi * A2.at(i, p);
        }
      }
    });
  }
  shape_fail("matmul", A, B);
}

Tape::Id Tape::add(Id a, Id b) {
  check(a, "add");
  check(b, "add");
  const Tensor& A = val_of(a);
  const Tensor& B = val_of(b);
  if (!A.same_shape(B)) shape_fail("add", A, B);
  Tensor y = A;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += B[i];
  return push(std::move(y), [a, b](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Tape::Id Tape::add_n(const std::vector<Id>& xs) {
  if (xs.empty()) throw ValidationError("add_n: empty operand list");
  Tensor y = val_of(xs[0]);
  for (std::size_t s = 1; s < xs.size(); ++s) {
    const Tensor& X = val_of(xs[s]);
    if (!X.same_shape(y)) shape_fail("add_n", y, X);
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += X[i];
  }
  return push(std::move(y), [xs](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    for (Id x : xs) {
      Tensor& gx = t.grad_mut(x);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
    }
  });
}

Tape::Id Tape::add_rowvec(Id m, Id v) {
  check(m, "add_rowvec");
  check(v, "add_rowvec");
  const Tensor& M = val_of(m);
  const Tensor& V = val_of(v);
  if (M.ndim() != 2 || V.ndim() != 1 || M.cols() != V.len()) shape_fail("add_rowvec", M, V);
  Tensor y = M;
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) y.at(i, j) += V[j];
  return push(std::move(y), [m, v](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gm = t.grad_mut(m);
    Tensor& gv = t.grad_mut(v);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        gm.at(i, j) += g.at(i, j);
        gv[j] += g.at(i, j);
      }
  });
}

Tape::Id Tape::scale(Id a, double c) {
  check(a, "scale");
  Tensor y = val_of(a);
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= c;
  return push(std::move(y), [a, c](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += c * g[i];
  });
}

Tape::Id Tape::dot(Id a, Id b) {
  check(a, "dot");
  check(b, "dot");
  const Tensor& A = val_of(a);
  const Tensor& B = val_of(b);
  if (A.ndim() != 1 || B.ndim() != 1 || A.len() != B.len()) shape_fail("dot", A, B);
  double acc = 0.0;
  for (std::size_t i = 0; i < A.len(); ++i) acc += A[i] * B[i];
  return push(Tensor::scalar(acc), [a, b](Tape& t, Id self) {
    double g = t.nodes_[self].grad.item();
    const Tensor& A2 = t.val_of(a);
    const Tensor& B2 = t.val_of(b);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < A2.len(); ++i) {
      ga[i] += g * B2[i];
      gb[i] += g * A2[i];
    }
  });
}

Tape::Id Tape::mean_rows(Id m) {
  check(m, "mean_rows");
  const Tensor& M = val_of(m);
  if (M.ndim() != 2 || M.rows() == 0) shape_fail("mean_rows", M);
  std::size_t r = M.rows(), c = M.cols();
  Tensor y({c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j] += M.at(i, j);
  for (std::size_t j = 0; j < c; ++j) y[j] /= static_cast<double>(r);
  return push(std::move(y), [m, r, c](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gm = t.grad_mut(m);
    double inv = 1.0 / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gm.at(i, j) += g[j] * inv;
  });
}

Tape::Id Tape::concat(const std::vector<Id>& parts) {
  if (parts.empty()) throw ValidationError("concat: empty operand list");
  std::size_t total = 0;
  for (Id p : parts) {
    check(p, "concat");
    if (val_of(p).ndim() != 1) shape_fail("concat", val_of(p));
    total += val_of(p).len();
  }
  Tensor y({total});
  std::size_t off = 0;
  for (Id p : parts) {
    const Tensor& X = val_of(p);
    for (std::size_t i = 0; i < X.len(); ++i) y[off + i] = X[i];
    off += X.len();
  }
  return push(std::move(y), [parts](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    std::size_t off = 0;
    for (Id p : parts) {
      Tensor& gp = t.grad_mut(p);
      for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += g[off + i];
      off += gp.numel();
    }
  });
}

Tape::Id Tape::concat_cols(const std::vector<Id>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: empty operand list");
  std::size_t r = val_of(parts[0]).rows();
  std::size_t total = 0;
  for (Id p : parts) {
    check(p, "concat_cols");
    const Tensor& X = val_of(p);
    if (X.ndim() != 2 || X.rows() != r) shape_fail("concat_cols", val_of(parts[0]), X);
    total += X.cols();
  }
  Tensor y({r, total});
  std::size_t off = 0;
  for (Id p : parts) {
    const Tensor& X = val_of(p);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < X.cols(); ++j) y.at(i, off + j) = X.at(i, j);
    off += X.cols();
  }
  return push(std::move(y), [parts, r](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    std::size_t off = 0;
    for (Id p : parts) {
      Tensor& gp = t.grad_mut(p);
      std::size_t c = gp.cols();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gp.at(i, j) += g.at(i, off + j);
      off += c;
    }
  });
}

Tape::Id Tape::slice_cols(Id m, std::size_t lo, std::size_t hi) {
  check(m, "slice_cols");
  const Tensor& M = val_of(m);
  if (M.ndim() != 2 || lo >= hi || hi > M.cols()) shape_fail("slice_cols", M);
  std::size_t r = M.rows(), c = hi - lo;
  Tensor y({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) = M.at(i, lo + j);
  return push(std::move(y), [m, lo, r, c](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gm = t.grad_mut(m);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gm.at(i, lo + j) += g.at(i, j);
  });
}

Tape::Id Tape::append_row(Id m, Id v) {
  check(m, "append_row");
  check(v, "append_row");
  const Tensor& M = val_of(m);
  const Tensor& V = val_of(v);
  if (M.ndim() != 2 || V.ndim() != 1 || M.cols() != V.len()) shape_fail("append_row", M, V);
  std::size_t r = M.rows(), c = M.cols();
  Tensor y({r + 1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) = M.at(i, j);
  for (std::size_t j = 0; j < c; ++j) y.at(r, j) = V[j];
  return push(std::move(y), [m, v, r, c](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gm = t.grad_mut(m);
    Tensor& gv = t.grad_mut(v);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gm.at(i, j) += g.at(i, j);
    for (std::size_t j = 0; j < c; ++j) gv[j] += g.at(r, j);
  });
}

Tape::Id Tape::row(Id m, std::size_t i) {
  check(m, "row");
  const Tensor& M = val_of(m);
  if (M.ndim() != 2 || i >= M.rows()) shape_fail("row", M);
  std::size_t c = M.cols();
  Tensor y({c});
  for (std::size_t j = 0; j < c; ++j) y[j] = M.at(i, j);
  return push(std::move(y), [m, i, c](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gm = t.grad_mut(m);
    for (std::size_t j = 0; j < c; ++j) gm.at(i, j) += g[j];
  });
}

Tape::Id Tape::transpose(Id m) {
  check(m, "transpose");
  const Tensor& M = val_of(m);
  if (M.ndim() != 2) shape_fail("transpose", M);
  std::size_t r = M.rows(), c = M.cols();
  Tensor y({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(j, i) = M.at(i, j);
  return push(std::move(y), [m, r, c](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gm = t.grad_mut(m);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gm.at(i, j) += g.at(j, i);
  });
}

Tape::Id Tape::embedding(Id table, std::vector<int> ids) {
  check(table, "embedding");
  const Tensor& T = val_of(table);
  if (T.ndim() != 2) shape_fail("embedding", T);
  std::size_t d = T.cols();
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= T.rows())
      throw ValidationError("embedding: id " + std::to_string(id) + " out of range for table " +
                            T.shape_str());
  }
  Tensor y({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) y.at(i, j) = T.at(static_cast<std::size_t>(ids[i]), j);
  return push(std::move(y), [table, ids = std::move(ids), d](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gt = t.grad_mut(table);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) gt.at(static_cast<std::size_t>(ids[i]), j) += g.at(i, j);
  });
}

Tape::Id Tape::relu(Id x) {
  check(x, "relu");
  Tensor y = val_of(x);
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
  return push(std::move(y), [x](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& X = t.val_of(x);
    Tensor& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (X[i] > 0.0) gx[i] += g[i];
  });
}

Tape::Id Tape::softmax(Id v) {
  check(v, "softmax");
  const Tensor& X = val_of(v);
  if (X.ndim() != 1 || X.len() == 0) shape_fail("softmax", X);
  std::size_t n = X.len();
  double mx = X[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, X[i]);
  Tensor y({n});
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::exp(X[i] - mx);
    z += y[i];
  }
  for (std::size_t i = 0; i < n; ++i) y[i] /= z;
  return push(std::move(y), [v, n](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y2 = t.val_of(self);
    Tensor& gv = t.grad_mut(v);
    double gy = 0.0;
    for (std::size_t i = 0; i < n; ++i) gy += g[i] * y2[i];
    for (std::size_t i = 0; i < n; ++i) gv[i] += (g[i] - gy) * y2[i];
  });
}

Tape::Id Tape::softmax_rows_causal(Id s) {
  check(s, "softmax_rows_causal");
  const Tensor& S = val_of(s);
  if (S.ndim() != 2 || S.rows() != S.cols()) shape_fail("softmax_rows_causal", S);
  std::size_t n = S.rows();
  Tensor y({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = S.at(i, 0);
    for (std::size_t j = 1; j <= i; ++j) mx = std::max(mx, S.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      y.at(i, j) = std::exp(S.at(i, j) - mx);
      z += y.at(i, j);
    }
    for (std::size_t j = 0; j <= i; ++j) y.at(i, j) /= z;
  }
  return push(std::move(y), [s, n](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y2 = t.val_of(self);
    Tensor& gs = t.grad_mut(s);
    for (std::size_t i = 0; i < n; ++i) {
      double gy = 0.0;
      for (std::size_t j = 0; j <= i; ++j) gy += g.at(i, j) * y2.at(i, j);
      for (std::size_t j = 0; j <= i; ++j) gs.at(i, j) += (g.at(i, j) - gy) * y2.at(i, j);
    }
  });
}

Tape::Id Tape::layernorm(Id x, Id gain, Id bias, double eps) {
  check(x, "layernorm");
  check(gain, "layernorm");
  check(bias, "layernorm");
  const Tensor& X = val_of(x);
  const Tensor& G = val_of(gain);
  const Tensor& B = val_of(bias);
  bool vec = X.ndim() == 1;
  std::size_t r = vec ? 1 : X.rows();
  std::size_t d = vec ? X.len() : X.cols();
  if (G.ndim() != 1 || B.ndim() != 1 || G.len() != d || B.len() != d) shape_fail("layernorm", X, G);
  Tensor y = X;
  for (std::size_t i = 0; i < r; ++i) {
    double* yr = y.data() + i * d;
    const double* xr = X.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) yr[j] = (xr[j] - mu) * inv * G[j] + B[j];
  }
  return push(std::move(y), [x, gain, bias, eps, r, d](Tape& t, Id self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& X2 = t.val_of(x);
    const Tensor& G2 = t.val_of(gain);
    Tensor& gx = t.grad_mut(x);
    Tensor& gg = t.grad_mut(gain);
    Tensor& gb = t.grad_mut(bias);
    for (std::size_t i = 0; i < r; ++i) {
      const double* xr = X2.data() + i * d;
      const double* gr = g.data() + i * d;
      double mu = 0.0;
      for (std::size_t j = 0; j < d; ++j) mu += xr[j];
      mu /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
      var /= static_cast<double>(d);
      double inv = 1.0 / std::sqrt(var + eps);
      // dL/dxhat, plus the two reduction terms of the LN backward.
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double xhat = (xr[j] - mu) * inv;
        double dxhat = gr[j] * G2[j];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        gg[j] += gr[j] * xhat;
        gb[j] += gr[j];
      }
      double invd = 1.0 / static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) {
        double xhat = (xr[j] - mu) * inv;
        double dxhat = gr[j] * G2[j];
        gx.data()[i * d + j] += inv * (dxhat - invd * sum_dxhat - xhat * invd * sum_dxhat_xhat);
      }
    }
  });
}

Tape::Id Tape::cross_entropy(Id logits, int gold) {
  check(logits, "cross_entropy");
  const Tensor& X = val_of(logits);
  if (X.ndim() != 1 || X.len() == 0) shape_fail("cross_entropy", X);
  if (gold < 0 || static_cast<std::size_t>(gold) >= X.len())
    throw ValidationError("cross_entropy: gold index " + std::to_string(gold) +
                          " out of range for " + X.shape_str());
  std::size_t n = X.len();
  double mx = X[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, X[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(X[i] - mx);
  double loss = mx + std::log(z) - X[static_cast<std::size_t>(gold)];
  return push(Tensor::scalar(loss), [logits, gold, n, mx, z](Tape& t, Id self) {
    double g = t.nodes_[self].grad.item();
    const Tensor& X2 = t.val_of(logits);
    Tensor& gx = t.grad_mut(logits);
    for (std::size_t i = 0; i < n; ++i) {
      double p = std::exp(X2[i] - mx) / z;
      gx[i] += g * (p - (static_cast<int>(i) == gold ? 1.0 : 0.0));
    }
  });
}

// ---------------------------------------------------------------------------

void Tape::backward(Id loss) {
  check(loss, "backward");
  if (ran_backward_) throw ValidationError("backward() may run once per tape");
  if (!val_of(loss).is_scalar())
    throw ValidationError("backward: loss must be scalar, got " + val_of(loss).shape_str());
  ran_backward_ = true;
  for (Node& n : nodes_) n.grad = Tensor(n.val.shape());
  nodes_[loss].grad.fill(1.0);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back) n.back(*this, static_cast<Id>(i));
  }
  for (Node& n : nodes_) {
    if (n.bound && n.bound->trainable) {
      Tensor& pg = n.bound->grad;
      for (std::size_t i = 0; i < pg.numel(); ++i) pg[i] += n.grad[i];
    }
  }
}

}  // namespace synplug::ad
