#include "dlf/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace dlf {

namespace {

void check_rank2(const char* op, const Tensor& t) {
  if (t.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " +
                     shape_str(t.shape()));
  }
}

}  // namespace

Tape::Node& Tape::node(ValueId id) {
  if (!id.valid() || size_t(id.idx) >= nodes_.size()) throw Error("invalid ValueId");
  return nodes_[size_t(id.idx)];
}

const Tape::Node& Tape::node(ValueId id) const {
  if (!id.valid() || size_t(id.idx) >= nodes_.size()) throw Error("invalid ValueId");
  return nodes_[size_t(id.idx)];
}

ValueId Tape::push(Tensor value, bool requires_grad, const char* op,
                   std::function<void(Tape&)> backprop) {
  value.round_to_precision();
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite value produced");
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.op = op;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return ValueId{int32_t(nodes_.size() - 1)};
}

Tensor& Tape::grad_buf(int32_t idx) {
  Node& n = nodes_[size_t(idx)];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Tensor Tape::gradient(ValueId id) const {
  const Node& n = node(id);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

void Tape::reset_grads() {
  for (Node& n : nodes_) n.grad = Tensor();
}

void Tape::check_same_shape(const char* op, ValueId a, ValueId b) const {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (!ta.same_shape(tb)) {
    throw ShapeError(std::string(op) + ": shapes differ " + shape_str(ta.shape()) +
                     " vs " + shape_str(tb.shape()));
  }
}

ValueId Tape::leaf(Tensor value) {
  value.round_to_precision();
  if (!value.all_finite()) throw NumericError("leaf: non-finite input value");
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.op = "leaf";
  nodes_.push_back(std::move(n));
  return ValueId{int32_t(nodes_.size() - 1)};
}

ValueId Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite input value");
  Node n;
  n.value = std::move(value);
  n.requires_grad = false;
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return ValueId{int32_t(nodes_.size() - 1)};
}

ValueId Tape::add(ValueId a, ValueId b) {
  check_same_shape("add", a, b);
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  Tensor out(ta.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] + tb[i];
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  const int32_t ia = a.idx, ib = b.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), rg, "add", [ia, ib, io](Tape& t) {
    const Tensor& g = t.nodes_[size_t(io)].grad;
    if (t.nodes_[size_t(ia)].requires_grad) {
      Tensor& ga = t.grad_buf(ia);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.nodes_[size_t(ib)].requires_grad) {
      Tensor& gb = t.grad_buf(ib);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

ValueId Tape::sub(ValueId a, ValueId b) {
  check_same_shape("sub", a, b);
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  Tensor out(ta.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] - tb[i];
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  const int32_t ia = a.idx, ib = b.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), rg, "sub", [ia, ib, io](Tape& t) {
    const Tensor& g = t.nodes_[size_t(io)].grad;
    if (t.nodes_[size_t(ia)].requires_grad) {
      Tensor& ga = t.grad_buf(ia);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.nodes_[size_t(ib)].requires_grad) {
      Tensor& gb = t.grad_buf(ib);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

ValueId Tape::mul(ValueId a, ValueId b) {
  check_same_shape("mul", a, b);
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  Tensor out(ta.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] * tb[i];
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  const int32_t ia = a.idx, ib = b.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), rg, "mul", [ia, ib, io](Tape& t) {
    const Tensor& g = t.nodes_[size_t(io)].grad;
    const Tensor& va = t.nodes_[size_t(ia)].value;
    const Tensor& vb = t.nodes_[size_t(ib)].value;
    if (t.nodes_[size_t(ia)].requires_grad) {
      Tensor& ga = t.grad_buf(ia);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.nodes_[size_t(ib)].requires_grad) {
      Tensor& gb = t.grad_buf(ib);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

ValueId Tape::scale(ValueId a, double c) {
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] * c;
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), node(a).requires_grad, "scale", [ia, io, c](Tape& t) {
    if (!t.nodes_[size_t(ia)].requires_grad) return;
    const Tensor& g = t.nodes_[size_t(io)].grad;
    Tensor& ga = t.grad_buf(ia);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  });
}

ValueId Tape::add_scalar(ValueId a, double c) {
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] + c;
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), node(a).requires_grad, "add_scalar", [ia, io](Tape& t) {
    if (!t.nodes_[size_t(ia)].requires_grad) return;
    const Tensor& g = t.nodes_[size_t(io)].grad;
    Tensor& ga = t.grad_buf(ia);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  check_rank2("matmul", ta);
  check_rank2("matmul", tb);
  const int n = ta.rows(), k = ta.cols(), k2 = tb.rows(), m = tb.cols();
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions disagree " + shape_str(ta.shape()) +
                     " vs " + shape_str(tb.shape()));
  }
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = ta.at(i, p);
      if (aip == 0.0) continue;
      for (int j = 0; j < m; ++j) out.at(i, j) += aip * tb.at(p, j);
    }
  }
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  const int32_t ia = a.idx, ib = b.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), rg, "matmul", [ia, ib, io, n, k, m](Tape& t) {
    const Tensor& g = t.nodes_[size_t(io)].grad;
    const Tensor& va = t.nodes_[size_t(ia)].value;
    const Tensor& vb = t.nodes_[size_t(ib)].value;
    if (t.nodes_[size_t(ia)].requires_grad) {
      Tensor& ga = t.grad_buf(ia);  // g . b^T
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
          const double gij = g.at(i, j);
          if (gij == 0.0) continue;
          for (int p = 0; p < k; ++p) ga.at(i, p) += gij * vb.at(p, j);
        }
      }
    }
    if (t.nodes_[size_t(ib)].requires_grad) {
      Tensor& gb = t.grad_buf(ib);  // a^T . g
      for (int i = 0; i < n; ++i) {
        for (int p = 0; p < k; ++p) {
          const double aip = va.at(i, p);
          if (aip == 0.0) continue;
          for (int j = 0; j < m; ++j) gb.at(p, j) += aip * g.at(i, j);
        }
      }
    }
  });
}

ValueId Tape::transpose(ValueId a) {
  const Tensor& ta = node(a).value;
  check_rank2("transpose", ta);
  const int n = ta.rows(), m = ta.cols();
  Tensor out({m, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out.at(j, i) = ta.at(i, j);
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), node(a).requires_grad, "transpose", [ia, io, n, m](Tape& t) {
    if (!t.nodes_[size_t(ia)].requires_grad) return;
    const Tensor& g = t.nodes_[size_t(io)].grad;
    Tensor& ga = t.grad_buf(ia);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) ga.at(i, j) += g.at(j, i);
  });
}

ValueId Tape::relu(ValueId a) {
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), node(a).requires_grad, "relu", [ia, io](Tape& t) {
    if (!t.nodes_[size_t(ia)].requires_grad) return;
    const Tensor& g = t.nodes_[size_t(io)].grad;
    const Tensor& va = t.nodes_[size_t(ia)].value;
    Tensor& ga = t.grad_buf(ia);
    for (int64_t i = 0; i < g.size(); ++i) {
      if (va[i] > 0.0) ga[i] += g[i];
    }
  });
}

ValueId Tape::abs(ValueId a) {
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::abs(ta[i]);
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), node(a).requires_grad, "abs", [ia, io](Tape& t) {
    if (!t.nodes_[size_t(ia)].requires_grad) return;
    const Tensor& g = t.nodes_[size_t(io)].grad;
    const Tensor& va = t.nodes_[size_t(ia)].value;
    Tensor& ga = t.grad_buf(ia);
    for (int64_t i = 0; i < g.size(); ++i) {
      if (va[i] > 0.0) ga[i] += g[i];
      else if (va[i] < 0.0) ga[i] -= g[i];
      // subgradient 0 at 0
    }
  });
}

ValueId Tape::softmax_rows(ValueId a) {
  const Tensor& ta = node(a).value;
  check_rank2("softmax_rows", ta);
  const int n = ta.rows(), d = ta.cols();
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    double mx = ta.at(i, 0);
    for (int j = 1; j < d; ++j) mx = std::max(mx, ta.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      const double e = std::exp(ta.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < d; ++j) out.at(i, j) /= sum;
  }
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  ValueId id = push(std::move(out), node(a).requires_grad, "softmax_rows",
                    [ia, io, n, d](Tape& t) {
                      if (!t.nodes_[size_t(ia)].requires_grad) return;
                      const Tensor& g = t.nodes_[size_t(io)].grad;
                      const Tensor& y = t.nodes_[size_t(io)].value;
                      Tensor& ga = t.grad_buf(ia);
                      for (int i = 0; i < n; ++i) {
                        double dot = 0.0;
                        for (int j = 0; j < d; ++j) dot += g.at(i, j) * y.at(i, j);
                        for (int j = 0; j < d; ++j)
                          ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                      }
                    });
  softmax_nodes_.push_back(id);
  return id;
}

ValueId Tape::layer_norm(ValueId x, ValueId gain, ValueId bias, double eps) {
  const Tensor& tx = node(x).value;
  const Tensor& tg = node(gain).value;
  const Tensor& tb = node(bias).value;
  check_rank2("layer_norm", tx);
  const int n = tx.rows(), d = tx.cols();
  if (tg.size() != d || tb.size() != d) {
    throw ShapeError("layer_norm: gain/bias size must equal feature dim " +
                     std::to_string(d) + ", got " + shape_str(tg.shape()) + " and " +
                     shape_str(tb.shape()));
  }
  Tensor out({n, d});
  std::vector<double> inv_std(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += tx.at(i, j);
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = tx.at(i, j) - mean;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[size_t(i)] = is;
    for (int j = 0; j < d; ++j) out.at(i, j) = (tx.at(i, j) - mean) * is * tg[j] + tb[j];
  }
  const bool rg =
      node(x).requires_grad || node(gain).requires_grad || node(bias).requires_grad;
  const int32_t ix = x.idx, ig = gain.idx, ib = bias.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), rg, "layer_norm",
              [ix, ig, ib, io, n, d, eps](Tape& t) {
                const Tensor& g = t.nodes_[size_t(io)].grad;
                const Tensor& vx = t.nodes_[size_t(ix)].value;
                const Tensor& vg = t.nodes_[size_t(ig)].value;
                const bool need_x = t.nodes_[size_t(ix)].requires_grad;
                const bool need_g = t.nodes_[size_t(ig)].requires_grad;
                const bool need_b = t.nodes_[size_t(ib)].requires_grad;
                for (int i = 0; i < n; ++i) {
                  double mean = 0.0;
                  for (int j = 0; j < d; ++j) mean += vx.at(i, j);
                  mean /= d;
                  double var = 0.0;
                  for (int j = 0; j < d; ++j) {
                    const double c = vx.at(i, j) - mean;
                    var += c * c;
                  }
                  var /= d;
                  const double is = 1.0 / std::sqrt(var + eps);
                  if (need_b) {
                    Tensor& gb = t.grad_buf(ib);
                    for (int j = 0; j < d; ++j) gb[j] += g.at(i, j);
                  }
                  if (need_g) {
                    Tensor& gg = t.grad_buf(ig);
                    for (int j = 0; j < d; ++j)
                      gg[j] += g.at(i, j) * (vx.at(i, j) - mean) * is;
                  }
                  if (need_x) {
                    Tensor& gx = t.grad_buf(ix);
                    // dxhat, and its row statistics
                    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                    for (int j = 0; j < d; ++j) {
                      const double xhat = (vx.at(i, j) - mean) * is;
                      const double dxhat = g.at(i, j) * vg[j];
                      mean_dxhat += dxhat;
                      mean_dxhat_xhat += dxhat * xhat;
                    }
                    mean_dxhat /= d;
                    mean_dxhat_xhat /= d;
                    for (int j = 0; j < d; ++j) {
                      const double xhat = (vx.at(i, j) - mean) * is;
                      const double dxhat = g.at(i, j) * vg[j];
                      gx.at(i, j) += is * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                    }
                  }
                }
              });
}

ValueId Tape::conv1d_same(ValueId x, ValueId w, ValueId b, int kernel) {
  const Tensor& tx = node(x).value;
  const Tensor& tw = node(w).value;
  const Tensor& tb = node(b).value;
  check_rank2("conv1d_same", tx);
  check_rank2("conv1d_same", tw);
  if (kernel < 1 || kernel % 2 == 0) {
    throw ShapeError("conv1d_same: kernel must be odd and positive, got " +
                     std::to_string(kernel));
  }
  const int n = tx.rows(), din = tx.cols();
  if (tw.rows() != kernel * din) {
    throw ShapeError("conv1d_same: weight rows " + shape_str(tw.shape()) +
                     " do not match kernel*d_in = " + std::to_string(kernel * din));
  }
  const int dout = tw.cols();
  if (tb.size() != dout) {
    throw ShapeError("conv1d_same: bias " + shape_str(tb.shape()) +
                     " does not match d_out " + std::to_string(dout));
  }
  const int pad = kernel / 2;
  Tensor out({n, dout});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dout; ++j) out.at(i, j) = tb[j];
    for (int tap = 0; tap < kernel; ++tap) {
      const int src = i + tap - pad;
      if (src < 0 || src >= n) continue;
      for (int c = 0; c < din; ++c) {
        const double xv = tx.at(src, c);
        if (xv == 0.0) continue;
        const int wrow = tap * din + c;
        for (int j = 0; j < dout; ++j) out.at(i, j) += xv * tw.at(wrow, j);
      }
    }
  }
  const bool rg =
      node(x).requires_grad || node(w).requires_grad || node(b).requires_grad;
  const int32_t ix = x.idx, iw = w.idx, ib = b.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), rg, "conv1d_same",
              [ix, iw, ib, io, kernel, n, din, dout, pad](Tape& t) {
                const Tensor& g = t.nodes_[size_t(io)].grad;
                const Tensor& vx = t.nodes_[size_t(ix)].value;
                const Tensor& vw = t.nodes_[size_t(iw)].value;
                if (t.nodes_[size_t(ib)].requires_grad) {
                  Tensor& gb = t.grad_buf(ib);
                  for (int i = 0; i < n; ++i)
                    for (int j = 0; j < dout; ++j) gb[j] += g.at(i, j);
                }
                const bool need_w = t.nodes_[size_t(iw)].requires_grad;
                const bool need_x = t.nodes_[size_t(ix)].requires_grad;
                if (!need_w && !need_x) return;
                for (int i = 0; i < n; ++i) {
                  for (int tap = 0; tap < kernel; ++tap) {
                    const int src = i + tap - pad;
                    if (src < 0 || src >= n) continue;
                    for (int c = 0; c < din; ++c) {
                      const int wrow = tap * din + c;
                      if (need_w) {
                        Tensor& gw = t.grad_buf(iw);
                        const double xv = vx.at(src, c);
                        if (xv != 0.0) {
                          for (int j = 0; j < dout; ++j)
                            gw.at(wrow, j) += xv * g.at(i, j);
                        }
                      }
                      if (need_x) {
                        Tensor& gx = t.grad_buf(ix);
                        double acc = 0.0;
                        for (int j = 0; j < dout; ++j)
                          acc += vw.at(wrow, j) * g.at(i, j);
                        gx.at(src, c) += acc;
                      }
                    }
                  }
                }
              });
}

ValueId Tape::concat_rows(std::span<const ValueId> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const int d = node(parts[0]).value.cols();
  int total = 0;
  bool rg = false;
  for (ValueId p : parts) {
    const Tensor& tp = node(p).value;
    check_rank2("concat_rows", tp);
    if (tp.cols() != d) {
      throw ShapeError("concat_rows: column counts differ " +
                       shape_str(node(parts[0]).value.shape()) + " vs " +
                       shape_str(tp.shape()));
    }
    total += tp.rows();
    rg = rg || node(p).requires_grad;
  }
  Tensor out({total, d});
  int r = 0;
  std::vector<int32_t> idxs;
  std::vector<int> offsets;
  for (ValueId p : parts) {
    const Tensor& tp = node(p).value;
    offsets.push_back(r);
    idxs.push_back(p.idx);
    for (int i = 0; i < tp.rows(); ++i)
      for (int j = 0; j < d; ++j) out.at(r + i, j) = tp.at(i, j);
    r += tp.rows();
  }
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), rg, "concat_rows",
              [idxs, offsets, io, d](Tape& t) {
                const Tensor& g = t.nodes_[size_t(io)].grad;
                for (size_t k = 0; k < idxs.size(); ++k) {
                  if (!t.nodes_[size_t(idxs[k])].requires_grad) continue;
                  Tensor& gp = t.grad_buf(idxs[k]);
                  const int rows = gp.rows();
                  for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < d; ++j) gp.at(i, j) += g.at(offsets[k] + i, j);
                }
              });
}

ValueId Tape::concat_cols(std::span<const ValueId> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const int n = node(parts[0]).value.rows();
  int total = 0;
  bool rg = false;
  for (ValueId p : parts) {
    const Tensor& tp = node(p).value;
    check_rank2("concat_cols", tp);
    if (tp.rows() != n) {
      throw ShapeError("concat_cols: row counts differ " +
                       shape_str(node(parts[0]).value.shape()) + " vs " +
                       shape_str(tp.shape()));
    }
    total += tp.cols();
    rg = rg || node(p).requires_grad;
  }
  Tensor out({n, total});
  int c = 0;
  std::vector<int32_t> idxs;
  std::vector<int> offsets;
  for (ValueId p : parts) {
    const Tensor& tp = node(p).value;
    offsets.push_back(c);
    idxs.push_back(p.idx);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < tp.cols(); ++j) out.at(i, c + j) = tp.at(i, j);
    c += tp.cols();
  }
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), rg, "concat_cols",
              [idxs, offsets, io, n](Tape& t) {
                const Tensor& g = t.nodes_[size_t(io)].grad;
                for (size_t k = 0; k < idxs.size(); ++k) {
                  if (!t.nodes_[size_t(idxs[k])].requires_grad) continue;
                  Tensor& gp = t.grad_buf(idxs[k]);
                  const int cols = gp.cols();
                  for (int i = 0; i < n; ++i)
                    for (int j = 0; j < cols; ++j) gp.at(i, j) += g.at(i, offsets[k] + j);
                }
              });
}

ValueId Tape::slice_cols(ValueId a, int begin, int end) {
  const Tensor& ta = node(a).value;
  check_rank2("slice_cols", ta);
  if (begin < 0 || end > ta.cols() || begin >= end) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " + shape_str(ta.shape()));
  }
  const int n = ta.rows(), w = end - begin;
  Tensor out({n, w});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < w; ++j) out.at(i, j) = ta.at(i, begin + j);
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), node(a).requires_grad, "slice_cols",
              [ia, io, begin, n, w](Tape& t) {
                if (!t.nodes_[size_t(ia)].requires_grad) return;
                const Tensor& g = t.nodes_[size_t(io)].grad;
                Tensor& ga = t.grad_buf(ia);
                for (int i = 0; i < n; ++i)
                  for (int j = 0; j < w; ++j) ga.at(i, begin + j) += g.at(i, j);
              });
}

ValueId Tape::slice_rows(ValueId a, int begin, int end) {
  const Tensor& ta = node(a).value;
  check_rank2("slice_rows", ta);
  if (begin < 0 || end > ta.rows() || begin >= end) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " + shape_str(ta.shape()));
  }
  const int h = end - begin, d = ta.cols();
  Tensor out({h, d});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) = ta.at(begin + i, j);
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), node(a).requires_grad, "slice_rows",
              [ia, io, begin, h, d](Tape& t) {
                if (!t.nodes_[size_t(ia)].requires_grad) return;
                const Tensor& g = t.nodes_[size_t(io)].grad;
                Tensor& ga = t.grad_buf(ia);
                for (int i = 0; i < h; ++i)
                  for (int j = 0; j < d; ++j) ga.at(begin + i, j) += g.at(i, j);
              });
}

ValueId Tape::mean_rows(ValueId a) {
  const Tensor& ta = node(a).value;
  check_rank2("mean_rows", ta);
  const int n = ta.rows(), d = ta.cols();
  Tensor out({1, d});
  for (int j = 0; j < d; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += ta.at(i, j);
    out.at(0, j) = s / n;
  }
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(std::move(out), node(a).requires_grad, "mean_rows", [ia, io, n, d](Tape& t) {
    if (!t.nodes_[size_t(ia)].requires_grad) return;
    const Tensor& g = t.nodes_[size_t(io)].grad;
    Tensor& ga = t.grad_buf(ia);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) ga.at(i, j) += g.at(0, j) / n;
  });
}

ValueId Tape::mean_all(ValueId a) {
  const Tensor& ta = node(a).value;
  const int64_t count = ta.size();
  double s = 0.0;
  for (int64_t i = 0; i < count; ++i) s += ta[i];
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(Tensor::scalar(s / double(count)), node(a).requires_grad, "mean_all",
              [ia, io, count](Tape& t) {
                if (!t.nodes_[size_t(ia)].requires_grad) return;
                const double g = t.nodes_[size_t(io)].grad[0];
                Tensor& ga = t.grad_buf(ia);
                for (int64_t i = 0; i < count; ++i) ga[i] += g / double(count);
              });
}

ValueId Tape::sum_all(ValueId a) {
  const Tensor& ta = node(a).value;
  const int64_t count = ta.size();
  double s = 0.0;
  for (int64_t i = 0; i < count; ++i) s += ta[i];
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(Tensor::scalar(s), node(a).requires_grad, "sum_all",
              [ia, io, count](Tape& t) {
                if (!t.nodes_[size_t(ia)].requires_grad) return;
                const double g = t.nodes_[size_t(io)].grad[0];
                Tensor& ga = t.grad_buf(ia);
                for (int64_t i = 0; i < count; ++i) ga[i] += g;
              });
}

ValueId Tape::cosine_similarity(ValueId a, ValueId b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (ta.size() != tb.size()) {
    throw ShapeError("cosine_similarity: sizes differ " + shape_str(ta.shape()) +
                     " vs " + shape_str(tb.shape()));
  }
  const int64_t count = ta.size();
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (int64_t i = 0; i < count; ++i) {
    dot += ta[i] * tb[i];
    na2 += ta[i] * ta[i];
    nb2 += tb[i] * tb[i];
  }
  constexpr double kNormFloor = 1e-24;  // squared-norm threshold
  const bool degenerate = na2 < kNormFloor || nb2 < kNormFloor;
  const double cosv = degenerate ? 0.0 : dot / std::sqrt(na2 * nb2);
  const bool rg = node(a).requires_grad || node(b).requires_grad;
  const int32_t ia = a.idx, ib = b.idx;
  const int32_t io = int32_t(nodes_.size());
  return push(Tensor::scalar(cosv), rg, "cosine_similarity",
              [ia, ib, io, count, degenerate](Tape& t) {
                if (degenerate) return;  // defined as 0 with zero gradient
                const double g = t.nodes_[size_t(io)].grad[0];
                const double c = t.nodes_[size_t(io)].value[0];
                const Tensor& va = t.nodes_[size_t(ia)].value;
                const Tensor& vb = t.nodes_[size_t(ib)].value;
                double na2 = 0.0, nb2 = 0.0;
                for (int64_t i = 0; i < count; ++i) {
                  na2 += va[i] * va[i];
                  nb2 += vb[i] * vb[i];
                }
                const double denom = std::sqrt(na2 * nb2);
                if (t.nodes_[size_t(ia)].requires_grad) {
                  Tensor& ga = t.grad_buf(ia);
                  for (int64_t i = 0; i < count; ++i)
                    ga[i] += g * (vb[i] / denom - c * va[i] / na2);
                }
                if (t.nodes_[size_t(ib)].requires_grad) {
                  Tensor& gb = t.grad_buf(ib);
                  for (int64_t i = 0; i < count; ++i)
                    gb[i] += g * (va[i] / denom - c * vb[i] / nb2);
                }
              });
}

ValueId Tape::dropout_mask(ValueId a, Tensor mask) {
  const Tensor& ta = node(a).value;
  if (!ta.same_shape(mask)) {
    throw ShapeError("dropout_mask: mask shape " + shape_str(mask.shape()) +
                     " does not match input " + shape_str(ta.shape()));
  }
  Tensor out(ta.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] * mask[i];
  const int32_t ia = a.idx;
  const int32_t io = int32_t(nodes_.size());
  auto shared_mask = std::make_shared<Tensor>(std::move(mask));
  return push(std::move(out), node(a).requires_grad, "dropout_mask",
              [ia, io, shared_mask](Tape& t) {
                if (!t.nodes_[size_t(ia)].requires_grad) return;
                const Tensor& g = t.nodes_[size_t(io)].grad;
                const Tensor& m = *shared_mask;
                Tensor& ga = t.grad_buf(ia);
                for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * m[i];
              });
}

void Tape::backward(ValueId loss) {
  const Node& ln = node(loss);
  if (ln.value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     shape_str(ln.value.shape()));
  }
  if (backward_ran_) reset_grads();
  backward_ran_ = true;
  grad_buf(loss.idx)[0] = 1.0;
  for (int32_t i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[size_t(i)];
    if (!n.requires_grad || n.grad.empty() || !n.backprop) continue;
    n.backprop(*this);
  }
}

}  // namespace dlf
