#include "lgmrec/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "lgmrec/error.hpp"

namespace lgmrec::ad {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kSpmm: return "spmm";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kScale: return "scale";
    case OpKind::kMul: return "mul";
    case OpKind::kAddConstant: return "add_constant";
    case OpKind::kRowNormalize: return "row_l2_normalize";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kDropout: return "dropout";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kVstack: return "vstack";
    case OpKind::kRowDot: return "row_dot";
    case OpKind::kSum: return "sum";
    case OpKind::kSumSquares: return "sum_squares";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kDiagCrossEntropy: return "diag_cross_entropy";
  }
  return "?";
}

bool Tape::Sink::wants(std::size_t parent) const {
  return tape_.nodes_[parents_[parent].id].requires_grad;
}

void Tape::Sink::add(std::size_t parent, const DenseMatrix& grad) {
  const std::size_t id = parents_[parent].id;
  if (!tape_.nodes_[id].requires_grad) return;
  if (!reached_[id]) {
    grads_[id] = grad;
    reached_[id] = true;
  } else {
    grads_[id] += grad;
  }
}

Var Tape::constant(DenseMatrix value) {
  return constant(std::make_shared<const DenseMatrix>(std::move(value)));
}

Var Tape::constant(std::shared_ptr<const DenseMatrix> value) {
  nodes_.push_back(Node{OpKind::kConstant, std::move(value), {}, nullptr, false, -1});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(std::size_t param_index, DenseMatrix value) {
  nodes_.push_back(Node{OpKind::kParameter, std::make_shared<const DenseMatrix>(std::move(value)),
                        {}, nullptr, true, static_cast<std::ptrdiff_t>(param_index)});
  return Var{nodes_.size() - 1};
}

Var Tape::push(OpKind kind, DenseMatrix value, std::vector<Var> parents, BackwardFn backward) {
  if (!value.all_finite()) {
    fail(ErrorCode::kNumeric, std::string("non-finite value produced by ") + op_name(kind));
  }
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [&](Var p) { return nodes_[p.id].requires_grad; });
  nodes_.push_back(Node{kind, std::make_shared<const DenseMatrix>(std::move(value)),
                        std::move(parents), needs ? std::move(backward) : nullptr, needs, -1});
  return Var{nodes_.size() - 1};
}

NodeGradients Tape::backward(Var root) const {
  const auto& r = *nodes_.at(root.id).value;
  if (r.rows() != 1 || r.cols() != 1) {
    fail(ErrorCode::kUsage, "backward root must be scalar, got " + std::to_string(r.rows()) + "x" +
                                std::to_string(r.cols()));
  }
  std::vector<DenseMatrix> grads(nodes_.size());
  std::vector<bool> reached(nodes_.size(), false);
  grads[root.id] = DenseMatrix(1, 1, 1.0);
  reached[root.id] = true;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!reached[id] || !node.backward) continue;
    Sink sink(*this, grads, reached, node.parents);
    node.backward(grads[id], sink);
  }
  return NodeGradients(std::move(grads), std::move(reached));
}

std::vector<DenseMatrix> Tape::parameter_gradients(const NodeGradients& grads,
                                                   std::span<const DenseMatrix> shapes) const {
  std::vector<DenseMatrix> out;
  out.reserve(shapes.size());
  for (const auto& s : shapes) out.emplace_back(s.rows(), s.cols());
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.param_index < 0 || !grads.reached(Var{id})) continue;
    out.at(static_cast<std::size_t>(node.param_index)) += grads[Var{id}];
  }
  return out;
}

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kDimension, std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
                                    "x" + std::to_string(b.cols()));
  }
}

DenseMatrix scalar(double v) { return DenseMatrix(1, 1, v); }

}  // namespace

Var spmm(Tape& t, const CsrMatrix& s, Var d) {
  const CsrMatrix* sp = &s;
  return t.push(OpKind::kSpmm, lgmrec::spmm(s, t.value(d)), {d},
                [sp](const DenseMatrix& g, Tape::Sink& sink) {
                  sink.add(0, spmm_transposed(*sp, g));
                });
}

Var matmul(Tape& t, Var a, Var b, bool transpose_a, bool transpose_b) {
  DenseMatrix out = lgmrec::matmul(t.value(a), t.value(b), transpose_a, transpose_b);
  return t.push(OpKind::kMatmul, std::move(out), {a, b},
                [A = t.value_ptr(a), B = t.value_ptr(b), transpose_a, transpose_b](
                    const DenseMatrix& g, Tape::Sink& sink) {
                  // C = op(A) op(B)
                  if (sink.wants(0)) {
                    if (!transpose_a) {
                      sink.add(0, lgmrec::matmul(g, *B, false, !transpose_b));
                    } else {
                      sink.add(0, lgmrec::matmul(*B, g, transpose_b, true));
                    }
                  }
                  if (sink.wants(1)) {
                    if (!transpose_b) {
                      sink.add(1, lgmrec::matmul(*A, g, !transpose_a, false));
                    } else {
                      sink.add(1, lgmrec::matmul(g, *A, true, transpose_a));
                    }
                  }
                });
}

Var transpose(Tape& t, Var a) {
  return t.push(OpKind::kTranspose, lgmrec::transpose(t.value(a)), {a},
                [](const DenseMatrix& g, Tape::Sink& sink) { sink.add(0, lgmrec::transpose(g)); });
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "add");
  DenseMatrix out = t.value(a);
  out += t.value(b);
  return t.push(OpKind::kAdd, std::move(out), {a, b}, [](const DenseMatrix& g, Tape::Sink& sink) {
    sink.add(0, g);
    sink.add(1, g);
  });
}

Var sub(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "sub");
  DenseMatrix out = t.value(b);
  out *= -1.0;
  out += t.value(a);
  return t.push(OpKind::kSub, std::move(out), {a, b}, [](const DenseMatrix& g, Tape::Sink& sink) {
    sink.add(0, g);
    if (sink.wants(1)) {
      DenseMatrix neg = g;
      neg *= -1.0;
      sink.add(1, neg);
    }
  });
}

Var scale(Tape& t, Var a, double s) {
  DenseMatrix out = t.value(a);
  out *= s;
  return t.push(OpKind::kScale, std::move(out), {a}, [s](const DenseMatrix& g, Tape::Sink& sink) {
    DenseMatrix ga = g;
    ga *= s;
    sink.add(0, ga);
  });
}

Var mul(Tape& t, Var a, Var b) {
  const DenseMatrix& av = t.value(a);
  const DenseMatrix& bv = t.value(b);
  require_same_shape(av, bv, "mul");
  DenseMatrix out(av.rows(), av.cols());
  for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] = av.values()[k] * bv.values()[k];
  return t.push(OpKind::kMul, std::move(out), {a, b},
                [A = t.value_ptr(a), B = t.value_ptr(b)](const DenseMatrix& g, Tape::Sink& sink) {
                  for (std::size_t which = 0; which < 2; ++which) {
                    if (!sink.wants(which)) continue;
                    const DenseMatrix& other = which == 0 ? *B : *A;
                    DenseMatrix ga(g.rows(), g.cols());
                    for (std::size_t k = 0; k < g.size(); ++k)
                      ga.values()[k] = g.values()[k] * other.values()[k];
                    sink.add(which, ga);
                  }
                });
}

Var add_constant(Tape& t, Var a, const DenseMatrix& c) {
  require_same_shape(t.value(a), c, "add_constant");
  DenseMatrix out = t.value(a);
  out += c;
  return t.push(OpKind::kAddConstant, std::move(out), {a},
                [](const DenseMatrix& g, Tape::Sink& sink) { sink.add(0, g); });
}

Var row_l2_normalize(Tape& t, Var a) {
  const DenseMatrix& x = t.value(a);
  std::vector<double> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sq = 0.0;
    for (double v : x.row(r)) sq += v * v;
    norms[r] = std::sqrt(sq);
  }
  DenseMatrix y = lgmrec::row_l2_normalize(x);
  return t.push(OpKind::kRowNormalize, y, {a},
                [y, norms = std::move(norms)](const DenseMatrix& g, Tape::Sink& sink) {
                  DenseMatrix gx(g.rows(), g.cols());
                  for (std::size_t r = 0; r < g.rows(); ++r) {
                    // Zero rows are a fixed point with zero gradient.
                    if (norms[r] == 0.0) continue;
                    const auto yr = y.row(r);
                    const auto gr = g.row(r);
                    double dot = 0.0;
                    for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
                    auto out = gx.row(r);
                    for (std::size_t c = 0; c < yr.size(); ++c)
                      out[c] = (gr[c] - yr[c] * dot) / norms[r];
                  }
                  sink.add(0, gx);
                });
}

Var softmax_rows(Tape& t, Var a, double temperature) {
  DenseMatrix y = lgmrec::softmax_rows(t.value(a), temperature);
  return t.push(OpKind::kSoftmaxRows, y, {a},
                [y, temperature](const DenseMatrix& g, Tape::Sink& sink) {
                  DenseMatrix gx(g.rows(), g.cols());
                  for (std::size_t r = 0; r < g.rows(); ++r) {
                    const auto yr = y.row(r);
                    const auto gr = g.row(r);
                    double dot = 0.0;
                    for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
                    auto out = gx.row(r);
                    for (std::size_t c = 0; c < yr.size(); ++c)
                      out[c] = yr[c] * (gr[c] - dot) / temperature;
                  }
                  sink.add(0, gx);
                });
}

DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio < 1.0)) fail(ErrorCode::kConfig, "dropout ratio must be in [0,1)");
  DenseMatrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - ratio);
  for (double& m : mask.values()) m = uniform01(rng) < ratio ? 0.0 : keep_scale;
  return mask;
}

Var dropout(Tape& t, Var a, double ratio, Rng& rng, bool training) {
  if (!(ratio >= 0.0 && ratio < 1.0)) fail(ErrorCode::kConfig, "dropout ratio must be in [0,1)");
  if (!training || ratio == 0.0) return a;
  const DenseMatrix& x = t.value(a);
  DenseMatrix mask = dropout_mask(x.rows(), x.cols(), ratio, rng);
  DenseMatrix out = x;
  for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] *= mask.values()[k];
  return t.push(OpKind::kDropout, std::move(out), {a},
                [mask = std::move(mask)](const DenseMatrix& g, Tape::Sink& sink) {
                  DenseMatrix gx = g;
                  for (std::size_t k = 0; k < gx.size(); ++k) gx.values()[k] *= mask.values()[k];
                  sink.add(0, gx);
                });
}

Var gather_rows(Tape& t, Var a, std::span<const std::size_t> rows) {
  const DenseMatrix& x = t.value(a);
  DenseMatrix out(rows.size(), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= x.rows()) fail(ErrorCode::kIndex, "gather_rows index out of range");
    std::copy(x.row(rows[k]).begin(), x.row(rows[k]).end(), out.row(k).begin());
  }
  return t.push(OpKind::kGatherRows, std::move(out), {a},
                [idx = std::vector<std::size_t>(rows.begin(), rows.end()), n = x.rows()](
                    const DenseMatrix& g, Tape::Sink& sink) {
                  DenseMatrix gx(n, g.cols());
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    auto dst = gx.row(idx[k]);
                    const auto src = g.row(k);
                    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                  }
                  sink.add(0, gx);
                });
}

Var slice_rows(Tape& t, Var a, std::size_t begin, std::size_t count) {
  const DenseMatrix& x = t.value(a);
  if (begin + count > x.rows()) fail(ErrorCode::kIndex, "slice_rows range out of bounds");
  DenseMatrix out(count, x.cols());
  std::copy(x.values().begin() + static_cast<std::ptrdiff_t>(begin * x.cols()),
            x.values().begin() + static_cast<std::ptrdiff_t>((begin + count) * x.cols()),
            out.values().begin());
  return t.push(OpKind::kSliceRows, std::move(out), {a},
                [begin, n = x.rows()](const DenseMatrix& g, Tape::Sink& sink) {
                  DenseMatrix gx(n, g.cols());
                  std::copy(g.values().begin(), g.values().end(),
                            gx.values().begin() + static_cast<std::ptrdiff_t>(begin * g.cols()));
                  sink.add(0, gx);
                });
}

Var vstack(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::kDimension, "vstack of nothing");
  const std::size_t cols = t.value(parts[0]).cols();
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    if (t.value(p).cols() != cols) fail(ErrorCode::kDimension, "vstack column mismatch");
    offsets.push_back(rows);
    rows += t.value(p).rows();
  }
  DenseMatrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = t.value(parts[k]).values();
    std::copy(src.begin(), src.end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(offsets[k] * cols));
  }
  std::vector<std::size_t> counts;
  for (Var p : parts) counts.push_back(t.value(p).rows());
  return t.push(OpKind::kVstack, std::move(out), {parts.begin(), parts.end()},
                [offsets, counts](const DenseMatrix& g, Tape::Sink& sink) {
                  for (std::size_t k = 0; k < offsets.size(); ++k) {
                    if (!sink.wants(k)) continue;
                    DenseMatrix part(counts[k], g.cols());
                    const auto first = g.values().begin() +
                                       static_cast<std::ptrdiff_t>(offsets[k] * g.cols());
                    std::copy(first, first + static_cast<std::ptrdiff_t>(part.size()),
                              part.values().begin());
                    sink.add(k, part);
                  }
                });
}

Var row_dot(Tape& t, Var a, Var b) {
  const DenseMatrix& av = t.value(a);
  const DenseMatrix& bv = t.value(b);
  require_same_shape(av, bv, "row_dot");
  DenseMatrix out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) acc += av(r, c) * bv(r, c);
    out(r, 0) = acc;
  }
  return t.push(OpKind::kRowDot, std::move(out), {a, b},
                [A = t.value_ptr(a), B = t.value_ptr(b)](const DenseMatrix& g, Tape::Sink& sink) {
                  for (std::size_t which = 0; which < 2; ++which) {
                    if (!sink.wants(which)) continue;
                    const DenseMatrix& other = which == 0 ? *B : *A;
                    DenseMatrix gx(other.rows(), other.cols());
                    for (std::size_t r = 0; r < other.rows(); ++r)
                      for (std::size_t c = 0; c < other.cols(); ++c)
                        gx(r, c) = g(r, 0) * other(r, c);
                    sink.add(which, gx);
                  }
                });
}

Var sum(Tape& t, Var a) {
  const DenseMatrix& x = t.value(a);
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return t.push(OpKind::kSum, scalar(acc), {a},
                [r = x.rows(), c = x.cols()](const DenseMatrix& g, Tape::Sink& sink) {
                  sink.add(0, DenseMatrix(r, c, g(0, 0)));
                });
}

Var sum_squares(Tape& t, Var a) {
  const DenseMatrix& x = t.value(a);
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  return t.push(OpKind::kSumSquares, scalar(acc), {a},
                [X = t.value_ptr(a)](const DenseMatrix& g, Tape::Sink& sink) {
                  DenseMatrix gx = *X;
                  gx *= 2.0 * g(0, 0);
                  sink.add(0, gx);
                });
}

Var softplus(Tape& t, Var a) {
  const DenseMatrix& x = t.value(a);
  DenseMatrix out(x.rows(), x.cols());
  DenseMatrix sig(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double v = x.values()[k];
    out.values()[k] = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    sig.values()[k] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return t.push(OpKind::kSoftplus, std::move(out), {a},
                [sig = std::move(sig)](const DenseMatrix& g, Tape::Sink& sink) {
                  DenseMatrix gx = g;
                  for (std::size_t k = 0; k < gx.size(); ++k) gx.values()[k] *= sig.values()[k];
                  sink.add(0, gx);
                });
}

Var diag_cross_entropy(Tape& t, Var logits) {
  const DenseMatrix& s = t.value(logits);
  if (s.rows() != s.cols()) fail(ErrorCode::kDimension, "diag_cross_entropy needs a square matrix");
  const std::size_t n = s.rows();
  if (n == 0) fail(ErrorCode::kDimension, "diag_cross_entropy of empty matrix");
  DenseMatrix probs = lgmrec::softmax_rows(s, 1.0);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = s.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double acc = 0.0;
    for (double v : row) acc += std::exp(v - mx);
    total += mx + std::log(acc) - s(r, r);
  }
  return t.push(OpKind::kDiagCrossEntropy, scalar(total / static_cast<double>(n)), {logits},
                [probs = std::move(probs), n](const DenseMatrix& g, Tape::Sink& sink) {
                  DenseMatrix gx = probs;
                  for (std::size_t r = 0; r < n; ++r) gx(r, r) -= 1.0;
                  gx *= g(0, 0) / static_cast<double>(n);
                  sink.add(0, gx);
                });
}

}  // namespace lgmrec::ad
