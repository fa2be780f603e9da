#pragma once

// Reverse-mode differentiation over DenseMatrix values.
//
// A Tape records nodes in creation order, so parents always precede children.
// Sparse operands are referenced, not copied: they must outlive the tape.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lgmrec/rng.hpp"
#include "lgmrec/tensor.hpp"

namespace lgmrec::ad {

struct Var {
  std::size_t id;
};

enum class OpKind {
  kConstant,
  kParameter,
  kSpmm,
  kMatmul,
  kTranspose,
  kAdd,
  kSub,
  kScale,
  kMul,
  kAddConstant,
  kRowNormalize,
  kSoftmaxRows,
  kDropout,
  kGatherRows,
  kSliceRows,
  kVstack,
  kRowDot,
  kSum,
  kSumSquares,
  kSoftplus,
  kDiagCrossEntropy,
};

const char* op_name(OpKind kind);

/// Gradients indexed by node id; nodes the root does not reach hold empty matrices.
class NodeGradients {
 public:
  NodeGradients(std::vector<DenseMatrix> grads, std::vector<bool> reached)
      : grads_(std::move(grads)), reached_(std::move(reached)) {}
  bool reached(Var v) const { return reached_[v.id]; }
  const DenseMatrix& operator[](Var v) const { return grads_[v.id]; }

 private:
  std::vector<DenseMatrix> grads_;
  std::vector<bool> reached_;
};

class Tape {
 public:
  /// Accumulates a parent's gradient during backward.
  class Sink {
   public:
    bool wants(std::size_t parent) const;
    void add(std::size_t parent, const DenseMatrix& grad);

   private:
    friend class Tape;
    Sink(const Tape& tape, std::vector<DenseMatrix>& grads, std::vector<bool>& reached,
         std::span<const Var> parents)
        : tape_(tape), grads_(grads), reached_(reached), parents_(parents) {}
    const Tape& tape_;
    std::vector<DenseMatrix>& grads_;
    std::vector<bool>& reached_;
    std::span<const Var> parents_;
  };
  using BackwardFn = std::function<void(const DenseMatrix& grad_out, Sink& sink)>;

  Var constant(DenseMatrix value);
  /// Shares an existing matrix without copying.
  Var constant(std::shared_ptr<const DenseMatrix> value);
  /// Leaf bound to slot `param_index` of a parameter set. Several leaves may share a slot.
  Var parameter(std::size_t param_index, DenseMatrix value);

  const DenseMatrix& value(Var v) const { return *nodes_[v.id].value; }
  std::shared_ptr<const DenseMatrix> value_ptr(Var v) const { return nodes_[v.id].value; }
  OpKind kind(Var v) const { return nodes_[v.id].kind; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Root must be 1x1.
  NodeGradients backward(Var root) const;

  /// Sums leaf gradients per parameter slot; unreached slots get zeros of `shapes[i]`.
  std::vector<DenseMatrix> parameter_gradients(const NodeGradients& grads,
                                               std::span<const DenseMatrix> shapes) const;

  Var push(OpKind kind, DenseMatrix value, std::vector<Var> parents, BackwardFn backward);

 private:
  struct Node {
    OpKind kind;
    std::shared_ptr<const DenseMatrix> value;
    std::vector<Var> parents;
    BackwardFn backward;
    bool requires_grad = false;
    std::ptrdiff_t param_index = -1;
  };
  std::vector<Node> nodes_;
};

Var spmm(Tape& t, const CsrMatrix& s, Var d);
Var matmul(Tape& t, Var a, Var b, bool transpose_a = false, bool transpose_b = false);
Var transpose(Tape& t, Var a);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
/// Elementwise product.
Var mul(Tape& t, Var a, Var b);
Var add_constant(Tape& t, Var a, const DenseMatrix& c);
Var row_l2_normalize(Tape& t, Var a);
Var softmax_rows(Tape& t, Var a, double temperature);
/// Inverted dropout. Returns `a` itself when not training or ratio is 0.
Var dropout(Tape& t, Var a, double ratio, Rng& rng, bool training);
Var gather_rows(Tape& t, Var a, std::span<const std::size_t> rows);
Var slice_rows(Tape& t, Var a, std::size_t begin, std::size_t count);
Var vstack(Tape& t, std::span<const Var> parts);
/// Row-wise inner products, n x 1.
Var row_dot(Tape& t, Var a, Var b);
Var sum(Tape& t, Var a);
Var sum_squares(Tape& t, Var a);
/// Elementwise ln(1 + e^x), overflow-safe.
Var softplus(Tape& t, Var a);
/// Mean over rows r of (logsumexp(row r) - a[r][r]) for a square logit matrix.
Var diag_cross_entropy(Tape& t, Var logits);

/// Inverted-dropout mask: entries are 0 with probability `ratio`, else 1/(1-ratio).
DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double ratio, Rng& rng);

}  // namespace lgmrec::ad
