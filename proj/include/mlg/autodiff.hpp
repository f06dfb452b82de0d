#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation it evaluates; backward() replays the record
// in reverse. Tapes are single-threaded and cheap to create, so the trainer
// gives each sample its own tape and runs them concurrently. Parameters live
// outside the tape and are referenced, not copied; their gradients are read
// back per tape with for_each_param_grad().

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mlg::ad {

template <typename T>
struct Parameter {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<T> value;

  Parameter() = default;
  Parameter(std::string n, int r, int c) : name(std::move(n)), rows(r), cols(c), value(std::size_t(r) * c) {}
  std::size_t size() const { return value.size(); }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

struct ConvGeometry {
  int channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

template <typename T>
class Tape {
 public:
  // With record=false no backward closures are kept (inference mode).
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(std::vector<T> values, int rows, int cols);
  // Leaf whose gradient is retained after backward().
  Var input(std::vector<T> values, int rows, int cols);
  // Leaf bound to external parameter storage; `slot` identifies it in
  // for_each_param_grad().
  Var param(const Parameter<T>& p, int slot);

  int rows(Var v) const { return nodes_[v.id].rows; }
  int cols(Var v) const { return nodes_[v.id].cols; }
  std::span<const T> value(Var v) const;
  // Empty span when no gradient reached the node.
  std::span<const T> grad(Var v) const;
  T scalar(Var v) const { return value(v)[0]; }

  Var matmul(Var a, Var b);     // (m,k)(k,n)
  Var matmul_nt(Var a, Var b);  // (m,k)(n,k)^T
  Var matmul_tn(Var a, Var b);  // (k,m)^T(k,n)
  Var transpose(Var a);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T s);
  Var add_row_bias(Var a, Var bias);  // bias (1, cols)
  Var add_col_bias(Var a, Var bias);  // bias (rows, 1)

  Var relu(Var a);
  Var tanh(Var a);

  // x: (channels, height*width) -> (channels*k*k, oh*ow)
  Var im2col(Var x, const ConvGeometry& g);
  // x: (n, d) -> (n, width*d); row i holds rows i-width/2 .. i+width/2,
  // zero outside [0, valid_len).
  Var im2col_1d(Var x, int width, int valid_len);

  Var gather_rows(Var table, std::span<const int> ids);
  Var slice_rows(Var a, int begin, int count);
  Var concat_rows(std::span<const Var> parts);
  Var diag(Var a);       // (n,n) -> (n,1)
  Var sum(Var a);        // -> (1,1)
  Var mean_cols(Var a);  // (r,c) -> (r,1)

  // Rows are divided by max(norm, eps). With eps = 0 a zero-norm row throws
  // ValidationError.
  Var l2_normalize_rows(Var a, T eps = T(0));
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var row_dot(Var a, Var b);  // (r,c),(r,c) -> (r,1)
  // x: (n,1); offsets has k+1 entries with offsets[0]=0, offsets[k]=n.
  // Returns (k,1) log-sum-exp per segment, evaluated max-shifted.
  Var segment_logsumexp(Var x, std::span<const int> offsets);

  // Seeds d(root)=1 for a (1,1) root.
  void backward(Var root);
  // Seeds arbitrary upstream gradients; each seed matches its node's size.
  void backward(std::span<const std::pair<Var, std::vector<T>>> seeds);

  template <typename F>
  void for_each_param_grad(F&& f) const {
    for (const auto& n : nodes_)
      if (n.param_slot >= 0 && !n.grad.empty()) f(n.param_slot, std::span<const T>(n.grad));
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<T> own;
    const T* ext = nullptr;
    std::vector<T> grad;
    bool needs_grad = false;
    int param_slot = -1;
    std::function<void()> back;

    std::size_t size() const { return std::size_t(rows) * cols; }
    const T* data() const { return ext ? ext : own.data(); }
  };

  Var push(std::vector<T> values, int rows, int cols, bool needs_grad);
  const T* val(int id) const { return nodes_[id].data(); }
  T* grad_of(int id);
  bool needs(int id) const { return nodes_[id].needs_grad; }
  void run_backward();

  bool record_;
  std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mlg::ad
