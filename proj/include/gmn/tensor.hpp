#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gmn/rng.hpp"

namespace gmn {

using Shape = std::vector<int>;

int shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Shared payload of a Tensor handle. `grad` stays empty until a backward
// pass touches the tensor. `node_id` is the tensor's identity on the tape
// it was most recently recorded on.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  int node_id = -1;
};

// Dense float64 tensor with value-semantics handle sharing. All math on
// tensors goes through a Tape, which records backward rules as it runs.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  int numel() const { return static_cast<int>(impl_->data.size()); }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }
  const std::vector<double>& grad() const { return impl_->grad; }

  double value() const;              // requires numel() == 1
  double at(int i) const { return impl_->data[static_cast<std::size_t>(i)]; }
  double at(int i, int j) const;     // 2-d indexing

  bool all_finite() const;
  int node_id() const { return impl_ ? impl_->node_id : -1; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
  friend class Tape;
};

// Reverse-mode differentiation tape. Operations record themselves in
// execution order, which is by construction a topological order of the
// computation. backward() replays the recorded rules once each, in
// reverse. The tape is rebuilt per forward pass (define-by-run) and is
// single-threaded; independent model instances may run on independent
// tapes in parallel.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Elementwise, same shape.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor div(const Tensor& a, const Tensor& b);

  Tensor scale(const Tensor& a, double s);          // constant scalar
  Tensor smul(const Tensor& a, const Tensor& s);    // scalar-tensor * tensor

  // matmul supports (m,k)x(k,n) -> (m,n) and (m,k)x(k) -> (m).
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  Tensor relu(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor sigmoid(const Tensor& a);

  Tensor concat(const std::vector<Tensor>& parts);  // 1-d
  Tensor slice(const Tensor& a, int start, int len);  // 1-d
  Tensor tile_rows(const Tensor& v, int rows);      // (d) -> (rows,d)
  Tensor reshape(const Tensor& a, Shape shape);

  Tensor sum(const Tensor& a);                      // -> scalar
  Tensor pick(const Tensor& a, int index);          // 1-d -> scalar
  Tensor logsumexp(const Tensor& a);                // 1-d -> scalar, stable

  // Max-subtracted softmax. axis 0 on 1-d input; axis 0 (columns) or
  // 1 (rows) on 2-d input.
  Tensor softmax(const Tensor& a, int axis = 0);

  // L1 normalization of a nonnegative 1-d vector. Total mass below
  // 1e-12 yields the uniform distribution (constant, no gradient);
  // mass within 1e-9 of 1 passes the input through unchanged, so that
  // convex combinations of distributions stay bit-stable. Negative
  // entries signal an upstream bug and raise.
  Tensor norm_l1(const Tensor& a);

  // Scatters per-edge values into a dense (n,n) matrix, zero off-edges.
  Tensor scatter_edges(const Tensor& values,
                       const std::vector<std::pair<int, int>>& edges, int n);

  // Fills grad with d(loss)/d(tensor) for every tensor recorded on this
  // tape. loss must be scalar. Grads of recorded tensors are zeroed
  // first; tensors never recorded here are left untouched.
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return records_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }
  void clear();

 private:
  struct Record {
    const char* kind;
    std::vector<int> input_ids;
    int output_id;
    std::function<void()> back;
  };

  Tensor make(Shape shape);
  int track(const std::shared_ptr<TensorImpl>& impl);
  void push(const char* kind, const std::vector<Tensor>& inputs,
            const Tensor& output, std::function<void()> back);

  std::vector<Record> records_;
  std::vector<std::shared_ptr<TensorImpl>> nodes_;
  std::unordered_map<TensorImpl*, int> ids_;
};

// Multimodal fusion F(x, y) = ReLU(x + y) - (x - y)^2, elementwise.
Tensor fuse(Tape& tp, const Tensor& x, const Tensor& y);

enum class Activation { kNone, kRelu, kTanh };

// Fixed-depth multilayer perceptron. weights[i] has shape
// (dims[i+1], dims[i]); hidden layers apply the selected activation,
// the output layer is linear.
struct Mlp {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  std::vector<Activation> hidden_activations;
};

// Initializes parameters uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor init_param(Shape shape, int fan_in, Rng& rng);
Mlp make_mlp(const std::vector<int>& dims, Rng& rng,
             Activation hidden = Activation::kRelu);

// Applies the MLP to a vector (in) -> (out) or rowwise to a matrix
// (n,in) -> (n,out).
Tensor mlp_forward(Tape& tp, const Mlp& mlp, const Tensor& x);

std::vector<Tensor> mlp_params(Mlp& mlp);

struct GradCheckReport {
  bool pass = false;
  double max_err = 0.0;   // relative, or absolute where |analytic| < 1e-6
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Scalar-valued function of one tensor, built on the given tape.
using TensorFn = std::function<Tensor(Tape&, const Tensor&)>;

// Compares the taped gradient of f at x against central finite
// differences (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate.
// f is evaluated twice up front; if the two values disagree bitwise the
// function is not deterministic and this raises.
GradCheckReport grad_check(const TensorFn& f, const Tensor& x,
                           double eps = 1e-4, double tol = 1e-3);

// Same comparison for a scalar loss over a set of parameter tensors,
// perturbing each coordinate of each parameter in place.
GradCheckReport grad_check_params(const std::function<Tensor(Tape&)>& loss_fn,
                                  const std::vector<Tensor>& params,
                                  double eps = 1e-4, double tol = 1e-3);

}  // namespace gmn
