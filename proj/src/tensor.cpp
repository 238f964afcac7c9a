#include "gmn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace gmn {

int shape_numel(const Shape& s) {
  int n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, a, b);
}

void ensure_grad(TensorImpl* t) {
  if (t->grad.size() != t->data.size()) t->grad.assign(t->data.size(), 0.0);
}

}  // namespace

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto impl = std::make_shared<TensorImpl>();
  int n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<std::size_t>(n), value);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  if (static_cast<std::size_t>(shape_numel(shape)) != data.size()) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match data length " +
                                std::to_string(data.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

double Tensor::value() const {
  if (numel() != 1) throw std::invalid_argument("tensor: value() on non-scalar of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(int i, int j) const {
  return impl_->data[static_cast<std::size_t>(i) * static_cast<std::size_t>(impl_->shape[1]) +
                     static_cast<std::size_t>(j)];
}

bool Tensor::all_finite() const {
  for (double v : impl_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tape::make(Shape shape) { return Tensor::zeros(std::move(shape)); }

int Tape::track(const std::shared_ptr<TensorImpl>& impl) {
  auto it = ids_.find(impl.get());
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(impl);
  ids_.emplace(impl.get(), id);
  impl->node_id = id;
  return id;
}

void Tape::push(const char* kind, const std::vector<Tensor>& inputs, const Tensor& output,
                std::function<void()> back) {
  Record rec;
  rec.kind = kind;
  rec.input_ids.reserve(inputs.size());
  for (const Tensor& t : inputs) rec.input_ids.push_back(track(t.impl()));
  rec.output_id = track(output.impl());
  rec.back = std::move(back);
  records_.push_back(std::move(rec));
}

void Tape::clear() {
  records_.clear();
  nodes_.clear();
  ids_.clear();
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = make(a.shape());
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  push("add", {a, b}, out, [ai, bi, oi] {
    ensure_grad(ai.get());
    ensure_grad(bi.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      ai->grad[i] += oi->grad[i];
      bi->grad[i] += oi->grad[i];
    }
  });
  return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = make(a.shape());
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  push("sub", {a, b}, out, [ai, bi, oi] {
    ensure_grad(ai.get());
    ensure_grad(bi.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      ai->grad[i] += oi->grad[i];
      bi->grad[i] -= oi->grad[i];
    }
  });
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = make(a.shape());
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  push("mul", {a, b}, out, [ai, bi, oi] {
    ensure_grad(ai.get());
    ensure_grad(bi.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      ai->grad[i] += oi->grad[i] * bi->data[i];
      bi->grad[i] += oi->grad[i] * ai->data[i];
    }
  });
  return out;
}

Tensor Tape::div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  Tensor out = make(a.shape());
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] / b.data()[i];
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  push("div", {a, b}, out, [ai, bi, oi] {
    ensure_grad(ai.get());
    ensure_grad(bi.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      const double inv = 1.0 / bi->data[i];
      ai->grad[i] += oi->grad[i] * inv;
      bi->grad[i] -= oi->grad[i] * ai->data[i] * inv * inv;
    }
  });
  return out;
}

Tensor Tape::scale(const Tensor& a, double s) {
  Tensor out = make(a.shape());
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;
  auto ai = a.impl(), oi = out.impl();
  push("scale", {a}, out, [ai, oi, s] {
    ensure_grad(ai.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i] * s;
  });
  return out;
}

Tensor Tape::smul(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) throw std::invalid_argument("smul: scalar operand has shape " + shape_str(s.shape()));
  Tensor out = make(a.shape());
  const double sv = s.data()[0];
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * sv;
  auto ai = a.impl(), si = s.impl(), oi = out.impl();
  push("smul", {a, s}, out, [ai, si, oi] {
    ensure_grad(ai.get());
    ensure_grad(si.get());
    const double sv = si->data[0];
    double acc = 0.0;
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      ai->grad[i] += oi->grad[i] * sv;
      acc += oi->grad[i] * ai->data[i];
    }
    si->grad[0] += acc;
  });
  return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() == 2 && b.ndim() == 2) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) shape_error("matmul", a, b);
    Tensor out = make({m, n});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = out.data().data();
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        if (av == 0.0) continue;
        const double* brow = B + p * n;
        double* crow = C + i * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    push("matmul", {a, b}, out, [ai, bi, oi, m, k, n] {
      ensure_grad(ai.get());
      ensure_grad(bi.get());
      const double* G = oi->grad.data();
      const double* A = ai->data.data();
      const double* B = bi->data.data();
      // dA = G B^T, dB = A^T G
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
          ai->grad[static_cast<std::size_t>(i) * k + p] += acc;
        }
      }
      for (int p = 0; p < k; ++p) {
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) acc += A[i * k + p] * G[i * n + j];
          bi->grad[static_cast<std::size_t>(p) * n + j] += acc;
        }
      }
    });
    return out;
  }
  if (a.ndim() == 2 && b.ndim() == 1) {
    const int m = a.dim(0), k = a.dim(1);
    if (b.dim(0) != k) shape_error("matmul", a, b);
    Tensor out = make({m});
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a.data()[static_cast<std::size_t>(i) * k + p] * b.data()[p];
      out.data()[static_cast<std::size_t>(i)] = acc;
    }
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    push("matmul", {a, b}, out, [ai, bi, oi, m, k] {
      ensure_grad(ai.get());
      ensure_grad(bi.get());
      for (int i = 0; i < m; ++i) {
        const double g = oi->grad[static_cast<std::size_t>(i)];
        if (g == 0.0) continue;
        for (int p = 0; p < k; ++p) {
          ai->grad[static_cast<std::size_t>(i) * k + p] += g * bi->data[p];
          bi->grad[static_cast<std::size_t>(p)] += g * ai->data[static_cast<std::size_t>(i) * k + p];
        }
      }
    });
    return out;
  }
  shape_error("matmul", a, b);
}

Tensor Tape::transpose(const Tensor& a) {
  if (a.ndim() != 2) throw std::invalid_argument("transpose: expected matrix, got shape " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = make({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.data()[static_cast<std::size_t>(j) * m + i] = a.data()[static_cast<std::size_t>(i) * n + j];
  auto ai = a.impl(), oi = out.impl();
  push("transpose", {a}, out, [ai, oi, m, n] {
    ensure_grad(ai.get());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        ai->grad[static_cast<std::size_t>(i) * n + j] += oi->grad[static_cast<std::size_t>(j) * m + i];
  });
  return out;
}

Tensor Tape::relu(const Tensor& a) {
  Tensor out = make(a.shape());
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  auto ai = a.impl(), oi = out.impl();
  push("relu", {a}, out, [ai, oi] {
    ensure_grad(ai.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i)
      if (ai->data[i] > 0.0) ai->grad[i] += oi->grad[i];
  });
  return out;
}

Tensor Tape::tanh(const Tensor& a) {
  Tensor out = make(a.shape());
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(a.data()[i]);
  auto ai = a.impl(), oi = out.impl();
  push("tanh", {a}, out, [ai, oi] {
    ensure_grad(ai.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i)
      ai->grad[i] += oi->grad[i] * (1.0 - oi->data[i] * oi->data[i]);
  });
  return out;
}

Tensor Tape::sigmoid(const Tensor& a) {
  Tensor out = make(a.shape());
  const std::size_t n = a.data().size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.data()[i];
    out.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  auto ai = a.impl(), oi = out.impl();
  push("sigmoid", {a}, out, [ai, oi] {
    ensure_grad(ai.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i)
      ai->grad[i] += oi->grad[i] * oi->data[i] * (1.0 - oi->data[i]);
  });
  return out;
}

Tensor Tape::concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  int total = 0;
  for (const Tensor& p : parts) {
    if (p.ndim() != 1) throw std::invalid_argument("concat: expected vectors, got shape " + shape_str(p.shape()));
    total += p.dim(0);
  }
  Tensor out = make({total});
  int off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
    off += p.dim(0);
  }
  std::vector<std::shared_ptr<TensorImpl>> impls;
  impls.reserve(parts.size());
  for (const Tensor& p : parts) impls.push_back(p.impl());
  auto oi = out.impl();
  push("concat", parts, out, [impls, oi] {
    std::size_t off = 0;
    for (const auto& pi : impls) {
      ensure_grad(pi.get());
      for (std::size_t i = 0; i < pi->data.size(); ++i) pi->grad[i] += oi->grad[off + i];
      off += pi->data.size();
    }
  });
  return out;
}

Tensor Tape::slice(const Tensor& a, int start, int len) {
  if (a.ndim() != 1) throw std::invalid_argument("slice: expected vector, got shape " + shape_str(a.shape()));
  if (start < 0 || len <= 0 || start + len > a.dim(0))
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                                ") out of bounds for shape " + shape_str(a.shape()));
  Tensor out = make({len});
  std::copy(a.data().begin() + start, a.data().begin() + start + len, out.data().begin());
  auto ai = a.impl(), oi = out.impl();
  push("slice", {a}, out, [ai, oi, start, len] {
    ensure_grad(ai.get());
    for (int i = 0; i < len; ++i) ai->grad[static_cast<std::size_t>(start + i)] += oi->grad[static_cast<std::size_t>(i)];
  });
  return out;
}

Tensor Tape::tile_rows(const Tensor& v, int rows) {
  if (v.ndim() != 1) throw std::invalid_argument("tile_rows: expected vector, got shape " + shape_str(v.shape()));
  if (rows <= 0) throw std::invalid_argument("tile_rows: nonpositive row count");
  const int d = v.dim(0);
  Tensor out = make({rows, d});
  for (int r = 0; r < rows; ++r)
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::size_t>(r) * d);
  auto vi = v.impl(), oi = out.impl();
  push("tile_rows", {v}, out, [vi, oi, rows, d] {
    ensure_grad(vi.get());
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < d; ++j) vi->grad[static_cast<std::size_t>(j)] += oi->grad[static_cast<std::size_t>(r) * d + j];
  });
  return out;
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  Tensor out = Tensor::from(std::move(shape), a.data());
  auto ai = a.impl(), oi = out.impl();
  push("reshape", {a}, out, [ai, oi] {
    ensure_grad(ai.get());
    for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
  });
  return out;
}

Tensor Tape::sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  auto ai = a.impl(), oi = out.impl();
  push("sum", {a}, out, [ai, oi] {
    ensure_grad(ai.get());
    const double g = oi->grad[0];
    for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += g;
  });
  return out;
}

Tensor Tape::pick(const Tensor& a, int index) {
  if (a.ndim() != 1) throw std::invalid_argument("pick: expected vector, got shape " + shape_str(a.shape()));
  if (index < 0 || index >= a.dim(0))
    throw std::invalid_argument("pick: index " + std::to_string(index) + " out of bounds for shape " +
                                shape_str(a.shape()));
  Tensor out = Tensor::scalar(a.data()[static_cast<std::size_t>(index)]);
  auto ai = a.impl(), oi = out.impl();
  push("pick", {a}, out, [ai, oi, index] {
    ensure_grad(ai.get());
    ai->grad[static_cast<std::size_t>(index)] += oi->grad[0];
  });
  return out;
}

Tensor Tape::logsumexp(const Tensor& a) {
  if (a.ndim() != 1) throw std::invalid_argument("logsumexp: expected vector, got shape " + shape_str(a.shape()));
  double mx = a.data()[0];
  for (double v : a.data()) mx = std::max(mx, v);
  double acc = 0.0;
  for (double v : a.data()) acc += std::exp(v - mx);
  Tensor out = Tensor::scalar(mx + std::log(acc));
  auto ai = a.impl(), oi = out.impl();
  push("logsumexp", {a}, out, [ai, oi] {
    ensure_grad(ai.get());
    const double y = oi->data[0];
    const double g = oi->grad[0];
    for (std::size_t i = 0; i < ai->data.size(); ++i) ai->grad[i] += g * std::exp(ai->data[i] - y);
  });
  return out;
}

namespace {

// softmax of one contiguous strided slice, max-subtracted
void softmax_slice(const double* x, double* y, int n, int stride) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i * stride]);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    y[i * stride] = std::exp(x[i * stride] - mx);
    acc += y[i * stride];
  }
  for (int i = 0; i < n; ++i) y[i * stride] /= acc;
}

void softmax_slice_backward(const double* y, const double* gy, double* gx, int n, int stride) {
  double dot = 0.0;
  for (int i = 0; i < n; ++i) dot += gy[i * stride] * y[i * stride];
  for (int i = 0; i < n; ++i) gx[i * stride] += (gy[i * stride] - dot) * y[i * stride];
}

}  // namespace

Tensor Tape::softmax(const Tensor& a, int axis) {
  if (a.ndim() == 1) {
    if (axis != 0) throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(a.shape()));
    Tensor out = make(a.shape());
    softmax_slice(a.data().data(), out.data().data(), a.dim(0), 1);
    auto ai = a.impl(), oi = out.impl();
    const int n = a.dim(0);
    push("softmax", {a}, out, [ai, oi, n] {
      ensure_grad(ai.get());
      softmax_slice_backward(oi->data.data(), oi->grad.data(), ai->grad.data(), n, 1);
    });
    return out;
  }
  if (a.ndim() == 2) {
    if (axis != 0 && axis != 1)
      throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = make(a.shape());
    if (axis == 1) {
      for (int i = 0; i < m; ++i)
        softmax_slice(a.data().data() + static_cast<std::size_t>(i) * n, out.data().data() + static_cast<std::size_t>(i) * n, n, 1);
    } else {
      for (int j = 0; j < n; ++j) softmax_slice(a.data().data() + j, out.data().data() + j, m, n);
    }
    auto ai = a.impl(), oi = out.impl();
    push("softmax", {a}, out, [ai, oi, m, n, axis] {
      ensure_grad(ai.get());
      if (axis == 1) {
        for (int i = 0; i < m; ++i)
          softmax_slice_backward(oi->data.data() + static_cast<std::size_t>(i) * n,
                                 oi->grad.data() + static_cast<std::size_t>(i) * n,
                                 ai->grad.data() + static_cast<std::size_t>(i) * n, n, 1);
      } else {
        for (int j = 0; j < n; ++j)
          softmax_slice_backward(oi->data.data() + j, oi->grad.data() + j, ai->grad.data() + j, m, n);
      }
    });
    return out;
  }
  throw std::invalid_argument("softmax: unsupported rank for shape " + shape_str(a.shape()));
}

Tensor Tape::norm_l1(const Tensor& a) {
  if (a.ndim() != 1) throw std::invalid_argument("norm_l1: expected vector, got shape " + shape_str(a.shape()));
  const int n = a.dim(0);
  double s = 0.0;
  for (double v : a.data()) {
    if (v < -1e-12) throw std::invalid_argument("norm_l1: negative weight " + std::to_string(v));
    s += v;
  }
  if (s < 1e-12) {
    // Degenerate mass: uniform fallback, treated as a constant.
    return Tensor::full({n}, 1.0 / n);
  }
  if (std::abs(s - 1.0) <= 1e-9) {
    // Already normalized; pass through so unit-mass inputs are bit-stable.
    Tensor out = Tensor::from(a.shape(), a.data());
    auto ai = a.impl(), oi = out.impl();
    push("norm_l1", {a}, out, [ai, oi] {
      ensure_grad(ai.get());
      for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
    });
    return out;
  }
  Tensor out = make(a.shape());
  for (int i = 0; i < n; ++i) out.data()[static_cast<std::size_t>(i)] = a.data()[static_cast<std::size_t>(i)] / s;
  auto ai = a.impl(), oi = out.impl();
  push("norm_l1", {a}, out, [ai, oi, s] {
    ensure_grad(ai.get());
    double dot = 0.0;
    for (std::size_t i = 0; i < oi->grad.size(); ++i) dot += oi->grad[i] * oi->data[i];
    for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += (oi->grad[i] - dot) / s;
  });
  return out;
}

Tensor Tape::scatter_edges(const Tensor& values, const std::vector<std::pair<int, int>>& edges, int n) {
  if (values.ndim() != 1 || values.dim(0) != static_cast<int>(edges.size()))
    throw std::invalid_argument("scatter_edges: values shape " + shape_str(values.shape()) + " does not match " +
                                std::to_string(edges.size()) + " edges");
  for (const auto& [i, j] : edges)
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw std::invalid_argument("scatter_edges: edge (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") out of range for n=" + std::to_string(n));
  Tensor out = make({n, n});
  for (std::size_t e = 0; e < edges.size(); ++e)
    out.data()[static_cast<std::size_t>(edges[e].first) * n + edges[e].second] += values.data()[e];
  auto vi = values.impl(), oi = out.impl();
  auto edge_copy = edges;
  push("scatter_edges", {values}, out, [vi, oi, edge_copy, n] {
    ensure_grad(vi.get());
    for (std::size_t e = 0; e < edge_copy.size(); ++e)
      vi->grad[e] += oi->grad[static_cast<std::size_t>(edge_copy[e].first) * n + edge_copy[e].second];
  });
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar");
  if (records_.empty()) throw std::invalid_argument("backward: empty tape");
  auto it = ids_.find(loss.impl().get());
  if (it == ids_.end()) throw std::invalid_argument("backward: loss was not computed on this tape");
  for (const auto& node : nodes_) node->grad.assign(node->data.size(), 0.0);
  loss.impl()->grad[0] = 1.0;
  for (auto rec = records_.rbegin(); rec != records_.rend(); ++rec) rec->back();
}

Tensor fuse(Tape& tp, const Tensor& x, const Tensor& y) {
  require_same_shape("fuse", x, y);
  Tensor d = tp.sub(x, y);
  return tp.sub(tp.relu(tp.add(x, y)), tp.mul(d, d));
}

Tensor init_param(Shape shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Mlp make_mlp(const std::vector<int>& dims, Rng& rng, Activation hidden) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    mlp.weights.push_back(init_param({dims[l + 1], dims[l]}, dims[l], rng));
    mlp.biases.push_back(init_param({dims[l + 1]}, dims[l], rng));
    if (l + 2 < dims.size()) mlp.hidden_activations.push_back(hidden);
  }
  return mlp;
}

Tensor mlp_forward(Tape& tp, const Mlp& mlp, const Tensor& x) {
  if (mlp.weights.empty()) throw std::invalid_argument("mlp_forward: empty mlp");
  if (mlp.weights.size() != mlp.biases.size() || mlp.hidden_activations.size() + 1 != mlp.weights.size())
    throw std::invalid_argument("mlp_forward: inconsistent layer inventory");
  for (std::size_t l = 0; l + 1 < mlp.weights.size(); ++l)
    if (mlp.weights[l + 1].dim(1) != mlp.weights[l].dim(0))
      throw std::invalid_argument("mlp_forward: layer " + std::to_string(l + 1) + " expects input " +
                                  std::to_string(mlp.weights[l + 1].dim(1)) + ", got " +
                                  std::to_string(mlp.weights[l].dim(0)));
  Tensor h = x;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    const Tensor& w = mlp.weights[l];
    const Tensor& b = mlp.biases[l];
    if (h.ndim() == 1) {
      if (h.dim(0) != w.dim(1))
        throw std::invalid_argument("mlp_forward: input dim " + std::to_string(h.dim(0)) + " does not match layer " +
                                    std::to_string(l) + " fan-in " + std::to_string(w.dim(1)));
      h = tp.add(tp.matmul(w, h), b);
    } else if (h.ndim() == 2) {
      if (h.dim(1) != w.dim(1))
        throw std::invalid_argument("mlp_forward: input dim " + std::to_string(h.dim(1)) + " does not match layer " +
                                    std::to_string(l) + " fan-in " + std::to_string(w.dim(1)));
      h = tp.add(tp.matmul(h, tp.transpose(w)), tp.tile_rows(b, h.dim(0)));
    } else {
      throw std::invalid_argument("mlp_forward: unsupported input shape " + shape_str(h.shape()));
    }
    if (l + 1 < mlp.weights.size()) {
      switch (mlp.hidden_activations[l]) {
        case Activation::kNone: break;
        case Activation::kRelu: h = tp.relu(h); break;
        case Activation::kTanh: h = tp.tanh(h); break;
      }
    }
  }
  return h;
}

std::vector<Tensor> mlp_params(Mlp& mlp) {
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    out.push_back(mlp.weights[l]);
    out.push_back(mlp.biases[l]);
  }
  return out;
}

namespace {

void compare_grads(const std::vector<double>& analytic, const std::vector<double>& numeric,
                   double tol, GradCheckReport* report) {
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], nu = numeric[i];
    double err;
    if (std::abs(a) < 1e-6) {
      err = std::abs(a - nu);
    } else {
      err = std::abs(a - nu) / std::max(std::abs(a), std::abs(nu));
    }
    if (err > report->max_err) {
      report->max_err = err;
      report->worst_index = static_cast<int>(i);
      report->worst_analytic = a;
      report->worst_numeric = nu;
    }
  }
  report->pass = report->max_err < tol;
}

}  // namespace

GradCheckReport grad_check(const TensorFn& f, const Tensor& x, double eps, double tol) {
  auto eval = [&](const Tensor& point) {
    Tape tp;
    Tensor y = f(tp, point);
    if (!y.defined() || y.numel() != 1) throw std::invalid_argument("grad_check: f must be scalar-valued");
    return y.value();
  };
  const double v0 = eval(x);
  const double v1 = eval(x);
  if (std::memcmp(&v0, &v1, sizeof(double)) != 0)
    throw std::runtime_error("grad_check: f is not deterministic (two forward passes disagree)");

  Tape tp;
  Tensor y = f(tp, x);
  tp.backward(y);
  std::vector<double> analytic = x.grad();

  std::vector<double> numeric(x.data().size(), 0.0);
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    Tensor xp = Tensor::from(x.shape(), x.data());
    xp.data()[i] += eps;
    const double fp = eval(xp);
    xp.data()[i] -= 2.0 * eps;
    const double fm = eval(xp);
    numeric[i] = (fp - fm) / (2.0 * eps);
  }

  GradCheckReport report;
  if (analytic.empty()) analytic.assign(x.data().size(), 0.0);
  compare_grads(analytic, numeric, tol, &report);
  return report;
}

GradCheckReport grad_check_params(const std::function<Tensor(Tape&)>& loss_fn,
                                  const std::vector<Tensor>& params, double eps, double tol) {
  auto eval = [&] {
    Tape tp;
    Tensor y = loss_fn(tp);
    if (!y.defined() || y.numel() != 1) throw std::invalid_argument("grad_check_params: loss must be scalar");
    return y.value();
  };
  const double v0 = eval();
  const double v1 = eval();
  if (std::memcmp(&v0, &v1, sizeof(double)) != 0)
    throw std::runtime_error("grad_check_params: loss is not deterministic (two forward passes disagree)");

  Tape tp;
  Tensor y = loss_fn(tp);
  tp.backward(y);

  GradCheckReport report;
  report.pass = true;
  for (const Tensor& p : params) {
    std::vector<double> analytic = p.grad();
    if (analytic.empty()) analytic.assign(p.data().size(), 0.0);
    std::vector<double> numeric(p.data().size(), 0.0);
    auto& data = const_cast<Tensor&>(p).data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + eps;
      const double fp = eval();
      data[i] = orig - eps;
      const double fm = eval();
      data[i] = orig;
      numeric[i] = (fp - fm) / (2.0 * eps);
    }
    compare_grads(analytic, numeric, tol, &report);
  }
  report.pass = report.max_err < tol;
  return report;
}

}  // namespace gmn
