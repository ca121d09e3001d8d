#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "drifa/error.hpp"

namespace drifa {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Grad mode.  Inference paths disable graph recording to keep forward passes
// cheap; anything built under a NoGradGuard is a plain constant.
// ---------------------------------------------------------------------------

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_mode_flag(); }

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// ---------------------------------------------------------------------------
// Tensor node: dense row-major storage plus a reverse-mode tape.  Ops link
// result nodes to their parents and record a closure that scatters the
// result's gradient back into the parents' gradients.
// ---------------------------------------------------------------------------

template <typename T>
class TensorNode;

template <typename T>
using Tensor = std::shared_ptr<TensorNode<T>>;

template <typename T>
class TensorNode {
 public:
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<Tensor<T>> parents;
  std::function<void(TensorNode<T>&)> backward_fn;
  bool consumed = false;  // set once a backward pass has released this node

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
  }
  void zero_grad() { grad.assign(values.size(), T(0)); }
};

namespace detail {

template <typename T>
void check_finite(const TensorNode<T>& t, const char* op) {
#ifdef DRIFA_CHECK_FINITE
  for (const T& v : t.values) {
    if (!std::isfinite(static_cast<double>(v)))
      fail(ErrorKind::NonFinite, std::string(op) + ": produced a non-finite value");
  }
#else
  (void)t;
  (void)op;
#endif
}

// Builds a node; the graph edge and backward closure are dropped when no
// parent wants gradients or grad mode is off, so inference builds no tape.
template <typename T>
Tensor<T> make_node(Shape shape, std::vector<T> values, std::vector<Tensor<T>> parents,
                    std::function<void(TensorNode<T>&)> backward, const char* op) {
  auto t = std::make_shared<TensorNode<T>>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  if (t->values.size() != shape_size(t->shape))
    fail(ErrorKind::Internal, std::string(op) + ": value count does not match shape");
  if (grad_enabled()) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    if (rg) {
      t->requires_grad = true;
      t->parents = std::move(parents);
      t->backward_fn = std::move(backward);
    }
  }
  check_finite(*t, op);
  return t;
}

inline bool broadcast_compatible(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (b[i] != a[i] && b[i] != 1) return false;
  return true;
}

// Walks the index space of `a` while tracking the flat index into `b`, where
// `b` has stride 0 on its broadcast (size-1) axes.
class BroadcastMap {
 public:
  BroadcastMap(const Shape& a, const Shape& b) : a_(a) {
    const std::size_t rank = a.size();
    idx_.assign(rank, 0);
    bstride_.assign(rank, 0);
    std::size_t s = 1;
    for (std::size_t i = rank; i-- > 0;) {
      bstride_[i] = (b[i] == 1) ? 0 : s;
      s *= b[i];
    }
  }

  std::size_t b_index() const { return bflat_; }

  void advance() {
    for (std::size_t ax = a_.size(); ax-- > 0;) {
      ++idx_[ax];
      bflat_ += bstride_[ax];
      if (idx_[ax] < a_[ax]) return;
      bflat_ -= bstride_[ax] * a_[ax];
      idx_[ax] = 0;
    }
  }

 private:
  const Shape& a_;
  std::vector<std::size_t> idx_;
  std::vector<std::size_t> bstride_;
  std::size_t bflat_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
  if (values.size() != shape_size(shape))
    fail(ErrorKind::ShapeMismatch,
         "make_tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
  auto t = std::make_shared<TensorNode<T>>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

template <typename T>
Tensor<T> full(Shape shape, T value, bool requires_grad = false) {
  return make_tensor<T>(std::move(shape), std::vector<T>(shape_size(shape), value), requires_grad);
}

template <typename T>
Tensor<T> zeros(Shape shape, bool requires_grad = false) {
  return full<T>(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> ones(Shape shape, bool requires_grad = false) {
  return full<T>(std::move(shape), T(1), requires_grad);
}

template <typename T>
Tensor<T> scalar_tensor(T value) {
  return make_tensor<T>({1}, {value});
}

// ---------------------------------------------------------------------------
// Elementwise ops with same-rank broadcasting (size-1 axes of b expand to a).
// ---------------------------------------------------------------------------

namespace detail {

enum class EwKind { Add, Sub, Mul };

template <typename T>
Tensor<T> elementwise(EwKind kind, const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!broadcast_compatible(a->shape, b->shape))
    fail(ErrorKind::ShapeMismatch, std::string(op) + ": " + shape_str(b->shape) +
                                       " does not broadcast to " + shape_str(a->shape));
  const std::size_t n = a->size();
  std::vector<T> out(n);
  const bool same = a->shape == b->shape;
  const T* av = a->values.data();
  const T* bv = b->values.data();
  auto apply = [kind](T x, T y) {
    switch (kind) {
      case EwKind::Add: return x + y;
      case EwKind::Sub: return x - y;
      default: return x * y;
    }
  };
  if (same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = apply(av[i], bv[i]);
  } else {
    BroadcastMap map(a->shape, b->shape);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = apply(av[i], bv[map.b_index()]);
      map.advance();
    }
  }
  auto bw = [kind, same](TensorNode<T>& self) {
    TensorNode<T>& pa = *self.parents[0];
    TensorNode<T>& pb = *self.parents[1];
    const bool ar = pa.requires_grad;
    const bool br = pb.requires_grad;
    const std::size_t n = self.size();
    const T* g = self.grad.data();
    if (same) {
      for (std::size_t i = 0; i < n; ++i) {
        switch (kind) {
          case EwKind::Add:
            if (ar) pa.grad[i] += g[i];
            if (br) pb.grad[i] += g[i];
            break;
          case EwKind::Sub:
            if (ar) pa.grad[i] += g[i];
            if (br) pb.grad[i] -= g[i];
            break;
          case EwKind::Mul:
            if (ar) pa.grad[i] += g[i] * pb.values[i];
            if (br) pb.grad[i] += g[i] * pa.values[i];
            break;
        }
      }
    } else {
      BroadcastMap map(pa.shape, pb.shape);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t bi = map.b_index();
        switch (kind) {
          case EwKind::Add:
            if (ar) pa.grad[i] += g[i];
            if (br) pb.grad[bi] += g[i];
            break;
          case EwKind::Sub:
            if (ar) pa.grad[i] += g[i];
            if (br) pb.grad[bi] -= g[i];
            break;
          case EwKind::Mul:
            if (ar) pa.grad[i] += g[i] * pb.values[bi];
            if (br) pb.grad[bi] += g[i] * pa.values[i];
            break;
        }
        map.advance();
      }
    }
  };
  return make_node<T>(a->shape, std::move(out), {a, b}, std::move(bw), op);
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::elementwise(detail::EwKind::Add, a, b, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::elementwise(detail::EwKind::Sub, a, b, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::elementwise(detail::EwKind::Mul, a, b, "mul");
}

// Multiply by a single learnable scalar (any shape holding exactly one value).
template <typename T>
Tensor<T> scale(const Tensor<T>& x, const Tensor<T>& s) {
  if (s->size() != 1)
    fail(ErrorKind::ShapeMismatch, "scale: scalar operand has shape " + shape_str(s->shape));
  const std::size_t n = x->size();
  const T sv = s->values[0];
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x->values[i] * sv;
  auto bw = [](TensorNode<T>& self) {
    TensorNode<T>& px = *self.parents[0];
    TensorNode<T>& ps = *self.parents[1];
    const std::size_t n = self.size();
    const T sv = ps.values[0];
    if (px.requires_grad)
      for (std::size_t i = 0; i < n; ++i) px.grad[i] += self.grad[i] * sv;
    if (ps.requires_grad) {
      T acc = T(0);
      for (std::size_t i = 0; i < n; ++i) acc += self.grad[i] * px.values[i];
      ps.grad[0] += acc;
    }
  };
  return detail::make_node<T>(x->shape, std::move(out), {x, s}, std::move(bw), "scale");
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
  if (shape_size(new_shape) != x->size())
    fail(ErrorKind::ShapeMismatch,
         "reshape: " + shape_str(x->shape) + " to " + shape_str(new_shape));
  std::vector<T> out = x->values;
  auto bw = [](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i) p.grad[i] += self.grad[i];
  };
  return detail::make_node<T>(std::move(new_shape), std::move(out), {x}, std::move(bw), "reshape");
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorKind::ShapeMismatch, "concat: no inputs");
  const Shape& base = parts[0]->shape;
  if (axis >= base.size()) fail(ErrorKind::ShapeMismatch, "concat: axis out of range");
  std::size_t axis_total = 0;
  for (const auto& p : parts) {
    if (p->rank() != base.size())
      fail(ErrorKind::ShapeMismatch, "concat: rank mismatch");
    for (std::size_t i = 0; i < base.size(); ++i)
      if (i != axis && p->shape[i] != base[i])
        fail(ErrorKind::ShapeMismatch, "concat: " + shape_str(p->shape) + " vs " + shape_str(base));
    axis_total += p->shape[axis];
  }
  Shape out_shape = base;
  out_shape[axis] = axis_total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= base[i];
  for (std::size_t i = axis + 1; i < base.size(); ++i) inner *= base[i];

  std::vector<T> out(shape_size(out_shape));
  const std::size_t out_block = axis_total * inner;
  std::size_t offset = 0;
  std::vector<std::size_t> blocks;
  blocks.reserve(parts.size());
  for (const auto& p : parts) {
    const std::size_t block = p->shape[axis] * inner;
    blocks.push_back(block);
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p->values.data() + o * block, block, out.data() + o * out_block + offset);
    offset += block;
  }
  auto bw = [blocks, outer, inner, axis_total](TensorNode<T>& self) {
    const std::size_t out_block = axis_total * inner;
    std::size_t offset = 0;
    for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
      TensorNode<T>& p = *self.parents[pi];
      const std::size_t block = blocks[pi];
      if (p.requires_grad) {
        for (std::size_t o = 0; o < outer; ++o) {
          const T* g = self.grad.data() + o * out_block + offset;
          T* pg = p.grad.data() + o * block;
          for (std::size_t i = 0; i < block; ++i) pg[i] += g[i];
        }
      }
      offset += block;
    }
  };
  std::vector<Tensor<T>> parents(parts.begin(), parts.end());
  return detail::make_node<T>(std::move(out_shape), std::move(out), std::move(parents),
                              std::move(bw), "concat");
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x->rank()) fail(ErrorKind::ShapeMismatch, "slice: axis out of range");
  if (length == 0 || start + length > x->shape[axis])
    fail(ErrorKind::ShapeMismatch, "slice: range [" + std::to_string(start) + "," +
                                       std::to_string(start + length) + ") exceeds axis size " +
                                       std::to_string(x->shape[axis]));
  Shape out_shape = x->shape;
  out_shape[axis] = length;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x->shape[i];
  for (std::size_t i = axis + 1; i < x->rank(); ++i) inner *= x->shape[i];
  const std::size_t in_block = x->shape[axis] * inner;
  const std::size_t out_block = length * inner;

  std::vector<T> out(shape_size(out_shape));
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(x->values.data() + o * in_block + start * inner, out_block,
                out.data() + o * out_block);
  auto bw = [outer, inner, in_block, out_block, start](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t o = 0; o < outer; ++o) {
      const T* g = self.grad.data() + o * out_block;
      T* pg = p.grad.data() + o * in_block + start * inner;
      for (std::size_t i = 0; i < out_block; ++i) pg[i] += g[i];
    }
  };
  return detail::make_node<T>(std::move(out_shape), std::move(out), {x}, std::move(bw), "slice");
}

// Sum of all elements, as a rank-1 scalar tensor.
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x) {
  T acc = T(0);
  for (const T& v : x->values) acc += v;
  auto bw = [](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    const T g = self.grad[0];
    for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] += g;
  };
  return detail::make_node<T>({1}, {acc}, {x}, std::move(bw), "reduce_sum");
}

// ---------------------------------------------------------------------------
// Backward pass: iterative reverse-topological sweep from a scalar loss.
// Nodes are single-use; a second backward over any part of the same graph
// raises GraphConsumed instead of silently producing wrong gradients.
// ---------------------------------------------------------------------------

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss->size() != 1)
    fail(ErrorKind::ShapeMismatch, "backward: loss must be scalar, got " + shape_str(loss->shape));
  if (!loss->requires_grad)
    fail(ErrorKind::MissingGrad, "backward: loss does not depend on any gradient-tracked tensor");

  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  struct Frame {
    TensorNode<T>* node;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get()});
  seen.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next == 0 && !f.node->parents.empty() && f.node->consumed)
      fail(ErrorKind::GraphConsumed, "backward: graph already consumed by a previous backward");
    if (f.next < f.node->parents.size()) {
      TensorNode<T>* child = f.node->parents[f.next++].get();
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.push_back({child});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* node = *it;
    node->ensure_grad();
    if (!node->backward_fn) continue;
    for (auto& p : node->parents)
      if (p->requires_grad) p->ensure_grad();
    node->backward_fn(*node);
    node->backward_fn = nullptr;
    node->consumed = true;
  }
}

}  // namespace drifa
