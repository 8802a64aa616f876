// SPDX-License-Identifier: Apache-2.0
#include "midg/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "midg/errors.hpp"

namespace midg::ad {

namespace {

template <std::floating_point T>
void same_graph(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.valid() || !b.valid()) throw ContractError("op on an unbound tensor");
  if (&a.graph() != &b.graph()) throw ContractError("op inputs belong to different graphs");
}

// Index maps from each output element to the contributing element of a and b.
struct Broadcast {
  Shape out;
  bool trivial = true;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
};

std::shared_ptr<const Broadcast> broadcast(const Shape& a, const Shape& b, const char* op) {
  auto bc = std::make_shared<Broadcast>();
  if (a == b) {
    bc->out = a;
    return bc;
  }
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) +
                     " are not broadcast-compatible");
  }
  const std::size_t rank = a.size();
  bc->out.resize(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    if (a[k] == b[k] || b[k] == 1) {
      bc->out[k] = a[k];
    } else if (a[k] == 1) {
      bc->out[k] = b[k];
    } else {
      throw ShapeError(std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) +
                       " are not broadcast-compatible");
    }
  }
  bc->trivial = false;
  const std::size_t n = numel(bc->out);
  bc->ia.resize(n);
  bc->ib.resize(n);
  std::vector<std::size_t> sa(rank), sb(rank);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t k = rank; k-- > 0;) {
    sa[k] = a[k] == 1 ? 0 : stride_a;
    sb[k] = b[k] == 1 ? 0 : stride_b;
    stride_a *= a[k];
    stride_b *= b[k];
  }
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t k = 0; k < rank; ++k) {
      oa += idx[k] * sa[k];
      ob += idx[k] * sb[k];
    }
    bc->ia[i] = oa;
    bc->ib[i] = ob;
    for (std::size_t k = rank; k-- > 0;) {
      if (++idx[k] < bc->out[k]) break;
      idx[k] = 0;
    }
  }
  return bc;
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + to_string(shape));
  }
  AxisSplit s;
  for (std::size_t k = 0; k < axis; ++k) s.outer *= shape[k];
  s.extent = shape[axis];
  for (std::size_t k = axis + 1; k < shape.size(); ++k) s.inner *= shape[k];
  return s;
}

template <std::floating_point T, class Fwd, class Deriv>
Tensor<T> unary(const Tensor<T>& x, OpKind kind, Fwd fwd, Deriv deriv) {
  if (!x.valid()) throw ContractError("op on an unbound tensor");
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  // deriv(x, y) gives dy/dx from the input and output values.
  return x.graph().record(kind, x.shape(), std::move(out), {x.id()},
                          [deriv](typename Graph<T>::BackwardContext& ctx) {
                            const auto g = ctx.grad_out();
                            const auto xin = ctx.value_in(0);
                            const auto y = ctx.value_out();
                            auto gx = ctx.grad_in(0);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xin[i], y[i]);
                          });
}

enum class Binary { Add, Sub, Mul };

template <std::floating_point T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, Binary op) {
  same_graph(a, b);
  static constexpr const char* names[] = {"add", "sub", "mul"};
  auto bc = broadcast(a.shape(), b.shape(), names[static_cast<int>(op)]);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t n = numel(bc->out);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T x = av[bc->trivial ? i : bc->ia[i]];
    const T y = bv[bc->trivial ? i : bc->ib[i]];
    out[i] = op == Binary::Add ? x + y : op == Binary::Sub ? x - y : x * y;
  }
  const OpKind kind = op == Binary::Add ? OpKind::Add : op == Binary::Sub ? OpKind::Sub : OpKind::Mul;
  return a.graph().record(
      kind, bc->out, std::move(out), {a.id(), b.id()},
      [bc, op](typename Graph<T>::BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto av = ctx.value_in(0);
        const auto bv = ctx.value_in(1);
        auto ga = ctx.grad_in(0);
        auto gb = ctx.grad_in(1);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t ia = bc->trivial ? i : bc->ia[i];
          const std::size_t ib = bc->trivial ? i : bc->ib[i];
          switch (op) {
            case Binary::Add:
              ga[ia] += g[i];
              gb[ib] += g[i];
              break;
            case Binary::Sub:
              ga[ia] += g[i];
              gb[ib] -= g[i];
              break;
            case Binary::Mul:
              ga[ia] += g[i] * bv[ib];
              gb[ib] += g[i] * av[ia];
              break;
          }
        }
      });
}

template <std::floating_point T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <std::floating_point T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  same_graph(a, b);
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                     " do not agree");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      const T* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return a.graph().record(OpKind::MatMul, {m, n}, std::move(out), {a.id(), b.id()},
                          [m, k, n](typename Graph<T>::BackwardContext& ctx) {
                            const auto g = ctx.grad_out();
                            const auto av = ctx.value_in(0);
                            const auto bv = ctx.value_in(1);
                            // grad_a = g * b^T
                            auto ga = ctx.grad_in(0);
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t p = 0; p < k; ++p) {
                                T acc = T(0);
                                for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                                ga[i * k + p] += acc;
                              }
                            }
                            // grad_b = a^T * g
                            auto gb = ctx.grad_in(1);
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t p = 0; p < k; ++p) {
                                const T aip = av[i * k + p];
                                for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                              }
                            }
                          });
}

template <std::floating_point T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::Add);
}

template <std::floating_point T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::Sub);
}

template <std::floating_point T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::Mul);
}

template <std::floating_point T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, OpKind::Relu, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <std::floating_point T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, OpKind::Sigmoid, [](T v) { return stable_sigmoid(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <std::floating_point T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(
      x, OpKind::Tanh, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <std::floating_point T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(
      x, OpKind::Exp, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <std::floating_point T>
Tensor<T> log(const Tensor<T>& x) {
  if (!x.valid()) throw ContractError("op on an unbound tensor");
  for (T v : x.values()) {
    if (!(v > T(0))) throw ValueDomainError("log: input must be strictly positive, got " + std::to_string(v));
  }
  return unary(
      x, OpKind::Log, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <std::floating_point T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(
      x, OpKind::Square, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <std::floating_point T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(
      x, OpKind::Scale, [factor](T v) { return factor * v; }, [factor](T, T) { return factor; });
}

template <std::floating_point T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset) {
  return unary(
      x, OpKind::AddScalar, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <std::floating_point T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  if (!(lo <= hi)) throw ConfigError("clamp: lower bound exceeds upper bound");
  return unary(
      x, OpKind::Clamp, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <std::floating_point T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (!x.valid()) throw ContractError("op on an unbound tensor");
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < s.extent; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      T total = T(0);
      for (std::size_t j = 0; j < s.extent; ++j) {
        const T e = std::exp(xv[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] /= total;
    }
  }
  return x.graph().record(OpKind::Softmax, x.shape(), std::move(out), {x.id()},
                          [s](typename Graph<T>::BackwardContext& ctx) {
                            const auto g = ctx.grad_out();
                            const auto y = ctx.value_out();
                            auto gx = ctx.grad_in(0);
                            for (std::size_t o = 0; o < s.outer; ++o) {
                              for (std::size_t in = 0; in < s.inner; ++in) {
                                const std::size_t base = o * s.extent * s.inner + in;
                                T dot = T(0);
                                for (std::size_t j = 0; j < s.extent; ++j) {
                                  const std::size_t i = base + j * s.inner;
                                  dot += g[i] * y[i];
                                }
                                for (std::size_t j = 0; j < s.extent; ++j) {
                                  const std::size_t i = base + j * s.inner;
                                  gx[i] += y[i] * (g[i] - dot);
                                }
                              }
                            }
                          });
}

template <std::floating_point T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts[0].shape();
  split_axis(first, axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<NodeId> ids;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    same_graph(parts[0], p);
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t k = 0; ok && k < s.size(); ++k) ok = (k == axis) || s[k] == first[k];
    if (!ok) {
      throw ShapeError("concat: shape " + to_string(s) + " does not match " + to_string(first) +
                       " off axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
    ids.push_back(p.id());
    extents.push_back(s[axis]);
  }
  const AxisSplit os = split_axis(out_shape, axis, "concat");
  std::vector<T> out(numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    const std::size_t block = extents[p] * os.inner;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(v.begin() + o * block, block, out.begin() + o * os.extent * os.inner + offset);
    }
    offset += block;
  }
  return parts[0].graph().record(OpKind::Concat, out_shape, std::move(out), std::move(ids),
                                 [os, extents](typename Graph<T>::BackwardContext& ctx) {
                                   const auto g = ctx.grad_out();
                                   std::size_t offset = 0;
                                   for (std::size_t p = 0; p < extents.size(); ++p) {
                                     auto gp = ctx.grad_in(p);
                                     const std::size_t block = extents[p] * os.inner;
                                     for (std::size_t o = 0; o < os.outer; ++o) {
                                       const std::size_t src = o * os.extent * os.inner + offset;
                                       for (std::size_t i = 0; i < block; ++i) gp[o * block + i] += g[src + i];
                                     }
                                     offset += block;
                                   }
                                 });
}

template <std::floating_point T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (!x.valid()) throw ContractError("op on an unbound tensor");
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (begin >= end || end > s.extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for extent " + std::to_string(s.extent));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * s.inner;
  const auto xv = x.values();
  std::vector<T> out(s.outer * block);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + o * s.extent * s.inner + begin * s.inner, block, out.begin() + o * block);
  }
  return x.graph().record(OpKind::Slice, out_shape, std::move(out), {x.id()},
                          [s, begin, block](typename Graph<T>::BackwardContext& ctx) {
                            const auto g = ctx.grad_out();
                            auto gx = ctx.grad_in(0);
                            for (std::size_t o = 0; o < s.outer; ++o) {
                              const std::size_t dst = o * s.extent * s.inner + begin * s.inner;
                              for (std::size_t i = 0; i < block; ++i) gx[dst + i] += g[o * block + i];
                            }
                          });
}

namespace {

template <std::floating_point T>
Tensor<T> reduce_all(const Tensor<T>& x, bool average) {
  if (!x.valid()) throw ContractError("op on an unbound tensor");
  const auto xv = x.values();
  T total = T(0);
  for (T v : xv) total += v;
  const T factor = average ? T(1) / static_cast<T>(xv.size()) : T(1);
  return x.graph().record(average ? OpKind::Mean : OpKind::Sum, {1}, {total * factor}, {x.id()},
                          [factor](typename Graph<T>::BackwardContext& ctx) {
                            const T g = ctx.grad_out()[0] * factor;
                            for (T& v : ctx.grad_in(0)) v += g;
                          });
}

template <std::floating_point T>
Tensor<T> reduce_axis(const Tensor<T>& x, std::size_t axis, bool average) {
  if (!x.valid()) throw ContractError("op on an unbound tensor");
  const AxisSplit s = split_axis(x.shape(), axis, average ? "mean" : "sum");
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  const T factor = average ? T(1) / static_cast<T>(s.extent) : T(1);
  const auto xv = x.values();
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.extent; ++j) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        out[o * s.inner + in] += xv[(o * s.extent + j) * s.inner + in];
      }
    }
  }
  for (T& v : out) v *= factor;
  return x.graph().record(average ? OpKind::Mean : OpKind::Sum, out_shape, std::move(out), {x.id()},
                          [s, factor](typename Graph<T>::BackwardContext& ctx) {
                            const auto g = ctx.grad_out();
                            auto gx = ctx.grad_in(0);
                            for (std::size_t o = 0; o < s.outer; ++o) {
                              for (std::size_t j = 0; j < s.extent; ++j) {
                                for (std::size_t in = 0; in < s.inner; ++in) {
                                  gx[(o * s.extent + j) * s.inner + in] += g[o * s.inner + in] * factor;
                                }
                              }
                            }
                          });
}

}  // namespace

template <std::floating_point T>
Tensor<T> sum(const Tensor<T>& x) {
  return reduce_all(x, false);
}

template <std::floating_point T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis) {
  return reduce_axis(x, axis, false);
}

template <std::floating_point T>
Tensor<T> mean(const Tensor<T>& x) {
  return reduce_all(x, true);
}

template <std::floating_point T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis) {
  return reduce_axis(x, axis, true);
}

template <std::floating_point T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, CounterRng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const std::uint64_t stream = rng.claim_stream();
  const auto xv = x.values();
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(xv.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform(stream, i) < rate ? T(0) : keep_scale;
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  auto shared_mask = std::make_shared<const std::vector<T>>(std::move(mask));
  return x.graph().record(OpKind::Dropout, x.shape(), std::move(out), {x.id()},
                          [shared_mask](typename Graph<T>::BackwardContext& ctx) {
                            const auto g = ctx.grad_out();
                            auto gx = ctx.grad_in(0);
                            const auto& m = *shared_mask;
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * m[i];
                          });
}

template <std::floating_point T>
Tensor<T> grad_reverse(const Tensor<T>& x, T lambda) {
  if (!x.valid()) throw ContractError("op on an unbound tensor");
  if (!(lambda >= T(0))) throw ConfigError("grad_reverse: lambda must be nonnegative");
  const auto xv = x.values();
  return x.graph().record(OpKind::GradReverse, x.shape(), std::vector<T>(xv.begin(), xv.end()), {x.id()},
                          [lambda](typename Graph<T>::BackwardContext& ctx) {
                            const auto g = ctx.grad_out();
                            auto gx = ctx.grad_in(0);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += -lambda * g[i];
                          });
}

#define MIDG_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                  \
  template Tensor<T> tanh(const Tensor<T>&);                                                     \
  template Tensor<T> exp(const Tensor<T>&);                                                      \
  template Tensor<T> log(const Tensor<T>&);                                                      \
  template Tensor<T> square(const Tensor<T>&);                                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                            \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                              \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                            \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);             \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> sum(const Tensor<T>&, std::size_t);                                         \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> mean(const Tensor<T>&, std::size_t);                                        \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, CounterRng&);                       \
  template Tensor<T> grad_reverse(const Tensor<T>&, T);

MIDG_INSTANTIATE_OPS(float)
MIDG_INSTANTIATE_OPS(double)

#undef MIDG_INSTANTIATE_OPS

}  // namespace midg::ad
