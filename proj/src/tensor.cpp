// Copyright 2026 The RawTFNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "rawtfnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rawtfnet/errors.hpp"

namespace rawtfnet {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {

void check_dims(const Shape& shape) {
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_str(shape));
}

// Row-major strides.
std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (shape_size(shape_) != data_.size())
    throw DimensionError("shape " + shape_str(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  require_finite(*this, "Tensor construction");
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape_));
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size())
    throw DimensionError("index rank mismatch for " + shape_str(shape_));
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw DimensionError("index out of range for " + shape_str(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }
double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string("non-finite value in ") + what);
}

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  const bool scalar = b.size() == 1;
  if (!scalar && a.shape() != b.shape())
    throw DimensionError("elementwise shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double rhs = scalar ? y[0] : y[i];
    switch (op) {
      case BinaryOp::add: z[i] = x[i] + rhs; break;
      case BinaryOp::sub: z[i] = x[i] - rhs; break;
      case BinaryOp::mul: z[i] = x[i] * rhs; break;
    }
  }
  debug_check_finite(out, "elementwise");
  return out;
}

Tensor reduce_mean(const Tensor& x, const std::vector<std::size_t>& axes, bool keep_dims) {
  std::vector<bool> reduced(x.rank(), false);
  for (auto a : axes) {
    if (a >= x.rank())
      throw DimensionError("reduce_mean axis " + std::to_string(a) + " out of range for " +
                           shape_str(x.shape()));
    reduced[a] = true;
  }
  Shape kept(x.shape());
  std::size_t count = 1;
  for (std::size_t a = 0; a < x.rank(); ++a)
    if (reduced[a]) {
      count *= kept[a];
      kept[a] = 1;
    }
  Tensor sums(kept);
  const auto in_strides = strides_of(x.shape());
  const auto out_strides = strides_of(kept);
  auto src = x.data();
  auto dst = sums.data();
  // Walk the input once, mapping each flat index to its reduced slot.
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::size_t rem = i;
    std::size_t o = 0;
    for (std::size_t a = 0; a < x.rank(); ++a) {
      const std::size_t idx = rem / in_strides[a];
      rem %= in_strides[a];
      if (!reduced[a]) o += idx * out_strides[a];
    }
    dst[o] += src[i];
  }
  for (auto& v : dst) v /= static_cast<double>(count);
  if (keep_dims) return sums;
  Shape squeezed;
  for (std::size_t a = 0; a < x.rank(); ++a)
    if (!reduced[a]) squeezed.push_back(x.shape()[a]);
  if (squeezed.empty()) squeezed.push_back(1);
  return reshape(sums, squeezed);
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_size(new_shape) != x.size())
    throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " +
                         shape_str(new_shape));
  return Tensor(std::move(new_shape), x.vec());
}

Tensor transpose(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  if (perm.size() != r) throw DimensionError("permutation rank mismatch");
  std::vector<bool> seen(r, false);
  for (auto p : perm) {
    if (p >= r || seen[p]) throw DimensionError("axis permutation is not a bijection");
    seen[p] = true;
  }
  Shape out_shape(r);
  for (std::size_t a = 0; a < r; ++a) out_shape[a] = x.shape()[perm[a]];
  Tensor out(out_shape);
  const auto in_strides = strides_of(x.shape());
  const auto out_strides = strides_of(out_shape);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t o = 0; o < dst.size(); ++o) {
    std::size_t rem = o;
    std::size_t i = 0;
    for (std::size_t a = 0; a < r; ++a) {
      i += (rem / out_strides[a]) * in_strides[perm[a]];
      rem %= out_strides[a];
    }
    dst[o] = src[i];
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) throw DimensionError("concat rank mismatch");
    for (std::size_t a = 0; a < first.size(); ++a)
      if (a != axis && p.shape()[a] != first[a])
        throw DimensionError("concat shape mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(first));
    out_shape[axis] += p.shape()[axis];
  }
  std::size_t outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= first[a];
  std::size_t inner = 1;
  for (std::size_t a = axis + 1; a < first.size(); ++a) inner *= first[a];
  Tensor out(out_shape);
  auto dst = out.data();
  std::size_t pos = 0;
  for (std::size_t o = 0; o < outer; ++o)
    for (const auto& p : parts) {
      const std::size_t chunk = p.shape()[axis] * inner;
      auto src = p.data().subspan(o * chunk, chunk);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += chunk;
    }
  return out;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank() || begin >= end || end > x.shape()[axis])
    throw DimensionError("invalid slice of " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  std::size_t outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.shape()[a];
  std::size_t inner = 1;
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.shape()[a];
  Tensor out(out_shape);
  auto src = x.data();
  auto dst = out.data();
  const std::size_t in_chunk = x.shape()[axis] * inner;
  const std::size_t out_chunk = (end - begin) * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * in_chunk + begin * inner),
                out_chunk, dst.begin() + static_cast<std::ptrdiff_t>(o * out_chunk));
  return out;
}

double sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw DimensionError("dot size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("max_abs_diff shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("non-finite function value at coordinate " + std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double Rng::normal() {
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ConfigError("Rng::below(0)");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

Tensor random_uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor random_normal(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

}  // namespace rawtfnet
