#pragma once

// Dense row-major tables of probabilities. A conditional table
// p(v | c1, c2, ...) stores the conditioning indices first and the variable
// index last, so every last-axis slice is one distribution over the variable.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace genclass {

using Categorical = std::vector<double>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log p with log 0 = -inf (absorbing under addition).
inline double log_safe(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

class Table {
 public:
  Table() = default;

  explicit Table(std::vector<int> shape, double fill = 0.0)
      : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw std::invalid_argument("Table: axis extent must be positive");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, fill);
  }

  bool empty() const { return data_.empty(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  int last_extent() const { return shape_.back(); }

  template <class... I>
  double operator()(I... idx) const {
    return data_[offset(idx...)];
  }
  template <class... I>
  double& operator()(I... idx) {
    return data_[offset(idx...)];
  }

  // Last-axis slice addressed by the leading (conditioning) indices.
  std::span<const double> slice(std::span<const int> prefix) const {
    return {data_.data() + slice_offset(prefix), static_cast<std::size_t>(last_extent())};
  }
  std::span<double> slice(std::span<const int> prefix) {
    return {data_.data() + slice_offset(prefix), static_cast<std::size_t>(last_extent())};
  }
  std::span<const double> slice(std::initializer_list<int> prefix) const {
    return slice(std::span<const int>(prefix.begin(), prefix.size()));
  }
  std::span<double> slice(std::initializer_list<int> prefix) {
    return slice(std::span<const int>(prefix.begin(), prefix.size()));
  }

  std::size_t num_slices() const {
    return empty() ? 0 : data_.size() / static_cast<std::size_t>(last_extent());
  }
  std::span<const double> slice_at(std::size_t i) const {
    const auto w = static_cast<std::size_t>(last_extent());
    return {data_.data() + i * w, w};
  }
  std::span<double> slice_at(std::size_t i) {
    const auto w = static_cast<std::size_t>(last_extent());
    return {data_.data() + i * w, w};
  }

  // Leading indices of slice i, outermost first.
  std::vector<int> slice_index(std::size_t i) const {
    std::vector<int> idx(shape_.size() - 1);
    for (int axis = rank() - 2; axis >= 0; --axis) {
      const auto d = static_cast<std::size_t>(shape_[static_cast<std::size_t>(axis)]);
      idx[static_cast<std::size_t>(axis)] = static_cast<int>(i % d);
      i /= d;
    }
    return idx;
  }

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  friend bool operator==(const Table& a, const Table& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  template <class... I>
  std::size_t offset(I... idx) const {
    assert(sizeof...(I) == shape_.size());
    std::size_t off = 0;
    std::size_t axis = 0;
    ((off = off * static_cast<std::size_t>(shape_[axis++]) + static_cast<std::size_t>(idx)), ...);
    return off;
  }

  std::size_t slice_offset(std::span<const int> prefix) const {
    assert(prefix.size() + 1 == shape_.size());
    std::size_t off = 0;
    for (std::size_t axis = 0; axis < prefix.size(); ++axis) {
      assert(prefix[axis] >= 0 && prefix[axis] < shape_[axis]);
      off = off * static_cast<std::size_t>(shape_[axis]) + static_cast<std::size_t>(prefix[axis]);
    }
    return off * static_cast<std::size_t>(last_extent());
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

inline double sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

inline bool is_distribution(std::span<const double> p, double tol = 1e-9) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) return false;  // also rejects NaN
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

// Scales p to unit sum; returns false (leaving p untouched) if the sum is
// zero or not finite.
inline bool normalize(std::span<double> p) {
  double s = sum(p);
  if (!(s > 0.0) || !std::isfinite(s)) return false;
  for (double& x : p) x /= s;
  return true;
}

}  // namespace genclass
