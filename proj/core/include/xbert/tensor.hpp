#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xbert/error.hpp"

namespace xbert {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// Dense row-major tensor.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{0}) : shape(std::move(s)), data(numel(shape), fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::span<T> span() noexcept { return data; }
  std::span<const T> span() const noexcept { return data; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Named tensors in a fixed insertion order.
template <typename T>
class ParameterSet {
 public:
  void add(std::string name, Tensor<T> t) {
    if (index_.count(name)) fail(ErrorCategory::kInternal, "duplicate parameter " + name);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(t));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<T>& at(const std::string& name) { return entries_[lookup(name)].second; }
  const Tensor<T>& at(const std::string& name) const { return entries_[lookup(name)].second; }

  std::size_t size() const noexcept { return entries_.size(); }
  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& [name, t] : entries_) out.add(name, Tensor<T>(t.shape));
    return out;
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<U>());
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.entries_ == b.entries_; }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCategory::kInternal, "no parameter named " + name);
    return it->second;
  }

  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// FNV-1a over the raw bytes of the tensor elements.
std::uint64_t hash_bytes(std::span<const std::byte> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;

template <typename T>
std::uint64_t tensor_hash(const Tensor<T>& t) noexcept {
  return hash_bytes(std::as_bytes(t.span()));
}

}  // namespace xbert
