#pragma once

#include <deque>
#include <stdexcept>
#include <string>
#include <utility>

#include "hiasa/ndcore/tensor.hpp"

namespace hiasa::nd {

/// Named trainable tensors in registration order. Addresses are stable, so
/// graphs may hold references across steps.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  ParameterStore() = default;
  ParameterStore(const ParameterStore& other) : entries_(other.entries_) {}
  ParameterStore& operator=(const ParameterStore& other) {
    entries_ = other.entries_;
    return *this;
  }
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Tensor& add(std::string name, Tensor value) {
    if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter '" + name + "'");
    value.set_requires_grad(true);
    entries_.push_back({std::move(name), std::move(value)});
    return entries_.back().tensor;
  }

  Tensor* find(const std::string& name) {
    for (auto& e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }
  const Tensor* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }
  Tensor& at(const std::string& name) {
    if (auto* t = find(name)) return *t;
    throw std::out_of_range("no parameter named '" + name + "'");
  }
  const Tensor& at(const std::string& name) const {
    if (const auto* t = find(name)) return *t;
    throw std::out_of_range("no parameter named '" + name + "'");
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

  /// Copies values (not gradients) from a store with identical layout.
  void assign_values(const ParameterStore& other) {
    if (other.entries_.size() != entries_.size())
      throw std::invalid_argument("parameter layout mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name != other.entries_[i].name ||
          entries_[i].tensor.shape() != other.entries_[i].tensor.shape())
        throw std::invalid_argument("parameter layout mismatch at '" + entries_[i].name + "'");
      entries_[i].tensor.buffer() = other.entries_[i].tensor.buffer();
    }
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::deque<Entry> entries_;
};

}  // namespace hiasa::nd
