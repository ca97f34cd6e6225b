#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ecechain/nn/tensor.hpp"

namespace ecechain::nn {

/// Named, insertion-ordered set of trainable tensors.
template <typename T>
class ParameterGroup {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    // Excluded from weight decay when false (layer-norm gains, biases).
    bool decay = true;
  };

  /// The returned reference is invalidated by later add() calls; copy the
  /// handle to keep it.
  Tensor<T>& add(std::string name, Tensor<T> tensor, bool decay = true);

  Tensor<T>& get(std::string_view name);
  const Tensor<T>& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::span<Entry> entries() { return entries_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Allocates and clears every gradient buffer so parameters that take no
  /// part in a graph still report a zero gradient.
  void zero_grad();

  std::size_t scalar_count() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

extern template class ParameterGroup<float>;
extern template class ParameterGroup<double>;

}  // namespace ecechain::nn
