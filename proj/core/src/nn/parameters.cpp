#include "ecechain/nn/parameters.hpp"

#include "ecechain/errors.hpp"

namespace ecechain::nn {

template <typename T>
Tensor<T>& ParameterGroup<T>::add(std::string name, Tensor<T> tensor, bool decay) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
  tensor.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(tensor), decay});
  return entries_.back().tensor;
}

template <typename T>
Tensor<T>& ParameterGroup<T>::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw IndexError("unknown parameter: " + std::string(name));
  return entries_[it->second].tensor;
}

template <typename T>
const Tensor<T>& ParameterGroup<T>::get(std::string_view name) const {
  return const_cast<ParameterGroup*>(this)->get(name);
}

template <typename T>
bool ParameterGroup<T>::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

template <typename T>
void ParameterGroup<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
std::size_t ParameterGroup<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template class ParameterGroup<float>;
template class ParameterGroup<double>;

}  // namespace ecechain::nn
