#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mpf/core/tensor.hpp"

namespace mpf::backbone {

// Named parameter arrays in a fixed registration order; the order defines
// initialization draws and checkpoint layout, so it is part of the contract.
template <typename T>
class ParamSet {
 public:
  Tensor<T>& add(const std::string& name, std::vector<uint32_t> dims) {
    check(!index_.count(name), "param '" + name + "' registered twice");
    index_[name] = tensors_.size();
    names_.push_back(name);
    tensors_.emplace_back(std::move(dims));
    return tensors_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown param '" + name + "'");
    return tensors_[it->second];
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown param '" + name + "'");
    return tensors_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }
  size_t count() const { return tensors_.size(); }

  size_t total_elements() const {
    size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  static ParamSet zeros_like(const ParamSet& o) {
    ParamSet p;
    for (size_t i = 0; i < o.names_.size(); ++i) p.add(o.names_[i], o.tensors_[i].dims());
    return p;
  }

  void zero_all() {
    for (auto& t : tensors_) t.fill(T(0));
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> p;
    for (size_t i = 0; i < names_.size(); ++i) {
      auto& t = p.add(names_[i], tensors_[i].dims());
      for (size_t k = 0; k < tensors_[i].size(); ++k) t[k] = static_cast<U>(tensors_[i][k]);
    }
    return p;
  }

 private:
  template <typename U>
  friend class ParamSet;

  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, size_t> index_;
};

// Standardization statistics are data, not trainable weights.
inline bool param_trainable(const std::string& name) {
  return name.rfind("stand.", 0) != 0;
}

}  // namespace mpf::backbone
