#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfplan/core/error.hpp"
#include "mfplan/diffkit/tensor.hpp"

namespace mfplan::diffkit {

/// Named trainable parameters in insertion order, with gradients and the
/// AdamW moment state.
class ParamStore {
 public:
  struct Slot {
    std::string name;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    Tensor first_moment;
    Tensor second_moment;
    std::size_t steps = 0;
  };

  /// Registers a parameter; duplicate names are an error.
  Tensor& add(const std::string& name, Tensor init);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  std::size_t size() const { return slots_.size(); }
  std::size_t total_elements() const;

  const Tensor& value(const std::string& name) const { return slots_[index_of(name)].value; }
  Tensor& value(const std::string& name) { return slots_[index_of(name)].value; }
  const Tensor& grad(const std::string& name) const { return slots_[index_of(name)].grad; }
  bool has_grad(const std::string& name) const { return slots_[index_of(name)].has_grad; }

  const Slot& slot(std::size_t i) const { return slots_[i]; }
  Slot& slot(std::size_t i) { return slots_[i]; }
  const std::vector<Slot>& slots() const { return slots_; }
  std::vector<Slot>& slots() { return slots_; }

  /// Zeroes every gradient and marks it absent.
  void zero_grad();

 private:
  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mfplan::diffkit
