#include "mfplan/core/error.hpp"
#include "mfplan/diffkit/params.hpp"

#include <algorithm>

namespace mfplan::diffkit {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw ArgumentError("duplicate parameter '" + name + "'");
  init.require_finite(name.c_str());
  Slot slot;
  slot.name = name;
  slot.grad = Tensor(init.shape());
  slot.first_moment = Tensor(init.shape());
  slot.second_moment = Tensor(init.shape());
  slot.value = std::move(init);
  index_.emplace(name, slots_.size());
  slots_.push_back(std::move(slot));
  return slots_.back().value;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& s : slots_) {
    std::fill(s.grad.data().begin(), s.grad.data().end(), 0.0);
    s.has_grad = false;
  }
}

}  // namespace mfplan::diffkit
