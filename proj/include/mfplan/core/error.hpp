#pragma once

#include <stdexcept>

namespace mfplan {

/// A caller passed a value or combination of options that cannot be honored.
class ArgumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfplan
