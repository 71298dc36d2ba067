#pragma once

#include <stdexcept>
#include <string>

namespace thermomerge {

// Raised for violated preconditions and malformed inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace thermomerge
