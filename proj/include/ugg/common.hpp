#pragma once

#include <stdexcept>
#include <string>

namespace ugg {

// Library errors are thrown as ugg::Error; callers that need exit codes
// (the CLI) map them there.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace ugg
