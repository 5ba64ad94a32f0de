#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "hlic/autodiff.hpp"
#include "hlic/error.hpp"
#include "hlic/textio.hpp"

namespace hlic::detail {

inline void write_tensor(std::ostream& os, const char* name, const Tensor& t) {
  os << name << " " << t.shape[0] << " " << t.shape[1] << "\n";
  for (size_t i = 0; i < t.data.size(); ++i) {
    os << format_double(t.data[i]) << (i + 1 == t.data.size() ? "\n" : " ");
  }
}

inline void read_tensor(std::istream& is, const char* name, Tensor& t) {
  std::string key;
  int rows = 0, cols = 0;
  is >> key >> rows >> cols;
  if (!is || key != name || rows != t.shape[0] || cols != t.shape[1]) {
    throw InvalidInput("state file: expected tensor '" + std::string(name) +
                       "' with shape [" + std::to_string(t.shape[0]) + "," +
                       std::to_string(t.shape[1]) + "]");
  }
  for (double& v : t.data) {
    if (!(is >> v)) throw InvalidInput("state file: truncated tensor data");
  }
}

inline void write_adam(std::ostream& os, const AdamOptimizer& opt) {
  os << "adam_step " << opt.step_count() << "\n";
  for (const auto& slot : opt.slots()) {
    os << "moments " << slot.name << " " << slot.m.size() << "\n";
    for (size_t i = 0; i < slot.m.size(); ++i) {
      os << format_double(slot.m[i]) << " " << format_double(slot.v[i])
         << (i + 1 == slot.m.size() ? "\n" : " ");
    }
  }
}

inline void read_adam(std::istream& is, AdamOptimizer& opt) {
  std::string key;
  int64_t step = 0;
  is >> key >> step;
  if (!is || key != "adam_step") {
    throw InvalidInput("state file: expected adam_step");
  }
  opt.set_step_count(step);
  for (auto& slot : opt.slots()) {
    size_t n = 0;
    std::string name;
    is >> key >> name >> n;
    if (!is || key != "moments" || name != slot.name || n != slot.m.size()) {
      throw InvalidInput("state file: bad moments block for '" + slot.name +
                         "'");
    }
    for (size_t i = 0; i < n; ++i) {
      if (!(is >> slot.m[i] >> slot.v[i])) {
        throw InvalidInput("state file: truncated moments");
      }
    }
  }
}

}  // namespace hlic::detail
