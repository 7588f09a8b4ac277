#pragma once

#include <stdexcept>
#include <string>

namespace nerclust {

// Raised for every contract violation the pipeline can report: malformed
// input files, failed preconditions, missing upstream artifacts.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nerclust
