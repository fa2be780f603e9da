#pragma once

#include <stdexcept>
#include <string>

namespace lgmrec {

// Mirrors lgmrec_status in the C API; values must stay in sync.
enum class ErrorCode : int {
  kConfig = 1,
  kIo = 2,
  kParse = 3,
  kDimension = 4,
  kIndex = 5,
  kEmptyDataset = 6,
  kNumeric = 7,
  kUnavailable = 8,
  kUsage = 9,
  kContrastiveDegenerate = 10,
  kTruncation = 11,
  kFormat = 12,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace lgmrec
