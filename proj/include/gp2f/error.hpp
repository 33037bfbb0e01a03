#pragma once

#include <stdexcept>
#include <string>

namespace gp2f {

// Error taxonomy shared by the library and the CLI. The CLI maps each
// category to a distinct process exit code (see tools/gp2f.cpp).
enum class ErrorCategory {
  usage,       // bad flags, bad config keys, infeasible protocol requests
  ingestion,   // unreadable or malformed input data
  numeric,     // shape mismatches, non-finite values
  assumption,  // violated theory-side assumptions
  internal,    // broken internal contracts (frozen-parameter misuse etc.)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& m) : Error(ErrorCategory::usage, m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::usage, m) {}
};
struct ProtocolError : Error {
  explicit ProtocolError(const std::string& m) : Error(ErrorCategory::usage, m) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(ErrorCategory::ingestion, m) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(ErrorCategory::ingestion, m) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error(ErrorCategory::numeric, m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorCategory::numeric, m) {}
};
struct AssumptionError : Error {
  explicit AssumptionError(const std::string& m) : Error(ErrorCategory::assumption, m) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error(ErrorCategory::internal, m) {}
};

}  // namespace gp2f
