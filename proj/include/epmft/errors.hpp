#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epmft {

// Error kinds raised by the library. The CLI maps these onto exit codes.
enum class Errc {
  InvariantViolation,
  DomainError,
  SingularFixedPoint,
  NonUniqueFixedPoint,
  NotCompletelyPositive,
  NotAFixedPoint,
  NotTracePreserving,
  InfiniteBeta,
  DivergentEntropyTerm,
  NonPhysicalCoherenceRatio,
  DivergentRatio,
  IncompleteData,
  ParseError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::DomainError: return "DomainError";
    case Errc::SingularFixedPoint: return "SingularFixedPoint";
    case Errc::NonUniqueFixedPoint: return "NonUniqueFixedPoint";
    case Errc::NotCompletelyPositive: return "NotCompletelyPositive";
    case Errc::NotAFixedPoint: return "NotAFixedPoint";
    case Errc::NotTracePreserving: return "NotTracePreserving";
    case Errc::InfiniteBeta: return "InfiniteBeta";
    case Errc::DivergentEntropyTerm: return "DivergentEntropyTerm";
    case Errc::NonPhysicalCoherenceRatio: return "NonPhysicalCoherenceRatio";
    case Errc::DivergentRatio: return "DivergentRatio";
    case Errc::IncompleteData: return "IncompleteData";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace epmft
