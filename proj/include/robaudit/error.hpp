#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace robaudit {

enum class ErrorCode {
  InvalidArgument,
  InvalidDataset,
  NonFinite,
  RankDeficient,
  LeverageOne,
  BudgetZero,
  WrongDirection,
  OracleInfeasible,
  GroundTruthUnavailable,
  UnknownScenario,
  BadParams,
  RankDeficientBackground,
  FileNotFound,
  ParseError,
  MissingColumn,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::LeverageOne: return "LeverageOne";
    case ErrorCode::BudgetZero: return "BudgetZero";
    case ErrorCode::WrongDirection: return "WrongDirection";
    case ErrorCode::OracleInfeasible: return "OracleInfeasible";
    case ErrorCode::GroundTruthUnavailable: return "GroundTruthUnavailable";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::RankDeficientBackground: return "RankDeficientBackground";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace robaudit
