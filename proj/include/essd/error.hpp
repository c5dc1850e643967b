#pragma once

#include <stdexcept>
#include <string>

namespace essd {

// Error categories surfaced on the CLI as "<category>: <detail>".
enum class Errc {
  MalformedRow,
  IntegrityError,
  EmptyDataset,
  UnknownCode,
  UnknownPatient,
  EmptyCohort,
  NoControls,
  EmptyPopulation,
  InsufficientFollowUp,
  SingleClassTraining,
  TooFewRows,
  LengthMismatch,
  SingleClassScores,
  NoPositives,
  ConfigError,
  UnknownPreset,
  IoError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::IntegrityError: return "IntegrityError";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::UnknownCode: return "UnknownCode";
    case Errc::UnknownPatient: return "UnknownPatient";
    case Errc::EmptyCohort: return "EmptyCohort";
    case Errc::NoControls: return "NoControls";
    case Errc::EmptyPopulation: return "EmptyPopulation";
    case Errc::InsufficientFollowUp: return "InsufficientFollowUp";
    case Errc::SingleClassTraining: return "SingleClassTraining";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::SingleClassScores: return "SingleClassScores";
    case Errc::NoPositives: return "NoPositives";
    case Errc::ConfigError: return "ConfigError";
    case Errc::UnknownPreset: return "UnknownPreset";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code),
        detail_(std::move(detail)) {}

  Errc code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace essd
