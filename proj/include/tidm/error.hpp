#pragma once

#include <stdexcept>
#include <string>

namespace tidm {

enum class Err {
  ThresholdOutOfRange,
  SecretOutOfField,
  FieldTooSmall,
  InsufficientShares,
  IndexCollision,
  PartyCountTooSmall,
  NotInvertible,
  CorrectionNotFound,
  NonInvertibleCiphertext,
  MissingParty,
  DuplicatePartyPartial,
  MaxAttemptsExceeded,
  Unsatisfied,
  NotASubset,
  SelfDelegation,
  NotMaintainer,
  StaleRevocationList,
  UnknownRank,
  UnknownUser,
  UnknownLabel,
  ThresholdViolation,
  IntegrityFailure,
  EpochMismatch,
  Consumed,
  Deadlock,
  AlreadyCrashed,
  InvalidConfig,
  ParseError,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::ThresholdOutOfRange:    return "ThresholdOutOfRange";
    case Err::SecretOutOfField:       return "SecretOutOfField";
    case Err::FieldTooSmall:          return "FieldTooSmall";
    case Err::InsufficientShares:     return "InsufficientShares";
    case Err::IndexCollision:         return "IndexCollision";
    case Err::PartyCountTooSmall:     return "PartyCountTooSmall";
    case Err::NotInvertible:          return "NotInvertible";
    case Err::CorrectionNotFound:     return "CorrectionNotFound";
    case Err::NonInvertibleCiphertext:return "NonInvertibleCiphertext";
    case Err::MissingParty:           return "MissingParty";
    case Err::DuplicatePartyPartial:  return "DuplicatePartyPartial";
    case Err::MaxAttemptsExceeded:    return "MaxAttemptsExceeded";
    case Err::Unsatisfied:            return "Unsatisfied";
    case Err::NotASubset:             return "NotASubset";
    case Err::SelfDelegation:         return "SelfDelegation";
    case Err::NotMaintainer:          return "NotMaintainer";
    case Err::StaleRevocationList:    return "StaleRevocationList";
    case Err::UnknownRank:            return "UnknownRank";
    case Err::UnknownUser:            return "UnknownUser";
    case Err::UnknownLabel:           return "UnknownLabel";
    case Err::ThresholdViolation:     return "ThresholdViolation";
    case Err::IntegrityFailure:       return "IntegrityFailure";
    case Err::EpochMismatch:          return "EpochMismatch";
    case Err::Consumed:               return "Consumed";
    case Err::Deadlock:               return "Deadlock";
    case Err::AlreadyCrashed:         return "AlreadyCrashed";
    case Err::InvalidConfig:          return "InvalidConfig";
    case Err::ParseError:             return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

  Err code() const { return code_; }

private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Err code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace tidm
