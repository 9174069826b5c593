/*
 * Copyright 2026 The benchrel Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace benchrel {

/// Every recoverable failure in the library carries one of these codes.
/// The code name is stable API: the CLI prints it verbatim and scripts
/// are expected to match on it.
enum class Errc {
  EmptyDataset,
  DuplicateRecord,
  MalformedRow,
  TaxonomyConflict,
  MissingSubmission,
  EmptySelection,
  TooFewModels,
  NoCommonScenario,
  DomainMismatch,
  OutOfRange,
  SizeExceedsPool,
  UnknownAxis,
  DegenerateObjective,
  InsufficientModels,
  NoEligibleSubscenario,
  BudgetExceedsCrossProduct,
  InvalidSpec,
  UnknownCase,
  ProviderGap,
  UncalibratedSize,
  InvalidArgument,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DuplicateRecord: return "DuplicateRecord";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::TaxonomyConflict: return "TaxonomyConflict";
    case Errc::MissingSubmission: return "MissingSubmission";
    case Errc::EmptySelection: return "EmptySelection";
    case Errc::TooFewModels: return "TooFewModels";
    case Errc::NoCommonScenario: return "NoCommonScenario";
    case Errc::DomainMismatch: return "DomainMismatch";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::SizeExceedsPool: return "SizeExceedsPool";
    case Errc::UnknownAxis: return "UnknownAxis";
    case Errc::DegenerateObjective: return "DegenerateObjective";
    case Errc::InsufficientModels: return "InsufficientModels";
    case Errc::NoEligibleSubscenario: return "NoEligibleSubscenario";
    case Errc::BudgetExceedsCrossProduct: return "BudgetExceedsCrossProduct";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::UnknownCase: return "UnknownCase";
    case Errc::ProviderGap: return "ProviderGap";
    case Errc::UncalibratedSize: return "UncalibratedSize";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }
  const char* name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace benchrel
