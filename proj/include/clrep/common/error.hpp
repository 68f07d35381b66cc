#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clrep {

// Error codes shared across the library. Tests match on the code, not the text.
enum class Errc {
  not_divisible,
  unknown_dataset,
  empty_task,
  shape_mismatch,
  projector_disabled,
  unknown_head,
  label_out_of_range,
  zero_vector,
  no_positive,
  degenerate_batch,
  missing_snapshot,
  non_finite_loss,
  missing_class,
  degenerate_mean,
  empty_reference,
  degenerate_input,
  validation_error,
  missing_metric,
  missing_run,
  io_error,
};

constexpr std::string_view to_string(Errc c) {
  switch (c) {
    case Errc::not_divisible: return "NotDivisible";
    case Errc::unknown_dataset: return "UnknownDataset";
    case Errc::empty_task: return "EmptyTask";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::projector_disabled: return "ProjectorDisabled";
    case Errc::unknown_head: return "UnknownHead";
    case Errc::label_out_of_range: return "LabelOutOfRange";
    case Errc::zero_vector: return "ZeroVector";
    case Errc::no_positive: return "NoPositive";
    case Errc::degenerate_batch: return "DegenerateBatch";
    case Errc::missing_snapshot: return "MissingSnapshot";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::missing_class: return "MissingClass";
    case Errc::degenerate_mean: return "DegenerateMean";
    case Errc::empty_reference: return "EmptyReference";
    case Errc::degenerate_input: return "DegenerateInput";
    case Errc::validation_error: return "ValidationError";
    case Errc::missing_metric: return "MissingMetric";
    case Errc::missing_run: return "MissingRun";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
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

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) raise(code, what);
}

}  // namespace clrep
