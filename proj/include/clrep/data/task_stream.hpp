#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clrep/data/datasets.hpp"

namespace clrep::data {

// One dataset slice: a set of global class ids from a single dataset and split.
struct TaskSpec {
  int task_id = 0;
  std::string dataset_name;
  std::vector<int> class_ids;  // global labels, strictly increasing
  Split split = Split::train;

  TaskSpec with_split(Split s) const {
    TaskSpec t = *this;
    t.split = s;
    return t;
  }
  bool contains(int global_label) const;
};

enum class SequenceKind { class_incremental, dataset_shift };

constexpr std::string_view to_string(SequenceKind k) {
  return k == SequenceKind::class_incremental ? "class-incremental" : "dataset-shift";
}

struct TaskSequence {
  std::vector<TaskSpec> tasks;
  SequenceKind kind = SequenceKind::class_incremental;
  std::string notation;  // e.g. "C100/5" or "C10->SVHN"

  int size() const { return static_cast<int>(tasks.size()); }
  // Every dataset name appearing in the sequence, first occurrence order.
  std::vector<std::string> dataset_names() const;
  void check_invariants() const;  // disjointness / coverage / equal cardinality
};

// Classes are permuted by the seed, then chunked into n_tasks equal groups.
TaskSequence build_class_split_sequence(const std::string& dataset_name, int n_tasks,
                                        std::uint64_t seed);

// One task per dataset, each covering the dataset's full class set.
TaskSequence build_shift_sequence(const std::vector<std::string>& dataset_names);

// Parsed CLI notation: "D/N" for class splits, "A->B" (ASCII arrow) for shifts,
// a bare dataset name for the single-task baseline.
struct SequenceSpec {
  SequenceKind kind = SequenceKind::dataset_shift;
  std::vector<std::string> datasets;
  int n_tasks = 1;  // class_incremental only
  std::string notation;
};

SequenceSpec parse_sequence_notation(const std::string& text);
TaskSequence build_sequence(const SequenceSpec& spec, std::uint64_t seed);

// Indices of the samples of `set` whose labels fall in the task's class set.
std::vector<int> task_sample_indices(const TaskSpec& task, const ImageSet& set);

}  // namespace clrep::data
