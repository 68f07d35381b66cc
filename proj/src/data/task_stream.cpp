#include "clrep/data/task_stream.hpp"

#include <algorithm>
#include <set>

#include "clrep/common/rng.hpp"

namespace clrep::data {

bool TaskSpec::contains(int global_label) const {
  return std::binary_search(class_ids.begin(), class_ids.end(), global_label);
}

std::vector<std::string> TaskSequence::dataset_names() const {
  std::vector<std::string> names;
  for (const auto& t : tasks)
    if (std::find(names.begin(), names.end(), t.dataset_name) == names.end())
      names.push_back(t.dataset_name);
  return names;
}

void TaskSequence::check_invariants() const {
  require(!tasks.empty(), Errc::validation_error, "empty task sequence");
  for (const auto& t : tasks) {
    require(!t.class_ids.empty(), Errc::validation_error, "task with empty class set");
    require(std::is_sorted(t.class_ids.begin(), t.class_ids.end()) &&
                std::adjacent_find(t.class_ids.begin(), t.class_ids.end()) == t.class_ids.end(),
            Errc::validation_error, "class_ids must be strictly increasing");
  }
  // Same-dataset tasks never overlap in classes.
  for (std::size_t i = 0; i < tasks.size(); ++i)
    for (std::size_t j = i + 1; j < tasks.size(); ++j) {
      if (tasks[i].dataset_name != tasks[j].dataset_name) continue;
      std::vector<int> common;
      std::set_intersection(tasks[i].class_ids.begin(), tasks[i].class_ids.end(),
                            tasks[j].class_ids.begin(), tasks[j].class_ids.end(),
                            std::back_inserter(common));
      require(common.empty(), Errc::validation_error, "tasks share classes");
    }
  if (kind == SequenceKind::class_incremental) {
    const auto& info = DatasetRegistry::instance().info(tasks.front().dataset_name);
    std::set<int> all;
    const std::size_t per_task = tasks.front().class_ids.size();
    for (const auto& t : tasks) {
      require(t.class_ids.size() == per_task, Errc::validation_error,
              "class-incremental tasks must have equal class counts");
      all.insert(t.class_ids.begin(), t.class_ids.end());
    }
    require(static_cast<int>(all.size()) == info.num_classes, Errc::validation_error,
            "class-incremental tasks must cover the full class set");
  }
}

TaskSequence build_class_split_sequence(const std::string& dataset_name, int n_tasks,
                                        std::uint64_t seed) {
  const auto& info = DatasetRegistry::instance().info(dataset_name);
  require(n_tasks >= 1, Errc::validation_error, "n_tasks must be >= 1");
  require(info.num_classes % n_tasks == 0, Errc::not_divisible,
          dataset_name + " has " + std::to_string(info.num_classes) +
              " classes, not divisible by " + std::to_string(n_tasks));

  RngStream rng = RngStream(seed).derive("class-assignment", {hash_string(dataset_name)});
  const std::vector<int> perm = rng.permutation(info.num_classes);
  const int per_task = info.num_classes / n_tasks;

  TaskSequence seq;
  seq.kind = SequenceKind::class_incremental;
  seq.notation = dataset_name + "/" + std::to_string(n_tasks);
  for (int t = 0; t < n_tasks; ++t) {
    TaskSpec task;
    task.task_id = t;
    task.dataset_name = dataset_name;
    task.split = Split::train;
    for (int k = 0; k < per_task; ++k)
      task.class_ids.push_back(info.global_label_offset +
                               perm[static_cast<std::size_t>(t * per_task + k)]);
    std::sort(task.class_ids.begin(), task.class_ids.end());
    seq.tasks.push_back(std::move(task));
  }
  seq.check_invariants();
  return seq;
}

TaskSequence build_shift_sequence(const std::vector<std::string>& dataset_names) {
  require(!dataset_names.empty(), Errc::validation_error, "need at least one dataset");
  TaskSequence seq;
  seq.kind = SequenceKind::dataset_shift;
  for (std::size_t i = 0; i < dataset_names.size(); ++i) {
    const auto& info = DatasetRegistry::instance().info(dataset_names[i]);
    TaskSpec task;
    task.task_id = static_cast<int>(i);
    task.dataset_name = dataset_names[i];
    task.class_ids = info.global_class_ids();
    task.split = Split::train;
    seq.tasks.push_back(std::move(task));
    seq.notation += (i == 0 ? "" : "->") + dataset_names[i];
  }
  seq.check_invariants();
  return seq;
}

SequenceSpec parse_sequence_notation(const std::string& text) {
  require(!text.empty(), Errc::validation_error, "empty sequence notation");
  SequenceSpec spec;
  spec.notation = text;
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    require(text.find("->") == std::string::npos, Errc::validation_error,
            "cannot mix D/N and A->B notation: " + text);
    spec.kind = SequenceKind::class_incremental;
    spec.datasets.push_back(text.substr(0, slash));
    const std::string count = text.substr(slash + 1);
    require(!count.empty() && count.find_first_not_of("0123456789") == std::string::npos,
            Errc::validation_error, "task count must be a positive integer: " + text);
    spec.n_tasks = std::stoi(count);
    require(spec.n_tasks >= 1, Errc::validation_error, "task count must be >= 1");
    return spec;
  }
  spec.kind = SequenceKind::dataset_shift;
  std::size_t pos = 0;
  while (true) {
    const auto arrow = text.find("->", pos);
    const std::string name =
        arrow == std::string::npos ? text.substr(pos) : text.substr(pos, arrow - pos);
    require(!name.empty(), Errc::validation_error, "malformed sequence notation: " + text);
    spec.datasets.push_back(name);
    if (arrow == std::string::npos) break;
    pos = arrow + 2;
  }
  return spec;
}

TaskSequence build_sequence(const SequenceSpec& spec, std::uint64_t seed) {
  if (spec.kind == SequenceKind::class_incremental)
    return build_class_split_sequence(spec.datasets.at(0), spec.n_tasks, seed);
  return build_shift_sequence(spec.datasets);
}

std::vector<int> task_sample_indices(const TaskSpec& task, const ImageSet& set) {
  std::vector<int> indices;
  for (int i = 0; i < set.count(); ++i)
    if (task.contains(set.labels[static_cast<std::size_t>(i)])) indices.push_back(i);
  return indices;
}

}  // namespace clrep::data
