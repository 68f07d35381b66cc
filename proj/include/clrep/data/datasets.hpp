#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "clrep/data/image.hpp"

namespace clrep::data {

enum class Split { train, test };

constexpr std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct DatasetInfo {
  std::string name;
  int num_classes = 0;
  int global_label_offset = 0;  // each dataset owns a contiguous global label range
  int channels = 3;
  int height = 32;
  int width = 32;
  bool synthetic = false;
  std::array<double, 3> norm_mean{0.5, 0.5, 0.5};
  std::array<double, 3> norm_std{0.25, 0.25, 0.25};

  std::vector<int> global_class_ids() const {
    std::vector<int> ids(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) ids[static_cast<std::size_t>(c)] = global_label_offset + c;
    return ids;
  }
};

// Registry of the datasets the harness knows about. Real datasets (C10, C100,
// SVHN, IN100) load from CLREP_DATA_ROOT (or an explicit root); SYN* datasets
// are generated procedurally and need no files.
class DatasetRegistry {
 public:
  static DatasetRegistry& instance();

  bool known(const std::string& name) const;
  const DatasetInfo& info(const std::string& name) const;  // UnknownDataset
  const std::vector<DatasetInfo>& all() const { return infos_; }

  // Loads (and memoizes) a full split. data_root resolution order: explicit
  // argument, then $CLREP_DATA_ROOT, then "./data".
  std::shared_ptr<const ImageSet> load(const std::string& name, Split split,
                                       const std::string& data_root = "") const;

  // True if the real dataset's files are present (always true for SYN*).
  bool available(const std::string& name, const std::string& data_root = "") const;

 private:
  DatasetRegistry();
  std::vector<DatasetInfo> infos_;
};

// Raw container used for datasets without a canonical C++-readable format
// (SVHN, IN100): magic "CLDS", version, n, c, h, w, uint8 CHW pixels, int64
// local labels. scripts/convert_datasets.py emits it from torchvision.
ImageSet load_clds(const std::string& path, const DatasetInfo& info);
void save_clds(const std::string& path, const ImageSet& set, int label_offset);

}  // namespace clrep::data
