#include "clrep/data/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>

#include "clrep/common/binio.hpp"
#include "clrep/common/rng.hpp"

namespace fs = std::filesystem;

namespace clrep::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string resolve_root(const std::string& data_root) {
  if (!data_root.empty()) return data_root;
  if (const char* env = std::getenv("CLREP_DATA_ROOT"); env && *env) return env;
  return "data";
}

void append_cifar_file(const std::string& path, int label_bytes, int label_offset, ImageSet& set) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "cannot open dataset file: " + path);
  const int sample_bytes = label_bytes + 3072;
  std::vector<char> record(static_cast<std::size_t>(sample_bytes));
  while (in.read(record.data(), sample_bytes)) {
    // CIFAR-100 records carry (coarse, fine); the fine label is the last byte.
    const int label = static_cast<unsigned char>(record[static_cast<std::size_t>(label_bytes - 1)]);
    set.labels.push_back(label + label_offset);
    const auto* px = reinterpret_cast<const std::uint8_t*>(record.data() + label_bytes);
    set.pixels.insert(set.pixels.end(), px, px + 3072);
  }
  require(in.gcount() == 0, Errc::io_error, "truncated dataset file: " + path);
}

std::vector<std::string> cifar_paths(const DatasetInfo& info, Split split, const std::string& root) {
  std::vector<std::string> paths;
  if (info.name == "C10") {
    const std::string dir = root + "/cifar-10-batches-bin/";
    if (split == Split::train)
      for (int i = 1; i <= 5; ++i) paths.push_back(dir + "data_batch_" + std::to_string(i) + ".bin");
    else
      paths.push_back(dir + "test_batch.bin");
  } else {
    const std::string dir = root + "/cifar-100-binary/";
    paths.push_back(dir + (split == Split::train ? "train.bin" : "test.bin"));
  }
  return paths;
}

std::string clds_path(const DatasetInfo& info, Split split, const std::string& root) {
  return root + "/" + info.name + "_" + std::string(to_string(split)) + ".clds";
}

// ---------------------------------------------------------------------------
// Procedural stand-in datasets. Each class is a deterministic texture recipe
// (oriented gratings with class-specific frequencies and color mixing); each
// sample draws phases, amplitudes, a background gradient and pixel noise from
// a stream keyed by (dataset, class, split, index). SYNH uses a square-wave
// family so SYN10 -> SYNH behaves like a distribution shift.
struct ClassRecipe {
  double theta1, freq1, theta2, freq2;
  double color1[3], color2[3], bias[3];
};

ClassRecipe make_recipe(const std::string& dataset, int local_class, bool blocky) {
  RngStream rng =
      RngStream(hash_string(dataset)).derive("class", {static_cast<std::uint64_t>(local_class)});
  ClassRecipe r;
  r.theta1 = rng.uniform(0.0, kPi);
  r.freq1 = blocky ? rng.uniform(2.0, 4.5) : rng.uniform(1.5, 4.0);
  r.theta2 = rng.uniform(0.0, kPi);
  r.freq2 = blocky ? rng.uniform(4.5, 7.0) : rng.uniform(4.0, 8.0);
  for (int ch = 0; ch < 3; ++ch) {
    r.color1[ch] = rng.uniform(-1.0, 1.0);
    r.color2[ch] = rng.uniform(-1.0, 1.0);
    r.bias[ch] = blocky ? rng.uniform(0.30, 0.70) : rng.uniform(0.38, 0.62);
  }
  return r;
}

ImageSet generate_synthetic(const DatasetInfo& info, Split split, int per_class) {
  const bool blocky = info.name == "SYNH";
  const int h = info.height, w = info.width;
  ImageSet set;
  set.channels = 3;
  set.height = h;
  set.width = w;
  set.pixels.reserve(static_cast<std::size_t>(info.num_classes) *
                     static_cast<std::size_t>(per_class) * static_cast<std::size_t>(3 * h * w));
  std::vector<float> buf(static_cast<std::size_t>(3 * h * w));

  for (int cls = 0; cls < info.num_classes; ++cls) {
    const ClassRecipe recipe = make_recipe(info.name, cls, blocky);
    const double c2 = std::cos(recipe.theta2), s2 = std::sin(recipe.theta2);
    for (int idx = 0; idx < per_class; ++idx) {
      RngStream rng = RngStream(hash_string(info.name))
                          .derive(split == Split::train ? "train" : "test",
                                  {static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(idx)});
      const double phase1 = rng.uniform(0.0, 2.0 * kPi);
      const double phase2 = rng.uniform(0.0, 2.0 * kPi);
      const double amp1 = rng.uniform(0.55, 1.0);
      const double amp2 = rng.uniform(0.55, 1.0);
      const double jitter = rng.uniform(-0.06, 0.06);
      const double gdir = rng.uniform(0.0, 2.0 * kPi);
      const double gamp = rng.uniform(0.0, 0.15);
      const double cj1 = std::cos(recipe.theta1 + jitter), sj1 = std::sin(recipe.theta1 + jitter);

      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double fx = static_cast<double>(x) / w, fy = static_cast<double>(y) / h;
          double g1 = std::sin(2.0 * kPi * recipe.freq1 * (fx * cj1 + fy * sj1) + phase1);
          double g2 = std::sin(2.0 * kPi * recipe.freq2 * (fx * c2 + fy * s2) + phase2);
          if (blocky) {
            g1 = g1 >= 0.0 ? 1.0 : -1.0;
            g2 = g2 >= 0.0 ? 1.0 : -1.0;
          }
          const double grad = gamp * ((fx - 0.5) * std::cos(gdir) + (fy - 0.5) * std::sin(gdir));
          for (int ch = 0; ch < 3; ++ch) {
            const double v =
                recipe.bias[ch] +
                0.28 * (amp1 * g1 * recipe.color1[ch] + amp2 * g2 * recipe.color2[ch]) + grad;
            buf[static_cast<std::size_t>((ch * h + y) * w + x)] = static_cast<float>(v);
          }
        }
      }
      for (int p = 0; p < 3 * h * w; ++p) {
        const double v = buf[static_cast<std::size_t>(p)] + rng.uniform(-0.06, 0.06);
        set.pixels.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
      }
      set.labels.push_back(info.global_label_offset + cls);
    }
  }
  return set;
}

int synthetic_per_class(const DatasetInfo& info, Split split) {
  if (info.name == "SYN100") return split == Split::train ? 120 : 30;
  return split == Split::train ? 500 : 100;
}

}  // namespace

DatasetRegistry::DatasetRegistry() {
  const auto add = [&](std::string name, int classes, int offset, int hw, bool synth,
                       std::array<double, 3> mean, std::array<double, 3> std) {
    DatasetInfo d;
    d.name = std::move(name);
    d.num_classes = classes;
    d.global_label_offset = offset;
    d.height = d.width = hw;
    d.synthetic = synth;
    d.norm_mean = mean;
    d.norm_std = std;
    infos_.push_back(std::move(d));
  };
  add("C10", 10, 0, 32, false, {0.4914, 0.4822, 0.4465}, {0.2470, 0.2435, 0.2616});
  add("C100", 100, 10, 32, false, {0.5071, 0.4865, 0.4409}, {0.2673, 0.2564, 0.2762});
  add("SVHN", 10, 110, 32, false, {0.4377, 0.4438, 0.4728}, {0.1980, 0.2010, 0.1970});
  add("IN100", 100, 120, 96, false, {0.485, 0.456, 0.406}, {0.229, 0.224, 0.225});
  add("SYN10", 10, 220, 32, true, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
  add("SYN100", 100, 230, 32, true, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
  add("SYNH", 10, 330, 32, true, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
}

DatasetRegistry& DatasetRegistry::instance() {
  static DatasetRegistry reg;
  return reg;
}

bool DatasetRegistry::known(const std::string& name) const {
  return std::any_of(infos_.begin(), infos_.end(),
                     [&](const DatasetInfo& d) { return d.name == name; });
}

const DatasetInfo& DatasetRegistry::info(const std::string& name) const {
  for (const auto& d : infos_)
    if (d.name == name) return d;
  raise(Errc::unknown_dataset, "'" + name + "' is not a registered dataset");
}

bool DatasetRegistry::available(const std::string& name, const std::string& data_root) const {
  const DatasetInfo& d = info(name);
  if (d.synthetic) return true;
  const std::string root = resolve_root(data_root);
  if (d.name == "C10" || d.name == "C100") {
    bool ok = true;
    for (const auto& p : cifar_paths(d, Split::train, root)) ok = ok && fs::exists(p);
    ok = ok && fs::exists(cifar_paths(d, Split::test, root)[0]);
    if (ok) return true;
  }
  return fs::exists(clds_path(d, Split::train, root)) && fs::exists(clds_path(d, Split::test, root));
}

std::shared_ptr<const ImageSet> DatasetRegistry::load(const std::string& name, Split split,
                                                      const std::string& data_root) const {
  const DatasetInfo& d = info(name);
  const std::string root = resolve_root(data_root);

  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const ImageSet>> cache;
  const std::string key = name + "|" + std::string(to_string(split)) + "|" + (d.synthetic ? "" : root);
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  ImageSet set;
  if (d.synthetic) {
    set = generate_synthetic(d, split, synthetic_per_class(d, split));
  } else if ((d.name == "C10" || d.name == "C100") && fs::exists(cifar_paths(d, split, root)[0])) {
    set.channels = 3;
    set.height = set.width = 32;
    const int label_bytes = d.name == "C10" ? 1 : 2;
    for (const auto& p : cifar_paths(d, split, root))
      append_cifar_file(p, label_bytes, d.global_label_offset, set);
  } else {
    const std::string p = clds_path(d, split, root);
    require(fs::exists(p), Errc::io_error,
            "dataset '" + name + "' not found under '" + root +
                "' (expected canonical binaries or " + p + ")");
    set = load_clds(p, d);
  }

  for (int label : set.labels)
    require(label >= d.global_label_offset && label < d.global_label_offset + d.num_classes,
            Errc::io_error, "label outside the dataset's global range in " + name);

  auto ptr = std::make_shared<const ImageSet>(std::move(set));
  std::lock_guard lock(mu);
  cache[key] = ptr;
  return ptr;
}

ImageSet load_clds(const std::string& path, const DatasetInfo& info) {
  BinReader r(path);
  r.magic("CLDS");
  const auto version = r.u32();
  require(version == 1, Errc::io_error, "unsupported CLDS version");
  const auto n = r.u32();
  const auto c = r.u32(), h = r.u32(), w = r.u32();
  require(static_cast<int>(c) == info.channels && static_cast<int>(h) == info.height &&
              static_cast<int>(w) == info.width,
          Errc::io_error, "CLDS dims do not match registry entry for " + info.name);
  ImageSet set;
  set.channels = static_cast<int>(c);
  set.height = static_cast<int>(h);
  set.width = static_cast<int>(w);
  set.pixels = r.array<std::uint8_t>();
  require(set.pixels.size() == static_cast<std::size_t>(n) * c * h * w, Errc::io_error,
          "CLDS pixel payload size mismatch");
  const auto labels = r.array<std::int64_t>();
  require(labels.size() == n, Errc::io_error, "CLDS label count mismatch");
  set.labels.reserve(n);
  for (auto l : labels) set.labels.push_back(static_cast<int>(l) + info.global_label_offset);
  return set;
}

void save_clds(const std::string& path, const ImageSet& set, int label_offset) {
  BinWriter w(path);
  w.magic("CLDS");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(set.count()));
  w.u32(static_cast<std::uint32_t>(set.channels));
  w.u32(static_cast<std::uint32_t>(set.height));
  w.u32(static_cast<std::uint32_t>(set.width));
  w.array(set.pixels.data(), set.pixels.size());
  std::vector<std::int64_t> labels;
  labels.reserve(set.labels.size());
  for (int l : set.labels) labels.push_back(l - label_offset);
  w.array(labels.data(), labels.size());
  w.close();
}

}  // namespace clrep::data
