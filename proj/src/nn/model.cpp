#include "clrep/nn/model.hpp"

#include <json.hpp>

#include "clrep/common/binio.hpp"

namespace clrep::nn {

using Json = nlohmann::ordered_json;

ModelState::ModelState(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg.validate();
  RngStream rng = RngStream(init_seed).derive("model-init");
  backbone_ = ResNetBackbone<float>(cfg.encoder, rng);
  if (cfg.projector.enabled)
    projector_.emplace(cfg.encoder.feature_dim(), cfg.projector, rng);
}

MatF ModelState::backbone_infer(const data::ImageBatchF& images) const {
  return backbone_.infer(images);
}

MatF ModelState::projector_infer(const MatF& features) const {
  require(projector_.has_value(), Errc::projector_disabled, "model has no projector");
  return projector_->infer(features);
}

MatF ModelState::head_input_infer(const data::ImageBatchF& images) const {
  const MatF f = backbone_infer(images);
  return cfg_.head_input == HeadInput::projector_output ? projector_infer(f) : f;
}

MatF ModelState::forward_features(const data::ImageBatchF& images) const {
  return backbone_infer(images).transpose();
}

MatF ModelState::forward_projected(const data::ImageBatchF& images) const {
  return projector_infer(backbone_infer(images)).transpose();
}

MatF ModelState::head_logits_infer(const MatF& head_input, int task_id) const {
  const Linear<float>& h = head(task_id);
  if (cfg_.head_kind == HeadKind::linear) return h.infer(head_input);
  // cosine head: normalized weights against normalized features, scaled 1/tau
  MatF wn = h.weight();
  for (Eigen::Index r = 0; r < wn.rows(); ++r) {
    const float n = wn.row(r).norm();
    require(n > 0.0f, Errc::zero_vector, "zero-norm cosine head row");
    wn.row(r) /= n;
  }
  MatF fn = head_input;
  for (Eigen::Index c = 0; c < fn.cols(); ++c) {
    const float n = fn.col(c).norm();
    require(n > 0.0f, Errc::zero_vector, "zero-norm feature column");
    fn.col(c) /= n;
  }
  return (wn * fn) / static_cast<float>(cfg_.cosine_tau);
}

MatF ModelState::forward_logits(const data::ImageBatchF& images, int task_id) const {
  return head_logits_infer(head_input_infer(images), task_id).transpose();
}

MatF ModelState::forward_logits_all(const data::ImageBatchF& images) const {
  require(!heads_.empty(), Errc::unknown_head, "model has no heads");
  const MatF input = head_input_infer(images);
  Eigen::Index total = 0;
  for (const auto& [tid, classes] : head_classes_) total += classes;
  MatF out(total, input.cols());
  Eigen::Index row = 0;
  for (const auto& [tid, classes] : head_classes_) {
    out.middleRows(row, classes) = head_logits_infer(input, tid);
    row += classes;
  }
  return out.transpose();
}

MatF ModelState::backbone_train(const data::ImageBatchF& images) {
  return backbone_.forward(images, /*train=*/true);
}

void ModelState::backbone_backward(const MatF& gfeatures) { backbone_.backward(gfeatures); }

MatF ModelState::projector_train(const MatF& features) {
  require(projector_.has_value(), Errc::projector_disabled, "model has no projector");
  return projector_->forward(features, /*train=*/true);
}

MatF ModelState::projector_backward(const MatF& gprojected) {
  require(projector_.has_value(), Errc::projector_disabled, "model has no projector");
  return projector_->backward(gprojected);
}

MatF ModelState::head_train(int task_id, const MatF& head_input) {
  return head(task_id).forward(head_input, /*train=*/true);
}

MatF ModelState::head_backward(int task_id, const MatF& glogits) {
  return head(task_id).backward(glogits);
}

void ModelState::add_head(int task_id, int classes, RngStream& rng) {
  require(!has_head(task_id), Errc::validation_error,
          "head " + std::to_string(task_id) + " already exists");
  heads_.emplace(task_id,
                 Linear<float>(head_input_dim(), classes,
                               /*bias=*/cfg_.head_kind == HeadKind::linear, rng));
  head_classes_[task_id] = classes;
}

std::vector<int> ModelState::head_task_ids() const {
  std::vector<int> ids;
  for (const auto& [tid, h] : heads_) ids.push_back(tid);
  return ids;
}

Linear<float>& ModelState::head(int task_id) {
  const auto it = heads_.find(task_id);
  require(it != heads_.end(), Errc::unknown_head, "no head for task " + std::to_string(task_id));
  return it->second;
}

const Linear<float>& ModelState::head(int task_id) const {
  const auto it = heads_.find(task_id);
  require(it != heads_.end(), Errc::unknown_head, "no head for task " + std::to_string(task_id));
  return it->second;
}

ParamList<float> ModelState::trainable_params(const std::vector<int>& head_ids) {
  ParamList<float> all, out;
  backbone_.collect("backbone", all);
  if (projector_) projector_->collect("projector", all);
  for (auto& p : all)
    if (p.trainable) out.push_back(p);
  for (int tid : head_ids) {
    ParamList<float> hp;
    head(tid).collect("head" + std::to_string(tid), hp);
    for (auto& p : hp) out.push_back(p);
  }
  return out;
}

ParamList<float> ModelState::named_params() {
  ParamList<float> all;
  backbone_.collect("backbone", all);
  if (projector_) projector_->collect("projector", all);
  for (auto& [tid, h] : heads_) h.collect("head" + std::to_string(tid), all);
  return all;
}

namespace {

Json config_to_json(const ModelConfig& cfg) {
  return Json{{"encoder",
               {{"backbone", cfg.encoder.backbone_name},
                {"width_base", cfg.encoder.width_base},
                {"small_input_stem", cfg.encoder.small_input_stem}}},
              {"projector",
               {{"enabled", cfg.projector.enabled},
                {"depth", cfg.projector.depth},
                {"hidden_dim", cfg.projector.hidden_dim},
                {"output_dim", cfg.projector.output_dim},
                {"batch_norm", cfg.projector.batch_norm},
                {"output_l2_normalize", cfg.projector.output_l2_normalize}}},
              {"head_input", std::string(to_string(cfg.head_input))},
              {"head_kind", std::string(to_string(cfg.head_kind))},
              {"cosine_tau", cfg.cosine_tau}};
}

ModelConfig config_from_json(const Json& j) {
  ModelConfig cfg;
  cfg.encoder.backbone_name = j.at("encoder").at("backbone").get<std::string>();
  cfg.encoder.width_base = j.at("encoder").at("width_base").get<int>();
  cfg.encoder.small_input_stem = j.at("encoder").at("small_input_stem").get<bool>();
  cfg.projector.enabled = j.at("projector").at("enabled").get<bool>();
  cfg.projector.depth = j.at("projector").at("depth").get<int>();
  cfg.projector.hidden_dim = j.at("projector").at("hidden_dim").get<int>();
  cfg.projector.output_dim = j.at("projector").at("output_dim").get<int>();
  cfg.projector.batch_norm = j.at("projector").at("batch_norm").get<bool>();
  cfg.projector.output_l2_normalize = j.at("projector").at("output_l2_normalize").get<bool>();
  cfg.head_input = j.at("head_input").get<std::string>() == "projector_output"
                       ? HeadInput::projector_output
                       : HeadInput::backbone_features;
  cfg.head_kind = j.at("head_kind").get<std::string>() == "cosine" ? HeadKind::cosine : HeadKind::linear;
  cfg.cosine_tau = j.at("cosine_tau").get<double>();
  return cfg;
}

}  // namespace

void ModelState::save_checkpoint(const std::string& path) const {
  // Copy so the (mutable) parameter collection never touches this object.
  ModelState copy = *this;
  Json meta = config_to_json(cfg_);
  meta["task_index"] = task_index_;
  Json heads = Json::array();
  for (const auto& [tid, classes] : head_classes_)
    heads.push_back(Json{{"task", tid}, {"classes", classes}});
  meta["heads"] = heads;

  BinWriter w(path);
  w.magic("CLCK");
  w.u32(1);
  w.str(meta.dump());
  const auto params = copy.named_params();
  w.u64(params.size());
  for (const auto& p : params) {
    w.str(p.name);
    w.u64(static_cast<std::uint64_t>(p.value->rows()));
    w.u64(static_cast<std::uint64_t>(p.value->cols()));
    w.array(p.value->data(), static_cast<std::size_t>(p.value->size()));
  }
  w.close();
}

ModelState ModelState::load_checkpoint(const std::string& path) {
  BinReader r(path);
  r.magic("CLCK");
  const auto version = r.u32();
  require(version == 1, Errc::io_error, "unsupported checkpoint version");
  const Json meta = Json::parse(r.str());

  ModelState state(config_from_json(meta), /*init_seed=*/0);
  state.task_index_ = meta.at("task_index").get<int>();
  RngStream dummy(0);
  for (const auto& h : meta.at("heads"))
    state.add_head(h.at("task").get<int>(), h.at("classes").get<int>(), dummy);

  std::map<std::string, ParamRef<float>> by_name;
  for (auto& p : state.named_params()) by_name.emplace(p.name, p);

  const auto count = r.u64();
  require(count == by_name.size(), Errc::io_error,
          "checkpoint parameter count mismatch in " + path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const auto it = by_name.find(name);
    require(it != by_name.end(), Errc::io_error, "unexpected parameter '" + name + "' in " + path);
    const auto rows = static_cast<Eigen::Index>(r.u64());
    const auto cols = static_cast<Eigen::Index>(r.u64());
    require(rows == it->second.value->rows() && cols == it->second.value->cols(), Errc::io_error,
            "shape mismatch for parameter '" + name + "'");
    r.array_into(it->second.value->data(), static_cast<std::size_t>(rows * cols));
  }
  return state;
}

}  // namespace clrep::nn
