#include "cmig/network/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cmig/errors.hpp"

namespace cmig::network {

std::string to_string(MatchVariant v) {
  switch (v) {
    case MatchVariant::kSeparate:
      return "separate";
    case MatchVariant::kJoint:
      return "joint";
    case MatchVariant::kDirectRegression:
      return "regression";
  }
  return "separate";
}

MatchVariant match_variant_from_string(const std::string& s) {
  if (s == "separate") return MatchVariant::kSeparate;
  if (s == "joint") return MatchVariant::kJoint;
  if (s == "regression") return MatchVariant::kDirectRegression;
  throw ContractViolation("unknown correspondence variant '" + s + "' (expected separate, joint or regression)");
}

std::size_t ModelConfig::keypoints_for(std::size_t n_points) const {
  const std::size_t k = keypoints == 0 ? (n_points + 1) / 2 : keypoints;
  return std::min(k, n_points);
}

void ModelConfig::validate() const {
  if (feature_dim == 0 || attention_dim == 0) throw ContractViolation("model: feature widths must be positive");
  if (edge_widths.empty()) throw ContractViolation("model: at least one EdgeConv layer required");
  for (auto w : edge_widths)
    if (w == 0) throw ContractViolation("model: EdgeConv widths must be positive");
  if (k_nn == 0) throw ContractViolation("model: k_nn must be positive");
  if (views == 0) throw ContractViolation("model: at least one view required");
  if (resolution < 4) throw ContractViolation("model: resolution must be >= 4");
  if (head_hidden == 0 || cnn_channels1 == 0 || cnn_channels2 == 0)
    throw ContractViolation("model: hidden widths must be positive");
}

ad::Value& ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> init) {
  if (contains(name)) throw ContractViolation("ParamStore: duplicate parameter " + name);
  index_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(ad::Value::parameter({rows, cols}, std::move(init)));
  return values_.back();
}

const ad::Value& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractViolation("ParamStore: no parameter named " + name);
  return values_[it->second];
}

ad::Value& ParamStore::get(const std::string& name) {
  return const_cast<ad::Value&>(static_cast<const ParamStore&>(*this).get(name));
}

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& v : values_) v.zero_grad();
}

std::vector<ad::NamedTensor> ParamStore::to_tensors() const {
  std::vector<ad::NamedTensor> out;
  for (std::size_t i = 0; i < values_.size(); ++i)
    out.push_back({names_[i], values_[i].shape(), {values_[i].data().begin(), values_[i].data().end()}});
  return out;
}

void ParamStore::load(const std::vector<ad::NamedTensor>& tensors) {
  std::unordered_map<std::string, const ad::NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    auto it = by_name.find(names_[i]);
    if (it == by_name.end()) throw ContractViolation("checkpoint is missing parameter " + names_[i]);
    if (it->second->shape != values_[i].shape())
      throw ContractViolation("checkpoint parameter " + names_[i] + " has shape " + ad::shape_str(it->second->shape) +
                              ", model expects " + ad::shape_str(values_[i].shape()));
    auto dst = values_[i].mutable_data();
    std::copy(it->second->data.begin(), it->second->data.end(), dst.begin());
  }
}

namespace {

struct Initializer {
  std::mt19937_64 rng;

  std::vector<double> weight(std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<double> w(fan_in * fan_out);
    for (double& x : w) x = u(rng);
    return w;
  }
};

void linear(ParamStore& ps, Initializer& init, const std::string& name, std::size_t in, std::size_t out,
            bool bias = true) {
  ps.add(name + ".w", in, out, init.weight(in, out));
  if (bias) ps.add(name + ".b", 1, out, std::vector<double>(out, 0.0));
}

}  // namespace

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  Initializer init{std::mt19937_64(seed)};
  auto& ps = m.params;
  const std::size_t c = config.feature_dim;
  const std::size_t ct = config.attention_dim;
  const std::size_t h = config.head_hidden;

  std::size_t in = 3, concat_width = 0;
  for (std::size_t l = 0; l < config.edge_widths.size(); ++l) {
    const std::size_t w = config.edge_widths[l];
    linear(ps, init, "edge" + std::to_string(l) + ".mlp1", 2 * in, w);
    linear(ps, init, "edge" + std::to_string(l) + ".mlp2", w, w);
    in = w;
    concat_width += w;
  }
  linear(ps, init, "edge.out", concat_width, c);

  linear(ps, init, "cnn.conv1", 9, config.cnn_channels1);
  linear(ps, init, "cnn.conv2", 9 * config.cnn_channels1, config.cnn_channels2);
  linear(ps, init, "cnn.fc", config.cnn_channels2, c);

  for (const char* block : {"interact", "fuse"}) {
    const std::string p = block;
    linear(ps, init, p + ".q", c, ct, false);
    linear(ps, init, p + ".k", c, ct, false);
    linear(ps, init, p + ".v", c, ct, false);
    linear(ps, init, p + ".mlp1", ct, c);
    linear(ps, init, p + ".mlp2", c, c);
  }

  linear(ps, init, "mask.l1", 3 * c + 3, h);
  linear(ps, init, "mask.l2", h, 1);

  switch (config.variant) {
    case MatchVariant::kSeparate:
      linear(ps, init, "cs.coord.l1", 10, h);
      linear(ps, init, "cs.coord.l2", h, 1);
      linear(ps, init, "cs.feat.l1", 3 * c, h);
      linear(ps, init, "cs.feat.l2", h, 1);
      break;
    case MatchVariant::kJoint:
      linear(ps, init, "cs.joint.l1", 10 + 3 * c, h);
      linear(ps, init, "cs.joint.l2", h, 1);
      break;
    case MatchVariant::kDirectRegression:
      linear(ps, init, "reg.l1", 2 * c, h);
      linear(ps, init, "reg.l2", h, 7);
      break;
  }
  if (config.variant != MatchVariant::kDirectRegression) {
    linear(ps, init, "cs.score.l1", 2 + c, h);
    linear(ps, init, "cs.score.l2", h, 1);
  }
  return m;
}

Model Model::clone() const {
  Model m;
  m.config = config;
  for (std::size_t i = 0; i < params.values().size(); ++i) {
    const auto& v = params.values()[i];
    m.params.add(params.names()[i], v.rows(), v.cols(), {v.data().begin(), v.data().end()});
  }
  return m;
}

void Model::save(const std::filesystem::path& path) const { ad::save_checkpoint(path, params.to_tensors()); }

void Model::load(const std::filesystem::path& path) { params.load(ad::load_checkpoint(path)); }

}  // namespace cmig::network
