#include "cmig/harness/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmig/data/synth.hpp"
#include "cmig/errors.hpp"

namespace cmig::harness {

using Json = nlohmann::ordered_json;

namespace {

// Reads fields out of one JSON object and remembers which keys were seen so
// leftovers can be reported as typos.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ContractViolation("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& field) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      field = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ContractViolation("config: '" + path_ + "." + key + "' has the wrong type");
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ContractViolation("config: unknown key '" + path_ + "." + it.key() + "'");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json model_json(const network::ModelConfig& m) {
  return Json{{"feature_dim", m.feature_dim},     {"attention_dim", m.attention_dim},
              {"edge_widths", m.edge_widths},     {"k_nn", m.k_nn},
              {"views", m.views},                 {"resolution", m.resolution},
              {"keypoints", m.keypoints},         {"cnn_channels1", m.cnn_channels1},
              {"cnn_channels2", m.cnn_channels2}, {"head_hidden", m.head_hidden},
              {"leaky_slope", m.leaky_slope},     {"variant", network::to_string(m.variant)}};
}

void read_model(const Json& j, network::ModelConfig& m) {
  ObjectReader r(j, "model");
  r.read("feature_dim", m.feature_dim);
  r.read("attention_dim", m.attention_dim);
  r.read("edge_widths", m.edge_widths);
  r.read("k_nn", m.k_nn);
  r.read("views", m.views);
  r.read("resolution", m.resolution);
  r.read("keypoints", m.keypoints);
  r.read("cnn_channels1", m.cnn_channels1);
  r.read("cnn_channels2", m.cnn_channels2);
  r.read("head_hidden", m.head_hidden);
  r.read("leaky_slope", m.leaky_slope);
  std::string variant = network::to_string(m.variant);
  r.read("variant", variant);
  m.variant = network::match_variant_from_string(variant);
  r.finish();
}

Json loss_json(const losses::LossConfig& l) {
  return Json{{"sigma_p", l.sigma_p},
              {"sigma_n", l.sigma_n},
              {"tau", l.tau},
              {"dist_threshold", l.dist_threshold},
              {"overlap_threshold", l.overlap_threshold},
              {"include_pos_in_denominator", l.include_pos_in_denominator},
              {"mp_through_matrix", l.mp_through_matrix}};
}

void read_loss(const Json& j, losses::LossConfig& l) {
  ObjectReader r(j, "loss");
  r.read("sigma_p", l.sigma_p);
  r.read("sigma_n", l.sigma_n);
  r.read("tau", l.tau);
  r.read("dist_threshold", l.dist_threshold);
  r.read("overlap_threshold", l.overlap_threshold);
  r.read("include_pos_in_denominator", l.include_pos_in_denominator);
  r.read("mp_through_matrix", l.mp_through_matrix);
  r.finish();
}

Json protocol_json(const data::ProtocolConfig& p) {
  return Json{{"rot_range_deg", p.rot_range_deg},
              {"trans_range", p.trans_range},
              {"keep_fraction", p.keep_fraction},
              {"noise_sigma", p.noise_sigma},
              {"noise_clip", p.noise_clip}};
}

void read_protocol(const Json& j, data::ProtocolConfig& p) {
  ObjectReader r(j, "data.protocol");
  r.read("rot_range_deg", p.rot_range_deg);
  r.read("trans_range", p.trans_range);
  r.read("keep_fraction", p.keep_fraction);
  r.read("noise_sigma", p.noise_sigma);
  r.read("noise_clip", p.noise_clip);
  r.finish();
}

Json to_json_object(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["n_iter"] = c.n_iter;
  j["model"] = model_json(c.model);
  j["loss"] = loss_json(c.loss);
  j["optimizer"] = Json{{"lr", c.optimizer.lr},
                        {"beta1", c.optimizer.beta1},
                        {"beta2", c.optimizer.beta2},
                        {"eps", c.optimizer.eps},
                        {"milestones", c.optimizer.milestones},
                        {"factor", c.optimizer.factor}};
  j["train"] = Json{{"steps", c.train.steps},
                    {"batch_size", c.train.batch_size},
                    {"checkpoint_every", c.train.checkpoint_every},
                    {"resample_each_epoch", c.train.resample_each_epoch}};
  j["data"] = Json{{"shapes", c.data.shapes},
                   {"shape_count", c.data.shape_count},
                   {"n_points", c.data.n_points},
                   {"train_regime", c.data.train_regime},
                   {"eval_regime", c.data.eval_regime},
                   {"eval_samples", c.data.eval_samples},
                   {"protocol", protocol_json(c.data.protocol)}};
  j["projection"] = Json{{"enabled", c.projection.enabled}, {"render_both", c.projection.render_both}};
  j["eval"] = Json{{"icp", c.eval.icp},
                   {"workers", c.eval.workers},
                   {"iteration_sweep", c.eval.iteration_sweep},
                   {"hard_correspondences", c.eval.hard_correspondences},
                   {"timing_repeats", c.eval.timing_repeats}};
  j["toggles"] = Json{{"tf", c.toggles.tf}, {"cmd", c.toggles.cmd}, {"mcl", c.toggles.mcl}, {"mp", c.toggles.mp}};
  return j;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  data.protocol.validate();
  if (n_iter < 1) throw ContractViolation("config: n_iter must be >= 1");
  if (train.batch_size < 2) throw ContractViolation("config: train.batch_size must be >= 2");
  if (!(optimizer.lr > 0.0)) throw ContractViolation("config: optimizer.lr must be positive");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw ContractViolation("config: optimizer betas must be in [0, 1)");
  if (!(optimizer.eps > 0.0)) throw ContractViolation("config: optimizer.eps must be positive");
  if (!(optimizer.factor > 0.0)) throw ContractViolation("config: optimizer.factor must be positive");
  if (data.n_points < 16) throw ContractViolation("config: data.n_points must be >= 16");
  if (data.shapes.empty() && data.shape_count == 0) throw ContractViolation("config: no training shapes");
  for (const auto& s : data.shapes) data::shape_from_string(s);
  data::regime_from_string(data.train_regime);
  data::regime_from_string(data.eval_regime);
  if (eval.workers < 1) throw ContractViolation("config: eval.workers must be >= 1");
  if (eval.timing_repeats < 1) throw ContractViolation("config: eval.timing_repeats must be >= 1");
  for (auto n : eval.iteration_sweep)
    if (n < 1) throw ContractViolation("config: eval.iteration_sweep entries must be >= 1");
  if (toggles.cmd && !projection.enabled)
    throw ContractViolation("config: toggles.cmd needs projection.enabled (image features come from the views)");
}

std::string to_json(const RunConfig& cfg) { return to_json_object(cfg).dump(2) + "\n"; }

RunConfig from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  RunConfig c;
  ObjectReader r(j, "config");
  r.read("seed", c.seed);
  r.read("n_iter", c.n_iter);
  if (const Json* m = r.child("model")) read_model(*m, c.model);
  if (const Json* l = r.child("loss")) read_loss(*l, c.loss);
  if (const Json* o = r.child("optimizer")) {
    ObjectReader s(*o, "optimizer");
    s.read("lr", c.optimizer.lr);
    s.read("beta1", c.optimizer.beta1);
    s.read("beta2", c.optimizer.beta2);
    s.read("eps", c.optimizer.eps);
    s.read("milestones", c.optimizer.milestones);
    s.read("factor", c.optimizer.factor);
    s.finish();
  }
  if (const Json* t = r.child("train")) {
    ObjectReader s(*t, "train");
    s.read("steps", c.train.steps);
    s.read("batch_size", c.train.batch_size);
    s.read("checkpoint_every", c.train.checkpoint_every);
    s.read("resample_each_epoch", c.train.resample_each_epoch);
    s.finish();
  }
  if (const Json* d = r.child("data")) {
    ObjectReader s(*d, "data");
    s.read("shapes", c.data.shapes);
    s.read("shape_count", c.data.shape_count);
    s.read("n_points", c.data.n_points);
    s.read("train_regime", c.data.train_regime);
    s.read("eval_regime", c.data.eval_regime);
    s.read("eval_samples", c.data.eval_samples);
    if (const Json* p = s.child("protocol")) read_protocol(*p, c.data.protocol);
    s.finish();
  }
  if (const Json* p = r.child("projection")) {
    ObjectReader s(*p, "projection");
    s.read("enabled", c.projection.enabled);
    s.read("render_both", c.projection.render_both);
    s.finish();
  }
  if (const Json* e = r.child("eval")) {
    ObjectReader s(*e, "eval");
    s.read("icp", c.eval.icp);
    s.read("workers", c.eval.workers);
    s.read("iteration_sweep", c.eval.iteration_sweep);
    s.read("hard_correspondences", c.eval.hard_correspondences);
    s.read("timing_repeats", c.eval.timing_repeats);
    s.finish();
  }
  if (const Json* t = r.child("toggles")) {
    ObjectReader s(*t, "toggles");
    s.read("tf", c.toggles.tf);
    s.read("cmd", c.toggles.cmd);
    s.read("mcl", c.toggles.mcl);
    s.read("mp", c.toggles.mp);
    s.finish();
  }
  r.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << to_json(cfg);
  if (!os) throw IoError("failed writing " + path.string());
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cmig::harness
