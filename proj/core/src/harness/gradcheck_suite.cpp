#include "cmig/harness/gradcheck_suite.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>

#include "cmig/errors.hpp"
#include "cmig/losses.hpp"
#include "cmig/network/blocks.hpp"
#include "cmig/network/model.hpp"
#include "cmig/projection.hpp"

namespace cmig::harness {

using ad::Value;
using network::FeatureMap;
using network::FeatureRole;

namespace {

constexpr std::size_t kPoints = 32;
constexpr std::size_t kWidth = 16;
constexpr std::size_t kKeypoints = 16;
constexpr std::size_t kBatch = 3;

class Suite {
 public:
  explicit Suite(const GradSuiteOptions& o) : opts_(o), rng_(o.seed) {}

  std::vector<double> normal(std::size_t n, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = g(rng_);
    return v;
  }
  Value param(std::size_t r, std::size_t c, double scale = 1.0) { return Value::parameter({r, c}, normal(r * c, scale)); }
  Value constant(std::size_t r, std::size_t c, double scale = 1.0) { return Value::matrix(r, c, normal(r * c, scale)); }

  geometry::Points cloud(std::size_t n) {
    std::normal_distribution<double> g(0.0, 0.5);
    geometry::Points p(static_cast<Eigen::Index>(n), 3);
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (int a = 0; a < 3; ++a) p(i, a) = g(rng_);
    return p;
  }

  network::Model model(network::MatchVariant variant) {
    network::ModelConfig mc;
    mc.feature_dim = kWidth;
    mc.attention_dim = kWidth;
    mc.edge_widths = {8, 8, 16};
    mc.k_nn = 8;
    mc.views = 2;
    mc.resolution = 8;
    mc.keypoints = kKeypoints;
    mc.cnn_channels1 = 4;
    mc.cnn_channels2 = 4;
    mc.head_hidden = 8;
    mc.variant = variant;
    network::Model m = network::Model::create(mc, rng_());
    // Zero biases put activations exactly on the LeakyReLU kink for some
    // inputs, where finite differences are meaningless.
    for (auto& v : m.params.values()) {
      std::normal_distribution<double> g(0.0, 0.1);
      for (double& x : v.mutable_data()) x += g(rng_);
    }
    return m;
  }

  std::vector<Value> params_with_prefix(const network::Model& m, const std::vector<std::string>& prefixes) {
    std::vector<Value> out;
    for (std::size_t i = 0; i < m.params.names().size(); ++i)
      for (const auto& p : prefixes)
        if (m.params.names()[i].rfind(p, 0) == 0) {
          out.push_back(m.params.values()[i]);
          break;
        }
    return out;
  }

  // Random fixed projection so every output element affects the scalar.
  std::function<Value()> project(std::function<Value()> f) {
    const Value probe = f();
    const Value w = constant(probe.rows(), probe.cols());
    return [f, w] { return ad::sum_all(ad::mul(f(), w)); };
  }

  void check(const std::string& name, const std::function<Value()>& f, std::vector<Value> inputs) {
    ad::GradCheckOptions o;
    o.epsilon = opts_.epsilon;
    o.tolerance = opts_.tolerance;
    o.max_probes_per_input = opts_.probes_per_input;
    o.probe_seed = rng_();
    result.entries.push_back({name, ad::grad_check(f, inputs, o)});
  }

  GradSuiteResult result;

 private:
  GradSuiteOptions opts_;
  std::mt19937_64 rng_;
};

void loss_checks(Suite& s) {
  losses::LossConfig cfg;
  {
    // Feature scale chosen so pair distances straddle both margins.
    Value fx = s.param(kPoints, kWidth, 0.2), fy = s.param(kPoints, kWidth, 0.2);
    losses::OverlapPairs pairs;
    for (std::size_t i = 0; i < 20; ++i) {
      pairs.overlap_x.push_back(i);
      pairs.overlap_y.push_back(i + 4);
      pairs.positives.push_back({i, i + 4});
    }
    for (std::size_t i = 20; i < kPoints; ++i) pairs.non_overlap_x.push_back(i);
    for (std::size_t i = 0; i < 4; ++i) pairs.non_overlap_y.push_back(i);
    for (std::size_t i = 24; i < kPoints; ++i) pairs.non_overlap_y.push_back(i);
    s.check("loss.ocl", [=] { return losses::ocl_loss(fx, fy, pairs, cfg); }, {fx, fy});
  }
  {
    Value p = s.param(kBatch, kWidth), i = s.param(kBatch, kWidth);
    s.check("loss.cmcl", [=] { return losses::cmcl_loss(p, i, cfg); }, {p, i});
    losses::LossConfig with_pos = cfg;
    with_pos.include_pos_in_denominator = true;
    s.check("loss.cmcl_infonce", [=] { return losses::cmcl_loss(p, i, with_pos); }, {p, i});
  }
  {
    Value z = s.param(kKeypoints, 1), logits = s.param(kKeypoints, kPoints);
    s.check("loss.mp", [=] { return losses::mp_loss(ad::sigmoid(z), ad::softmax(logits, 1)); }, {z, logits});
  }
  std::vector<double> labels(kKeypoints);
  std::vector<std::size_t> j_star(kKeypoints);
  for (std::size_t i = 0; i < kKeypoints; ++i) {
    labels[i] = (i % 3 == 0) ? 0.0 : 1.0;
    j_star[i] = (7 * i + 3) % kPoints;
  }
  {
    Value z = s.param(kKeypoints, 1);
    s.check("loss.ms", [=] { return losses::ms_loss(ad::sigmoid(z), labels); }, {z});
  }
  {
    Value logits = s.param(kKeypoints, kPoints);
    s.check("loss.cs", [=] { return losses::cs_loss(ad::softmax(logits, 1), labels, j_star); }, {logits});
  }
  {
    Value fx = s.param(kPoints, kWidth, 0.2), fy = s.param(kPoints, kWidth, 0.2);
    Value p = s.param(kBatch, kWidth), img = s.param(kBatch, kWidth);
    Value z = s.param(kKeypoints, 1), logits = s.param(kKeypoints, kPoints);
    losses::OverlapPairs pairs;
    for (std::size_t i = 0; i < 16; ++i) {
      pairs.overlap_x.push_back(i);
      pairs.overlap_y.push_back(i);
      pairs.positives.push_back({i, i});
      pairs.non_overlap_x.push_back(i + 16);
      pairs.non_overlap_y.push_back(i + 16);
    }
    auto f = [=] {
      losses::LossComponents parts;
      const Value m = ad::softmax(logits, 1);
      const Value scores = ad::sigmoid(z);
      parts.ocl = losses::ocl_loss(fx, fy, pairs, cfg);
      parts.cmcl = losses::cmcl_loss(p, img, cfg);
      parts.mp = losses::mp_loss(scores, m);
      for (int n = 0; n < 3; ++n) {
        parts.ms.push_back(losses::ms_loss(scores, labels));
        parts.cs.push_back(losses::cs_loss(m, labels, j_star));
      }
      return losses::total_loss(parts);
    };
    s.check("loss.total", f, {fx, fy, p, img, z, logits});
  }
}

void block_checks(Suite& s) {
  const network::Model m = s.model(network::MatchVariant::kSeparate);
  const double slope = m.config.leaky_slope;
  const geometry::Points px = s.cloud(kPoints), py = s.cloud(kPoints);

  {
    Value feats = s.param(kPoints, 3);
    auto inputs = s.params_with_prefix(m, {"edge0."});
    inputs.push_back(feats);
    s.check("block.edgeconv_layer",
            s.project([=, &m] { return network::edgeconv_layer(feats, m.config.k_nn, m.params, "edge0", slope); }),
            inputs);
  }
  s.check("block.edgeconv_backbone", s.project([=, &m] { return network::edgeconv_backbone(px, m).features; }),
          s.params_with_prefix(m, {"edge"}));
  {
    const auto views = projection::render_views(geometry::PointCloud(px * 0.5), m.config.views, m.config.resolution);
    s.check("block.image_encoder", s.project([=, &m] { return network::image_encoder(views, 1, m).aggregated; }),
            s.params_with_prefix(m, {"cnn."}));
  }
  {
    Value q = s.param(kPoints, kWidth), c = s.param(kPoints, kWidth);
    auto inputs = s.params_with_prefix(m, {"interact."});
    inputs.push_back(q);
    inputs.push_back(c);
    s.check("block.transformer_interact", s.project([=, &m] {
              const auto r = network::transformer_interact({q, FeatureRole::kPoint}, {c, FeatureRole::kPoint}, m);
              return ad::concat({r.source.features, r.target.features}, 0);
            }),
            inputs);
  }
  {
    Value inter = s.param(kPoints, kWidth), img = s.param(1, kWidth);
    auto inputs = s.params_with_prefix(m, {"fuse."});
    inputs.push_back(inter);
    inputs.push_back(img);
    s.check("block.transformer_fuse", s.project([=, &m] {
              return network::transformer_fuse({inter, FeatureRole::kInteraction},
                                               {ad::broadcast_to(img, kPoints, kWidth), FeatureRole::kImage}, m)
                  .features;
            }),
            inputs);
  }
  {
    Value self = s.param(kPoints, kWidth), other = s.param(kPoints, kWidth);
    const Value coords = network::coords_value(px);
    auto inputs = s.params_with_prefix(m, {"mask."});
    inputs.push_back(self);
    inputs.push_back(other);
    s.check("block.mask_predict", s.project([=, &m] {
              const auto r = network::mask_predict({self, FeatureRole::kHybrid}, {other, FeatureRole::kHybrid},
                                                   coords, kKeypoints, m);
              return ad::concat({r.scores, ad::sum(r.selected_features, 1)}, 0);
            }),
            inputs);
  }
  Value kx = s.param(kKeypoints, 3, 0.5), ky = s.param(kKeypoints, 3, 0.5);
  Value fx = s.param(kKeypoints, kWidth), fy = s.param(kKeypoints, kWidth);
  {
    auto inputs = s.params_with_prefix(m, {"cs.coord."});
    inputs.push_back(kx);
    inputs.push_back(ky);
    s.check("block.coordinate_logits", s.project([=, &m] { return network::coordinate_logits(kx, ky, m); }), inputs);
  }
  {
    auto inputs = s.params_with_prefix(m, {"cs.feat."});
    inputs.push_back(fx);
    inputs.push_back(fy);
    s.check("block.feature_logits", s.project([=, &m] { return network::feature_logits(fx, fy, m); }), inputs);
  }
  {
    auto inputs = s.params_with_prefix(m, {"cs."});
    for (const auto& v : {kx, ky, fx, fy}) inputs.push_back(v);
    s.check("block.correspondence_search", s.project([=, &m] {
              const auto r = network::correspondence_search(kx, ky, fx, fy, m);
              return ad::concat({r.matrix, r.scores}, 1);
            }),
            inputs);
    Value logits = s.param(kKeypoints, kKeypoints);
    s.check("block.soft_correspondences",
            s.project([=] { return network::soft_correspondences(ad::softmax(logits, 1), ky); }), {logits, ky});
  }
  {
    const network::Model joint = s.model(network::MatchVariant::kJoint);
    auto inputs = s.params_with_prefix(joint, {"cs."});
    for (const auto& v : {kx, ky, fx, fy}) inputs.push_back(v);
    s.check("block.correspondence_search_joint", s.project([=, &joint] {
              const auto r = network::correspondence_search(kx, ky, fx, fy, joint);
              return ad::concat({r.matrix, r.scores}, 1);
            }),
            inputs);
  }
  {
    const network::Model reg = s.model(network::MatchVariant::kDirectRegression);
    Value a = s.param(kPoints, kWidth), b = s.param(kPoints, kWidth);
    auto inputs = s.params_with_prefix(reg, {"reg."});
    inputs.push_back(a);
    inputs.push_back(b);
    s.check("block.pose_regression", s.project([=, &reg] {
              return network::pose_regression({a, FeatureRole::kHybrid}, {b, FeatureRole::kHybrid}, reg);
            }),
            inputs);
  }
}

}  // namespace

bool GradSuiteResult::passed() const {
  for (const auto& e : entries)
    if (!e.report.passed) return false;
  return !entries.empty();
}

GradSuiteResult run_gradcheck_suite(const GradSuiteOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  Suite s(options);
  loss_checks(s);
  block_checks(s);
  s.result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s.result;
}

void write_gradcheck_csv(const std::filesystem::path& path, const GradSuiteResult& result) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "name,probed,max_rel_error,max_abs_error,passed\n";
  char buf[256];
  for (const auto& e : result.entries) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6e,%.6e,%d\n", e.name.c_str(), e.report.probed, e.report.max_rel_error,
                  e.report.max_abs_error, e.report.passed ? 1 : 0);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace cmig::harness
