#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmig/data/synth.hpp"
#include "cmig/errors.hpp"
#include "cmig/geometry/metrics.hpp"
#include "cmig/geometry/neighbors.hpp"
#include "cmig/geometry/rotation.hpp"
#include "cmig/harness/ablation.hpp"
#include "cmig/harness/config.hpp"
#include "cmig/harness/evaluation.hpp"
#include "cmig/harness/gradcheck_suite.hpp"
#include "cmig/harness/pipeline.hpp"
#include "cmig/harness/training.hpp"

using namespace cmig;
using namespace cmig::harness;
using ad::Value;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.model.feature_dim = 16;
  c.model.attention_dim = 16;
  c.model.edge_widths = {8, 8, 16};
  c.model.k_nn = 8;
  c.model.views = 2;
  c.model.resolution = 8;
  c.model.cnn_channels1 = 4;
  c.model.cnn_channels2 = 4;
  c.model.head_hidden = 8;
  c.data.n_points = 32;
  c.data.shape_count = 3;
  c.data.eval_samples = 4;
  c.train.steps = 2;
  c.train.batch_size = 2;
  c.eval.icp = false;
  return c;
}

// One-hot rows pairing each source keypoint with the target keypoint
// nearest to it under `gt`. Only exact on the first iteration, where the
// keypoints have not moved yet.
MatchOverride oracle(const geometry::RigidTransform& gt) {
  return [gt](std::size_t, const geometry::Points& src, const geometry::Points& tgt) {
    const auto nn = geometry::nearest(gt.apply(src), tgt);
    const std::size_t k = static_cast<std::size_t>(src.rows()), m = static_cast<std::size_t>(tgt.rows());
    std::vector<double> data(k * m, 0.0);
    for (std::size_t i = 0; i < k; ++i) data[i * m + nn.index[i]] = 1.0;
    return Value::matrix(k, m, data);
  };
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  RunConfig c = small_config();
  c.seed = 42;
  c.toggles.mcl = false;
  c.model.variant = network::MatchVariant::kJoint;
  c.data.shapes = {"sphere", "torus"};
  c.optimizer.milestones = {3, 9};
  c.eval.iteration_sweep = {1, 2};
  const std::string text = to_json(c);
  EXPECT_EQ(to_json(from_json(text)), text);
  EXPECT_EQ(config_hash(from_json(text)), config_hash(c));
  c.seed = 43;
  EXPECT_NE(config_hash(c), config_hash(from_json(text)));
}

TEST(Config, PartialJsonKeepsDefaults) {
  const auto c = from_json(R"({"seed": 5, "train": {"steps": 7}})");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.train.steps, 7u);
  EXPECT_EQ(c.n_iter, RunConfig{}.n_iter);
}

TEST(Config, UnknownKeyIsContractViolation) {
  EXPECT_THROW(from_json(R"({"sed": 5})"), ContractViolation);
  EXPECT_THROW(from_json(R"({"train": {"stepz": 5}})"), ContractViolation);
}

TEST(Config, MalformedJsonIsParseError) {
  EXPECT_THROW(from_json("{\"seed\": "), ParseError);
  EXPECT_THROW(from_json(R"({"seed": "five"})"), ContractViolation);
  EXPECT_THROW(from_json("[1, 2]"), ContractViolation);
  EXPECT_THROW(load_config("/nonexistent/cmig.json"), IoError);
}

TEST(Config, ImageFeaturesNeedProjection) {
  RunConfig c;
  c.projection.enabled = false;
  EXPECT_THROW(c.validate(), ContractViolation);
  c.toggles.cmd = false;
  c.toggles.mcl = false;
  EXPECT_NO_THROW(c.validate());
}

TEST(Pipeline, OracleMatchesRecoverGroundTruth) {
  const RunConfig cfg = small_config();
  const auto model = initial_model(cfg);
  const auto base = data::synth_shape(data::ShapeKind::kGaussianBlobs, 32, 1);
  for (auto regime : {data::Regime::kClean, data::Regime::kPartial}) {
    const auto s = data::make_sample(base, regime, 2, {});
    auto opts = pipeline_options(cfg);
    opts.n_iter = 1;
    opts.toggles.mp = false;  // keep every point so each source point has its partner
    opts.match_override = oracle(s.gt);
    const auto r = run_pipeline(model, s.source, s.target, opts);
    EXPECT_LT(geometry::rotation_angle_deg(r.transform.rotation, s.gt.rotation), 1e-6);
    EXPECT_LT((r.transform.translation - s.gt.translation).norm(), 1e-9);
    EXPECT_FALSE(r.degenerate);
  }
}

TEST(Pipeline, IdentityIsFixedPoint) {
  const RunConfig cfg = small_config();
  const auto model = initial_model(cfg);
  const auto cloud = data::synth_shape(data::ShapeKind::kGaussianBlobs, 32, 3);
  auto opts = pipeline_options(cfg);
  opts.toggles.mp = false;
  opts.match_override = oracle(geometry::RigidTransform::identity());
  const auto r = run_pipeline(model, cloud, cloud, opts);
  ASSERT_EQ(r.iterations.size(), 3u);
  for (const auto& it : r.iterations) {
    EXPECT_LT(geometry::rotation_angle_deg(it.accumulated.rotation, Eigen::Matrix3d::Identity()), 1e-9);
    EXPECT_LT(it.accumulated.translation.norm(), 1e-12);
  }
}

TEST(Pipeline, TogglesShapeTheForwardPass) {
  RunConfig cfg = small_config();
  const auto model = initial_model(cfg);
  const auto s = data::make_sample(data::synth_shape(data::ShapeKind::kGaussianBlobs, 32, 4), data::Regime::kNoisy, 5, {});

  auto full = run_pipeline(model, s.source, s.target, pipeline_options(cfg));
  EXPECT_TRUE(full.image_vector.defined());
  EXPECT_EQ(static_cast<std::size_t>(full.keypoints_x.rows()), cfg.model.keypoints_for(s.source.size()));
  EXPECT_EQ(full.iterations.size(), 3u);
  EXPECT_TRUE(full.transform.is_valid(1e-9));

  auto opts = pipeline_options(cfg);
  opts.toggles.cmd = false;
  opts.toggles.mp = false;
  const auto bare = run_pipeline(model, s.source, s.target, opts);
  EXPECT_FALSE(bare.image_vector.defined());
  EXPECT_EQ(static_cast<std::size_t>(bare.keypoints_x.rows()), s.source.size());

  cfg.model.variant = network::MatchVariant::kDirectRegression;
  const auto reg_model = initial_model(cfg);
  const auto reg = run_pipeline(reg_model, s.source, s.target, pipeline_options(cfg));
  EXPECT_TRUE(reg.regression.defined());
  EXPECT_TRUE(reg.iterations.empty());
}

TEST(Pipeline, IsDeterministic) {
  const RunConfig cfg = small_config();
  const auto model = initial_model(cfg);
  const auto s = data::make_sample(data::synth_shape(data::ShapeKind::kGaussianBlobs, 32, 6), data::Regime::kNoisy, 7, {});
  const auto a = run_pipeline(model, s.source, s.target, pipeline_options(cfg));
  const auto b = run_pipeline(model, s.source, s.target, pipeline_options(cfg));
  EXPECT_EQ(a.transform.rotation, b.transform.rotation);
  EXPECT_EQ(a.transform.translation, b.transform.translation);
}

TEST(Training, TotalIsSumOfComponents) {
  const RunConfig cfg = small_config();
  const auto model = initial_model(cfg);
  const auto set = make_training_set(cfg);
  const std::vector<const data::RegistrationSample*> batch = {&set[0], &set[1]};
  const auto loss = batch_loss(model, batch, cfg);
  const auto& v = loss.values;
  EXPECT_NEAR(v.total, v.ocl + v.cmcl + v.mp + v.ms + v.cs + v.pose, 1e-9);
  EXPECT_DOUBLE_EQ(loss.total.item(), v.total);
  EXPECT_TRUE(std::isfinite(v.total));
}

TEST(Training, ZeroStepsLeavesModelUntouched) {
  RunConfig cfg = small_config();
  cfg.train.steps = 0;
  auto model = initial_model(cfg);
  const auto before = model.params.to_tensors();
  EXPECT_TRUE(train(model, cfg).empty());
  const auto after = model.params.to_tensors();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i].data, after[i].data);
}

TEST(Training, RunsAreDeterministic) {
  const RunConfig cfg = small_config();
  auto a = initial_model(cfg), b = initial_model(cfg);
  const auto ra = train(a, cfg), rb = train(b, cfg);
  ASSERT_EQ(ra.size(), 2u);
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(ra[i].total, rb[i].total);
  EXPECT_EQ(a.params.to_tensors()[0].data, b.params.to_tensors()[0].data);
}

TEST(Training, StepChangesParametersAndLogs) {
  const RunConfig cfg = small_config();
  auto model = initial_model(cfg);
  const auto before = model.params.to_tensors();
  std::size_t calls = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const LossRow& r) { EXPECT_EQ(r.step, ++calls); };
  const auto rows = train(model, cfg, hooks);
  EXPECT_EQ(calls, 2u);
  EXPECT_DOUBLE_EQ(rows[0].lr, cfg.optimizer.lr);
  EXPECT_NE(before[0].data, model.params.to_tensors()[0].data);

  const auto path = std::filesystem::temp_directory_path() / "cmig_losses_test.csv";
  write_losses_csv(path, rows);
  const std::string text = slurp(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,epoch,lr,ocl,cmcl,mp,ms,cs,pose,total");
  std::filesystem::remove(path);
}

TEST(Training, RegressionVariantUsesPoseLoss) {
  RunConfig cfg = small_config();
  cfg.model.variant = network::MatchVariant::kDirectRegression;
  auto model = initial_model(cfg);
  const auto rows = train(model, cfg);
  EXPECT_GT(rows[0].pose, 0.0);
  EXPECT_EQ(rows[0].cs, 0.0);
}

TEST(Evaluation, OracleGivesNearZeroMetrics) {
  RunConfig cfg = small_config();
  cfg.data.eval_regime = "clean";
  const auto model = initial_model(cfg);
  const auto samples = make_eval_set(cfg);
  ASSERT_EQ(samples.size(), 4u);
  for (const auto& s : samples) {
    auto opts = pipeline_options(cfg);
    opts.n_iter = 1;
    opts.toggles.mp = false;
    opts.match_override = oracle(s.gt);
    const std::vector<data::RegistrationSample> one = {s};
    const auto r = evaluate(model, one, opts);
    EXPECT_LT(r.aggregate.rmse_rot_deg, 1e-5);
    EXPECT_LT(r.aggregate.mae_trans, 1e-5);
  }
}

TEST(Evaluation, WorkersDoNotChangeResults) {
  const RunConfig cfg = small_config();
  const auto model = initial_model(cfg);
  const auto samples = make_eval_set(cfg);
  const auto a = evaluate(model, samples, pipeline_options(cfg), 1);
  const auto b = evaluate(model, samples, pipeline_options(cfg), 3, 2);
  EXPECT_EQ(format_error_row(a.aggregate), format_error_row(b.aggregate));
  EXPECT_THROW(evaluate(model, samples, pipeline_options(cfg), 0), ContractViolation);
}

TEST(Evaluation, SweepMatchesSeparateRuns) {
  const RunConfig cfg = small_config();
  const auto model = initial_model(cfg);
  const auto samples = make_eval_set(cfg);
  const std::vector<std::size_t> ns = {1, 3};
  const auto sweep = sweep_iterations(model, samples, pipeline_options(cfg), ns, 2);
  ASSERT_EQ(sweep.size(), 2u);
  for (std::size_t v = 0; v < ns.size(); ++v) {
    auto opts = pipeline_options(cfg);
    opts.n_iter = ns[v];
    const auto single = evaluate(model, samples, opts);
    EXPECT_EQ(sweep[v].n_iter, ns[v]);
    EXPECT_EQ(format_error_row(sweep[v].aggregate), format_error_row(single.aggregate));
  }
}

TEST(Evaluation, MetricsCsvHeaderAndAggregation) {
  EvalReport r;
  SampleResult a, b;
  a.error.rmse_rot_deg = 3.0;
  b.error.rmse_rot_deg = 4.0;
  a.error.mae_rot_deg = 1.0;
  b.error.mae_rot_deg = 2.0;
  r.samples = {a, b};
  const auto agg = aggregate(r.samples);
  EXPECT_DOUBLE_EQ(agg.rmse_rot_deg, std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(agg.mae_rot_deg, 1.5);
  r.aggregate = agg;
  const auto path = std::filesystem::temp_directory_path() / "cmig_metrics_test.csv";
  write_metrics_csv(path, r);
  const std::string text = slurp(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), "RMSE_R,MAE_R,RMSE_t,MAE_t");
  std::filesystem::remove(path);
}

TEST(Evaluation, IcpOnCleanSmallRotation) {
  RunConfig cfg = small_config();
  cfg.data.eval_regime = "clean";
  cfg.data.protocol.rot_range_deg = 5.0;
  cfg.data.protocol.trans_range = 0.0;
  cfg.data.n_points = 96;
  const auto r = evaluate_icp(make_eval_set(cfg));
  EXPECT_LT(r.mean_rotation_deg, 0.1);
}

TEST(Ablation, TogglePresets) {
  EXPECT_EQ(toggles_label(parse_toggles("all")), "all");
  const auto t = parse_toggles("no_cmd");
  EXPECT_FALSE(t.cmd);
  EXPECT_TRUE(t.tf && t.mcl && t.mp);
  const auto s = parse_toggles("tf+mp");
  EXPECT_TRUE(s.tf && s.mp);
  EXPECT_FALSE(s.cmd || s.mcl);
  EXPECT_FALSE(parse_toggles("none").tf);
  EXPECT_THROW(parse_toggles("no_xyz"), ContractViolation);
}

TEST(Ablation, Axes) {
  const auto a = parse_axes(R"({"n_iter": [1, 3], "toggles": ["all"], "seed": [0, 1]})");
  EXPECT_EQ(a.n_iter, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(a.seed.size(), 2u);
  EXPECT_THROW(parse_axes(R"({"lr": [1]})"), ContractViolation);
  EXPECT_THROW(parse_axes("[1"), ParseError);
}

TEST(Ablation, GridOrderAndSharedSamples) {
  RunConfig cfg = small_config();
  cfg.train.steps = 0;
  AblationAxes axes;
  axes.seed = {0, 1};
  axes.toggles = {"all", "no_cmd"};
  std::size_t seen = 0;
  const auto rows = ablate(cfg, axes, [&](const AblationRow&) { ++seen; });
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(seen, 4u);
  EXPECT_EQ(rows[0].config.seed, 0u);
  EXPECT_EQ(rows[1].config.seed, 0u);
  EXPECT_TRUE(rows[0].config.toggles.cmd);
  EXPECT_FALSE(rows[1].config.toggles.cmd);
  EXPECT_EQ(rows[2].config.seed, 1u);
}

TEST(GradSuite, EveryCheckPasses) {
  const auto r = run_gradcheck_suite();
  EXPECT_GE(r.entries.size(), 19u);
  for (const auto& e : r.entries) EXPECT_TRUE(e.report.passed) << e.name << " " << e.report.max_rel_error;
  EXPECT_TRUE(r.passed());
  EXPECT_LT(r.seconds, 120.0);
}
