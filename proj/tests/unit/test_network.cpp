#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "cmig/errors.hpp"
#include "cmig/network/blocks.hpp"
#include "cmig/network/model.hpp"
#include "cmig/projection.hpp"

using namespace cmig;
using namespace cmig::network;
using ad::Value;
using geometry::Points;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.feature_dim = 16;
  c.attention_dim = 16;
  c.edge_widths = {8, 8, 16};
  c.k_nn = 8;
  c.views = 2;
  c.resolution = 8;
  c.cnn_channels1 = 4;
  c.cnn_channels2 = 4;
  c.head_hidden = 8;
  return c;
}

Points random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  Points p(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = u(rng);
  return p;
}

}  // namespace

TEST(Model, CreateIsDeterministic) {
  const auto a = Model::create(small_config(), 7), b = Model::create(small_config(), 7);
  ASSERT_EQ(a.params.names(), b.params.names());
  for (std::size_t i = 0; i < a.params.values().size(); ++i) {
    const auto x = a.params.values()[i].data(), y = b.params.values()[i].data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
  EXPECT_GT(a.params.element_count(), 0u);
}

TEST(Model, SaveLoadRoundTrip) {
  const auto a = Model::create(small_config(), 1);
  auto b = Model::create(small_config(), 2);
  const auto path = std::filesystem::temp_directory_path() / "cmig_model_test.cmig";
  a.save(path);
  b.load(path);
  for (std::size_t i = 0; i < a.params.values().size(); ++i) {
    const auto x = a.params.values()[i].data(), y = b.params.values()[i].data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin())) << a.params.names()[i];
  }
  std::filesystem::remove(path);
}

TEST(Model, LoadRejectsShapeMismatch) {
  auto cfg = small_config();
  const auto a = Model::create(cfg, 1);
  cfg.feature_dim = 8;
  auto b = Model::create(cfg, 1);
  EXPECT_THROW(b.params.load(a.params.to_tensors()), ContractViolation);
}

TEST(Model, CloneSharesNothing) {
  auto a = Model::create(small_config(), 3);
  const auto b = a.clone();
  a.params.values()[0].mutable_data()[0] += 1.0;
  EXPECT_NE(a.params.values()[0].data()[0], b.params.values()[0].data()[0]);
}

TEST(Model, ConfigValidation) {
  auto cfg = small_config();
  cfg.k_nn = 0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  EXPECT_EQ(small_config().keypoints_for(33), 17u);
  EXPECT_THROW(match_variant_from_string("bogus"), ContractViolation);
  EXPECT_EQ(match_variant_from_string(to_string(MatchVariant::kJoint)), MatchVariant::kJoint);
}

TEST(EdgeConv, PermutingPointsPermutesRows) {
  const auto model = Model::create(small_config(), 4);
  const Points p = random_points(32, 5);
  std::vector<Eigen::Index> perm(32);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(6));
  Points q(32, 3);
  for (Eigen::Index i = 0; i < 32; ++i) q.row(i) = p.row(perm[static_cast<std::size_t>(i)]);
  const auto fp = edgeconv_backbone(p, model).features, fq = edgeconv_backbone(q, model).features;
  ASSERT_EQ(fp.cols(), 16u);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t c = 0; c < fp.cols(); ++c)
      EXPECT_NEAR(fq(i, c), fp(static_cast<std::size_t>(perm[i]), c), 1e-12);
}

TEST(Conv, OutputShape) {
  std::size_t oh = 0, ow = 0;
  const Value img = Value::zeros(8 * 8, 2);
  const Value w = Value::zeros(9 * 2, 3), b = Value::zeros(1, 3);
  const Value out = conv3x3_stride2(img, 8, 8, w, b, oh, ow);
  EXPECT_EQ(oh, 4u);
  EXPECT_EQ(ow, 4u);
  EXPECT_EQ(out.rows(), 16u);
  EXPECT_EQ(out.cols(), 3u);
}

TEST(Conv, CentreTapCopiesInput) {
  // Single channel, weight 1 on the centre tap: output(r, c) = input(2r, 2c).
  std::vector<double> px(16);
  std::iota(px.begin(), px.end(), 1.0);
  const Value img = Value::matrix(16, 1, px);
  std::vector<double> wd(9, 0.0);
  wd[4] = 1.0;
  std::size_t oh = 0, ow = 0;
  const Value out = conv3x3_stride2(img, 4, 4, Value::matrix(9, 1, wd), Value::zeros(1, 1), oh, ow);
  EXPECT_EQ(out.data()[0], 1.0);
  EXPECT_EQ(out.data()[1], 3.0);
  EXPECT_EQ(out.data()[2], 9.0);
  EXPECT_EQ(out.data()[3], 11.0);
}

TEST(ImageEncoder, RowsAreIdentical) {
  const auto model = Model::create(small_config(), 8);
  const auto views = projection::render_views(geometry::PointCloud(random_points(40, 9)), 2, 8);
  const auto f = image_encoder(views, 5, model);
  ASSERT_EQ(f.repeated.rows(), 5u);
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t c = 0; c < f.repeated.width(); ++c)
      EXPECT_EQ(f.repeated.features(i, c), f.aggregated(0, c));
}

TEST(TopK, ExactlyKSelected) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(50);
    for (double& x : s) x = u(rng);
    const std::size_t k = 1 + trial % 50;
    const auto idx = top_k_indices(s, k);
    ASSERT_EQ(idx.size(), k);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    double kept_min = 1.0;
    for (auto i : idx) kept_min = std::min(kept_min, s[i]);
    std::size_t above = 0;
    for (double x : s) above += x > kept_min;
    EXPECT_EQ(above, k - 1);
  }
}

TEST(TopK, TiesToLowerIndex) {
  const std::vector<double> s = {0.5, 0.5, 0.5, 0.1};
  EXPECT_EQ(top_k_indices(s, 2), (std::vector<std::size_t>{0, 1}));
}

TEST(MaskPredict, MaskHasKOnes) {
  const auto model = Model::create(small_config(), 11);
  const Points p = random_points(24, 12);
  const FeatureMap fx{edgeconv_backbone(p, model).features, FeatureRole::kHybrid};
  const FeatureMap fy{edgeconv_backbone(random_points(24, 13), model).features, FeatureRole::kHybrid};
  const auto m = mask_predict(fx, fy, coords_value(p), 10, model);
  EXPECT_EQ(std::count(m.mask.mask.begin(), m.mask.mask.end(), true), 10);
  EXPECT_EQ(m.selected_coords.rows(), 10u);
  EXPECT_EQ(m.selected_scores.rows(), 10u);
}

TEST(Weights, MedianRuleHandValue) {
  const std::vector<double> s = {0.1, 0.2, 0.3, 0.4};
  const auto w = correspondence_weights(s);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[1], 2.0 / 9.0, 1e-15);
  EXPECT_NEAR(w[2], 3.0 / 9.0, 1e-15);
  EXPECT_NEAR(w[3], 4.0 / 9.0, 1e-15);
}

TEST(Weights, DominantScoreConcentrates) {
  const std::vector<double> s = {0.99, 0.01, 0.02, 0.01, 0.03};
  const auto w = correspondence_weights(s);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-15);
  EXPECT_GT(w[0], 0.9);
}

TEST(Correspondence, MatrixRowsAreStochastic) {
  const auto model = Model::create(small_config(), 14);
  const Value px = coords_value(random_points(6, 15)), py = coords_value(random_points(6, 16));
  const Value fx = Value::matrix(6, 16, std::vector<double>(96, 0.1));
  const Value fy = Value::matrix(6, 16, std::vector<double>(96, -0.2));
  const auto r = correspondence_search(px, py, fx, fy, model);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += r.matrix(i, j);
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_GT(r.scores(i, 0), 0.0);
    EXPECT_LT(r.scores(i, 0), 1.0);
  }
  const auto cached = correspondence_search(px, py, fx, fy, model, feature_logits(fx, fy, model));
  EXPECT_EQ(std::vector<double>(cached.matrix.data().begin(), cached.matrix.data().end()),
            std::vector<double>(r.matrix.data().begin(), r.matrix.data().end()));
}

TEST(Correspondence, SoftPointsInsideTargetBox) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<double> logits(5 * 7);
  for (double& x : logits) x = g(rng);
  const Value m = ad::softmax(Value::matrix(5, 7, logits), 1);
  const Points y = random_points(7, 18);
  const Points x = points_from(soft_correspondences(m, coords_value(y)));
  // Convex combinations stay inside the bounding box of the targets.
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(x(i, c), y.col(c).minCoeff() - 1e-12);
      EXPECT_LE(x(i, c), y.col(c).maxCoeff() + 1e-12);
    }
}

TEST(Correspondence, HardPicksArgmax) {
  const Value m = Value::matrix(2, 3, {0.1, 0.7, 0.2, 0.5, 0.2, 0.3});
  Points y(3, 3);
  y << 0, 0, 0, 1, 1, 1, 2, 2, 2;
  const Points x = hard_correspondences(m, y);
  EXPECT_EQ(x(0, 0), 1.0);
  EXPECT_EQ(x(1, 0), 0.0);
}

TEST(PoseRegression, OutputIsProperTransform) {
  auto cfg = small_config();
  cfg.variant = MatchVariant::kDirectRegression;
  const auto model = Model::create(cfg, 19);
  const FeatureMap fx{edgeconv_backbone(random_points(20, 20), model).features, FeatureRole::kHybrid};
  const FeatureMap fy{edgeconv_backbone(random_points(20, 21), model).features, FeatureRole::kHybrid};
  const Value out = pose_regression(fx, fy, model);
  ASSERT_EQ(out.cols(), 7u);
  EXPECT_TRUE(pose_from_regression(out.data()).is_valid(1e-9));
  const std::vector<double> zero_quat = {0, 0, 0, 0, 0.1, 0.2, 0.3};
  const auto t = pose_from_regression(zero_quat);
  EXPECT_TRUE(t.is_valid());
}
