#include "cmig/harness/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <Eigen/Geometry>

#include "cmig/autodiff/adam.hpp"
#include "cmig/data/synth.hpp"
#include "cmig/errors.hpp"
#include "cmig/geometry/neighbors.hpp"
#include "cmig/log.hpp"

namespace cmig::harness {

using ad::Value;
using data::RegistrationSample;

namespace {

// Seed streams derived from RunConfig::seed.
enum Stream : std::uint64_t { kShape = 100, kTrainSample = 1000, kEvalSample = 50000, kShuffle = 90000 };

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw DomainError(std::string("training: non-finite ") + name + " loss");
}

Value pose_loss(const Value& raw, const geometry::RigidTransform& gt) {
  const std::vector<std::size_t> qi = {0, 1, 2, 3}, ti = {4, 5, 6};
  const Value q = ad::gather_elements(raw, qi);
  const Value t = ad::gather_elements(raw, ti);
  const Value qn = ad::div(q, ad::add_scalar(ad::l2norm(q, 0), 1e-12));
  Eigen::Quaterniond g(gt.rotation);
  const Eigen::Vector4d qv(qn(0, 0), qn(1, 0), qn(2, 0), qn(3, 0));
  Eigen::Vector4d gv(g.w(), g.x(), g.y(), g.z());
  if (qv.dot(gv) < 0.0) gv = -gv;  // q and -q are the same rotation
  const Value qt = Value::matrix(4, 1, {gv[0], gv[1], gv[2], gv[3]});
  const Value tt = Value::matrix(3, 1, {gt.translation.x(), gt.translation.y(), gt.translation.z()});
  return ad::add(ad::sum_all(ad::square(ad::sub(qn, qt))), ad::sum_all(ad::square(ad::sub(t, tt))));
}

}  // namespace

std::vector<geometry::PointCloud> training_shapes(const RunConfig& cfg) {
  std::vector<geometry::PointCloud> out;
  if (cfg.data.shapes.empty()) {
    for (std::size_t i = 0; i < cfg.data.shape_count; ++i)
      out.push_back(data::synth_shape(data::ShapeKind::kGaussianBlobs, cfg.data.n_points,
                                      data::mix_seed(cfg.seed, kShape + i)));
    return out;
  }
  for (std::size_t i = 0; i < cfg.data.shapes.size(); ++i)
    out.push_back(data::synth_shape(data::shape_from_string(cfg.data.shapes[i]), cfg.data.n_points,
                                    data::mix_seed(cfg.seed, kShape + i)));
  return out;
}

Dataset make_training_set(const RunConfig& cfg, std::size_t epoch) {
  const auto shapes = training_shapes(cfg);
  const auto regime = data::regime_from_string(cfg.data.train_regime);
  const std::size_t round = cfg.train.resample_each_epoch ? epoch : 0;
  Dataset out;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto seed = data::mix_seed(data::mix_seed(cfg.seed, kTrainSample + i), round);
    out.push_back(data::make_sample(shapes[i], regime, seed, cfg.data.protocol));
  }
  return out;
}

network::Model initial_model(const RunConfig& cfg) {
  return network::Model::create(cfg.model, data::mix_seed(cfg.seed, 1));
}

Dataset make_eval_set(const RunConfig& cfg) {
  const auto shapes = training_shapes(cfg);
  const auto regime = data::regime_from_string(cfg.data.eval_regime);
  Dataset out;
  for (std::size_t j = 0; j < cfg.data.eval_samples; ++j)
    out.push_back(data::make_sample(shapes[j % shapes.size()], regime, data::mix_seed(cfg.seed, kEvalSample + j),
                                    cfg.data.protocol));
  return out;
}

SampleLoss sample_loss(const PipelineResult& fw, const RegistrationSample& s, const RunConfig& cfg) {
  SampleLoss out;
  if (cfg.toggles.mcl) {
    const auto masks = geometry::overlap_select(s.source, s.target, s.gt, cfg.loss.overlap_threshold);
    const auto pairs = losses::overlap_pairs(s.source, s.target, s.gt, masks);
    out.ocl = losses::ocl_loss(fw.point_x.features, fw.point_y.features, pairs, cfg.loss);
  }
  if (cfg.model.variant == network::MatchVariant::kDirectRegression) {
    out.pose = pose_loss(fw.regression, s.gt);
    return out;
  }
  if (fw.iterations.empty()) return out;
  if (cfg.toggles.mp) {
    const Value& m = fw.iterations.back().matrix;
    out.mp = losses::mp_loss(fw.mask_x.selected_scores, cfg.loss.mp_through_matrix ? m : m.detach());
  }
  const auto labels = losses::make_labels(fw.keypoints_x, fw.keypoints_y, s.gt, cfg.loss.dist_threshold);
  for (const auto& it : fw.iterations) {
    out.ms.push_back(losses::ms_loss(it.scores, labels.s_hat));
    out.cs.push_back(losses::cs_loss(it.matrix, labels.y_hat, labels.j_star));
  }
  return out;
}

BatchLoss batch_loss(const network::Model& model, std::span<const RegistrationSample* const> batch,
                     const RunConfig& cfg) {
  if (batch.empty()) throw ContractViolation("batch_loss: empty batch");
  auto options = pipeline_options(cfg);
  options.hard_correspondences = false;  // soft correspondences while training
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  std::vector<Value> per_sample, point_vectors, image_vectors;
  BatchLoss out;
  for (const RegistrationSample* s : batch) {
    const PipelineResult fw = run_pipeline(model, s->source, s->target, options);
    const SampleLoss sl = sample_loss(fw, *s, cfg);
    std::vector<Value> terms;
    auto take = [&](const Value& v, double& slot) {
      if (!v.defined()) return;
      slot += v.item() * inv_b;
      terms.push_back(v);
    };
    take(sl.ocl, out.values.ocl);
    take(sl.mp, out.values.mp);
    for (const auto& v : sl.ms) take(v, out.values.ms);
    for (const auto& v : sl.cs) take(v, out.values.cs);
    take(sl.pose, out.values.pose);
    if (!terms.empty()) per_sample.push_back(ad::sum_all(ad::concat(std::span<const Value>(terms), 0)));
    if (cfg.toggles.mcl && cfg.toggles.cmd) {
      point_vectors.push_back(
          ad::scale(ad::add(ad::max_reduce(fw.point_x.features, 0), ad::max_reduce(fw.point_y.features, 0)), 0.5));
      image_vectors.push_back(fw.image_vector);
    }
  }

  std::vector<Value> parts;
  if (!per_sample.empty()) parts.push_back(ad::scale(ad::sum_all(ad::concat(std::span<const Value>(per_sample), 0)), inv_b));
  if (point_vectors.size() >= 2) {
    const Value cmcl = losses::cmcl_loss(ad::concat(std::span<const Value>(point_vectors), 0),
                                         ad::concat(std::span<const Value>(image_vectors), 0), cfg.loss);
    out.values.cmcl = cmcl.item();
    parts.push_back(cmcl);
  }
  if (parts.empty()) throw ContractViolation("batch_loss: every loss component is switched off");
  out.total = parts.size() == 1 ? parts[0] : ad::add(parts[0], parts[1]);
  out.values.total = out.total.item();

  require_finite(out.values.ocl, "OCL");
  require_finite(out.values.cmcl, "CMCL");
  require_finite(out.values.mp, "MP");
  require_finite(out.values.ms, "MS");
  require_finite(out.values.cs, "CS");
  require_finite(out.values.pose, "pose");
  require_finite(out.values.total, "total");
  return out;
}

std::vector<LossRow> train(network::Model& model, const RunConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  std::vector<LossRow> curve;
  if (cfg.train.steps == 0) return curve;

  std::vector<ad::AdamState> states;
  std::size_t epoch = 0;
  Dataset set = make_training_set(cfg, 0);
  if (set.empty()) throw ContractViolation("train: empty training set");
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  auto reshuffle = [&] {
    order.resize(set.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(data::mix_seed(cfg.seed, kShuffle + epoch));
    std::shuffle(order.begin(), order.end(), rng);
    cursor = 0;
  };
  reshuffle();

  for (std::size_t step = 0; step < cfg.train.steps; ++step) {
    if (cursor >= order.size()) {
      ++epoch;
      if (cfg.train.resample_each_epoch) set = make_training_set(cfg, epoch);
      reshuffle();
    }
    std::vector<const RegistrationSample*> batch;
    for (std::size_t b = 0; b < cfg.train.batch_size; ++b) batch.push_back(&set[order[(cursor + b) % order.size()]]);
    cursor += cfg.train.batch_size;

    ad::AdamConfig adam{ad::scheduled_lr(cfg.optimizer.lr, epoch, cfg.optimizer.milestones, cfg.optimizer.factor),
                        cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.eps};
    model.params.zero_grad();
    BatchLoss loss = batch_loss(model, batch, cfg);
    ad::backward(loss.total);
    ad::adam_step(model.params.values(), states, adam);

    loss.values.step = step + 1;
    loss.values.epoch = epoch;
    loss.values.lr = adam.lr;
    curve.push_back(loss.values);
    if (hooks.on_step) hooks.on_step(loss.values);
    if (!hooks.checkpoint_path.empty() && cfg.train.checkpoint_every > 0 && (step + 1) % cfg.train.checkpoint_every == 0)
      model.save(hooks.checkpoint_path);
  }
  if (!hooks.checkpoint_path.empty()) model.save(hooks.checkpoint_path);
  return curve;
}

void write_losses_csv(const std::filesystem::path& path, std::span<const LossRow> rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "step,epoch,lr,ocl,cmcl,mp,ms,cs,pose,total\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.epoch, r.lr,
                  r.ocl, r.cmcl, r.mp, r.ms, r.cs, r.pose, r.total);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace cmig::harness
