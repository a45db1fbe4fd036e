#include "cmig/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cmig/errors.hpp"
#include "cmig/log.hpp"

namespace cmig::losses {

using ad::Value;

void LossConfig::validate() const {
  if (!(sigma_p > 0.0 && sigma_p < sigma_n)) throw ContractViolation("loss config: require 0 < sigma_p < sigma_n");
  if (!(tau > 0.0)) throw ContractViolation("loss config: tau must be positive");
  if (!(dist_threshold > 0.0) || !(overlap_threshold > 0.0))
    throw ContractViolation("loss config: thresholds must be positive");
}

OverlapPairs overlap_pairs(const geometry::PointCloud& source, const geometry::PointCloud& target,
                           const geometry::RigidTransform& gt, const geometry::OverlapMasks& masks) {
  if (masks.source_overlap.size() != source.size() || masks.target_overlap.size() != target.size())
    throw ContractViolation("overlap_pairs: mask lengths do not match cloud sizes");
  OverlapPairs p;
  for (std::size_t i = 0; i < source.size(); ++i)
    (masks.source_overlap[i] ? p.overlap_x : p.non_overlap_x).push_back(i);
  for (std::size_t j = 0; j < target.size(); ++j)
    (masks.target_overlap[j] ? p.overlap_y : p.non_overlap_y).push_back(j);
  if (p.overlap_x.empty() || p.overlap_y.empty()) return p;

  geometry::Points ty(static_cast<Eigen::Index>(p.overlap_y.size()), 3);
  for (std::size_t j = 0; j < p.overlap_y.size(); ++j)
    ty.row(static_cast<Eigen::Index>(j)) = target.points.row(static_cast<Eigen::Index>(p.overlap_y[j]));
  geometry::Points sx(static_cast<Eigen::Index>(p.overlap_x.size()), 3);
  for (std::size_t i = 0; i < p.overlap_x.size(); ++i)
    sx.row(static_cast<Eigen::Index>(i)) = source.points.row(static_cast<Eigen::Index>(p.overlap_x[i]));
  const auto nn = geometry::nearest(gt.apply(sx), ty);
  for (std::size_t i = 0; i < p.overlap_x.size(); ++i) p.positives.emplace_back(p.overlap_x[i], p.overlap_y[nn.index[i]]);
  return p;
}

namespace {

// Euclidean feature distance for every (a[i], b[j]) in the given pairing.
Value pair_distances(const Value& fa, const Value& fb, const std::vector<std::size_t>& ia,
                     const std::vector<std::size_t>& ib) {
  return ad::l2norm(ad::sub(ad::gather_rows(fa, ia), ad::gather_rows(fb, ib)), 1);
}

// All pairs of the two index sets, flattened.
void cross(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, std::vector<std::size_t>& ia,
           std::vector<std::size_t>& ib) {
  ia.clear();
  ib.clear();
  for (auto i : a)
    for (auto j : b) {
      ia.push_back(i);
      ib.push_back(j);
    }
}

Value push_apart(const Value& fa, const Value& fb, const std::vector<std::size_t>& a,
                 const std::vector<std::size_t>& b, double sigma_n) {
  std::vector<std::size_t> ia, ib;
  cross(a, b, ia, ib);
  const Value d = pair_distances(fa, fb, ia, ib);
  return ad::mean_all(ad::square(ad::relu(ad::add_scalar(ad::neg(d), sigma_n))));
}

Value unit_rows(const Value& x) {
  const Value norms = ad::clamp(ad::l2norm(x, 1), 1e-12, std::numeric_limits<double>::max());
  return ad::div(x, norms);
}

Value diagonal(const Value& square, const Value& eye) { return ad::sum(ad::mul(square, eye), 1); }

Value masked_row_sum(const Value& m, const Value& mask) { return ad::sum(ad::mul(m, mask), 1); }

}  // namespace

Value ocl_loss(const Value& fx, const Value& fy, const OverlapPairs& pairs, const LossConfig& cfg) {
  if (fx.cols() != fy.cols()) throw ContractViolation("ocl_loss: feature widths differ");
  Value loss = Value::scalar(0.0);
  if (pairs.positives.empty()) {
    log_warning("ocl_loss: no positive pairs; positive term omitted");
  } else {
    std::vector<std::size_t> ia, ib;
    for (const auto& [i, j] : pairs.positives) {
      ia.push_back(i);
      ib.push_back(j);
    }
    const Value d = pair_distances(fx, fy, ia, ib);
    loss = ad::add(loss, ad::mean_all(ad::square(ad::relu(ad::add_scalar(d, -cfg.sigma_p)))));
  }
  if (!pairs.overlap_x.empty() && !pairs.non_overlap_y.empty())
    loss = ad::add(loss, push_apart(fx, fy, pairs.overlap_x, pairs.non_overlap_y, cfg.sigma_n));
  if (!pairs.overlap_y.empty() && !pairs.non_overlap_x.empty())
    loss = ad::add(loss, push_apart(fy, fx, pairs.overlap_y, pairs.non_overlap_x, cfg.sigma_n));
  return loss;
}

Value cmcl_loss(const Value& point_vectors, const Value& image_vectors, const LossConfig& cfg) {
  const std::size_t b = point_vectors.rows();
  if (b < 2) throw ContractViolation("cmcl_loss: batch size must be >= 2, got " + std::to_string(b));
  if (image_vectors.rows() != b || image_vectors.cols() != point_vectors.cols())
    throw ContractViolation("cmcl_loss: point and image batches have different shapes");

  std::vector<double> eye_data(b * b, 0.0), off_data(b * b, 1.0);
  for (std::size_t i = 0; i < b; ++i) {
    eye_data[i * b + i] = 1.0;
    off_data[i * b + i] = 0.0;
  }
  const Value eye = Value::matrix(b, b, eye_data);
  const Value off = Value::matrix(b, b, off_data);
  const double inv_tau = 1.0 / cfg.tau;

  const Value p = unit_rows(point_vectors);
  const Value q = unit_rows(image_vectors);
  const Value s_pq = ad::scale(ad::matmul(p, ad::transpose(q)), inv_tau);
  const Value s_qp = ad::transpose(s_pq);
  const Value s_pp = ad::scale(ad::matmul(p, ad::transpose(p)), inv_tau);
  const Value s_qq = ad::scale(ad::matmul(q, ad::transpose(q)), inv_tau);

  // l(b, u, v) = -sim(u_b, v_b)/tau + log(neg_b)
  auto side = [&](const Value& self_sim, const Value& cross_sim) {
    Value neg = ad::add(masked_row_sum(ad::exp(self_sim), off), masked_row_sum(ad::exp(cross_sim), off));
    const Value pos_logit = diagonal(cross_sim, eye);
    if (cfg.include_pos_in_denominator) neg = ad::add(neg, ad::exp(pos_logit));
    return ad::sum_all(ad::sub(ad::log(neg), pos_logit));
  };
  const Value total = ad::add(side(s_pp, s_pq), side(s_qq, s_qp));
  return ad::scale(total, 1.0 / (2.0 * static_cast<double>(b)));
}

Value mp_loss(const Value& mask_scores, const Value& matrix) {
  const std::size_t k = matrix.rows();
  if (mask_scores.rows() != k || mask_scores.cols() != 1)
    throw ContractViolation("mp_loss: expected " + std::to_string(k) + " x 1 mask scores, got " +
                            ad::shape_str(mask_scores.shape()));
  const auto m = matrix.data();
  const std::size_t cols = matrix.cols();
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += m[i * cols + j];
    if (std::abs(s - 1.0) > 1e-6)
      throw ContractViolation("mp_loss: row " + std::to_string(i) + " of the matching matrix sums to " +
                              std::to_string(s));
  }
  const Value safe = ad::clamp(matrix, 1e-300, std::numeric_limits<double>::max());
  const Value plogp = ad::sum(ad::mul(matrix, ad::log(safe)), 1);
  return ad::mean_all(ad::square(ad::sub(mask_scores, plogp)));
}

Value ms_loss(const Value& scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ContractViolation("ms_loss: score and label counts differ");
  constexpr double kEps = 1e-7;
  const Value s = ad::clamp(scores, kEps, 1.0 - kEps);
  const Value y = Value::matrix(labels.size(), 1, {labels.begin(), labels.end()});
  const Value one_minus_y = Value::matrix(labels.size(), 1, [&] {
    std::vector<double> v(labels.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 - labels[i];
    return v;
  }());
  const Value ll = ad::add(ad::mul(y, ad::log(s)), ad::mul(one_minus_y, ad::log(ad::add_scalar(ad::neg(s), 1.0))));
  return ad::neg(ad::mean_all(ll));
}

Value cs_loss(const Value& matrix, std::span<const double> y_hat, std::span<const std::size_t> j_star) {
  const std::size_t k = matrix.rows(), m = matrix.cols();
  if (y_hat.size() != k || j_star.size() != k) throw ContractViolation("cs_loss: label counts differ from rows");
  std::vector<std::size_t> flat(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (j_star[i] >= m) throw ContractViolation("cs_loss: j* index out of range");
    flat[i] = i * m + j_star[i];
  }
  const Value picked = ad::clamp(ad::gather_elements(matrix, flat), 1e-7, std::numeric_limits<double>::max());
  const Value y = Value::matrix(k, 1, {y_hat.begin(), y_hat.end()});
  return ad::scale(ad::sum_all(ad::mul(y, ad::log(picked))), -1.0 / static_cast<double>(k));
}

SupervisionLabels make_labels(const geometry::Points& source_keypoints, const geometry::Points& target_keypoints,
                              const geometry::RigidTransform& gt, double dist_threshold) {
  const auto nn = geometry::nearest(gt.apply(source_keypoints), target_keypoints);
  SupervisionLabels labels;
  labels.j_star = nn.index;
  for (double d : nn.distance) {
    const double hit = d < dist_threshold ? 1.0 : 0.0;
    labels.s_hat.push_back(hit);
    labels.y_hat.push_back(hit);
  }
  return labels;
}

Value total_loss(const LossComponents& parts) {
  Value total = Value::scalar(0.0);
  for (const Value* v : {&parts.ocl, &parts.cmcl, &parts.mp})
    if (v->defined()) total = ad::add(total, *v);
  for (const auto& v : parts.ms)
    if (v.defined()) total = ad::add(total, v);
  for (const auto& v : parts.cs)
    if (v.defined()) total = ad::add(total, v);
  return total;
}

}  // namespace cmig::losses
