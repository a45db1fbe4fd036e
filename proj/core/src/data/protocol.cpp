#include "cmig/data/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "cmig/data/io.hpp"
#include "cmig/data/synth.hpp"
#include "cmig/errors.hpp"
#include "cmig/geometry/rotation.hpp"

namespace cmig::data {

using geometry::PointCloud;
using geometry::Points;
using geometry::RigidTransform;

namespace {

// Sub-seed streams for make_sample.
enum Stream : std::uint64_t { kRigid = 1, kCropTarget, kCropSource, kNoiseTarget, kNoiseSource, kShuffle };

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::kClean: return "clean";
    case Regime::kPartial: return "partial";
    case Regime::kNoisy: return "noisy";
    case Regime::kLowOverlap: return "low_overlap";
  }
  return "?";
}

Regime regime_from_string(const std::string& name) {
  if (name == "clean") return Regime::kClean;
  if (name == "partial") return Regime::kPartial;
  if (name == "noisy") return Regime::kNoisy;
  if (name == "low_overlap") return Regime::kLowOverlap;
  throw ContractViolation("unknown regime '" + name + "'");
}

void ProtocolConfig::validate() const {
  if (!(rot_range_deg >= 0.0) || !(trans_range >= 0.0)) throw ContractViolation("protocol ranges must be >= 0");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ContractViolation("keep_fraction must be in (0, 1]");
  if (!(noise_sigma >= 0.0)) throw ContractViolation("noise_sigma must be >= 0");
  if (!(noise_clip > 0.0)) throw ContractViolation("noise_clip must be > 0");
}

RigidTransform sample_rigid(std::uint64_t seed, double rot_range_deg, double trans_range) {
  if (!(rot_range_deg >= 0.0) || !(trans_range >= 0.0)) throw ContractViolation("sample_rigid: ranges must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  Eigen::Vector3d zyx;
  for (int a = 0; a < 3; ++a) zyx[a] = angle(rng) * rot_range_deg;
  Eigen::Vector3d t;
  for (int a = 0; a < 3; ++a) t[a] = shift(rng) * trans_range;
  RigidTransform out;
  out.rotation = geometry::euler_to_matrix(zyx);
  out.translation = t;
  return out;
}

std::size_t crop_count(std::size_t n, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ContractViolation("keep_fraction must be in (0, 1]");
  // The small slack keeps 0.75 * 1024 from rounding up to 769.
  const auto k = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

Eigen::Vector3d random_direction(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    const Eigen::Vector3d v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-8) return v.normalized();
  }
}

PointCloud crop_along(const PointCloud& cloud, double keep_fraction, const Eigen::Vector3d& direction) {
  cloud.validate();
  const std::size_t n = cloud.size();
  const std::size_t k = crop_count(n, keep_fraction);
  if (k == n) return cloud;
  const Eigen::Vector3d v = direction.normalized();
  const Eigen::VectorXd proj = cloud.points * v;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proj[static_cast<Eigen::Index>(a)] > proj[static_cast<Eigen::Index>(b)];
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  Points out(static_cast<Eigen::Index>(k), 3);
  for (std::size_t i = 0; i < k; ++i) out.row(static_cast<Eigen::Index>(i)) = cloud.points.row(static_cast<Eigen::Index>(order[i]));
  return PointCloud(std::move(out));
}

PointCloud partial_crop(const PointCloud& cloud, double keep_fraction, std::uint64_t direction_seed) {
  return crop_along(cloud, keep_fraction, random_direction(direction_seed));
}

PointCloud add_noise(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ContractViolation("add_noise: sigma must be >= 0");
  if (!(clip > 0.0)) throw ContractViolation("add_noise: clip must be > 0");
  if (sigma == 0.0) return cloud;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  PointCloud out = cloud;
  for (Eigen::Index i = 0; i < out.points.rows(); ++i)
    for (int a = 0; a < 3; ++a) out.points(i, a) += std::clamp(g(rng), -clip, clip);
  return out;
}

RegistrationSample make_sample(const PointCloud& base, Regime regime, std::uint64_t seed, const ProtocolConfig& cfg) {
  cfg.validate();
  base.validate();
  RegistrationSample s;
  s.regime = regime;
  s.seed = seed;
  s.gt = sample_rigid(mix_seed(seed, kRigid), cfg.rot_range_deg, cfg.trans_range);

  PointCloud tgt = base;
  PointCloud src = base;
  if (regime != Regime::kClean) {
    const Eigen::Vector3d dir_t = random_direction(mix_seed(seed, kCropTarget));
    const Eigen::Vector3d dir_s =
        regime == Regime::kLowOverlap ? random_direction(mix_seed(seed, kCropSource)) : dir_t;
    tgt = crop_along(base, cfg.keep_fraction, dir_t);
    src = crop_along(base, cfg.keep_fraction, dir_s);
  }
  if (regime == Regime::kNoisy || regime == Regime::kLowOverlap) {
    tgt = add_noise(tgt, cfg.noise_sigma, cfg.noise_clip, mix_seed(seed, kNoiseTarget));
    src = add_noise(src, cfg.noise_sigma, cfg.noise_clip, mix_seed(seed, kNoiseSource));
  }

  std::vector<Eigen::Index> perm(src.size());
  std::iota(perm.begin(), perm.end(), 0);
  if (regime != Regime::kClean) {
    std::mt19937_64 rng(mix_seed(seed, kShuffle));
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  const RigidTransform inv = s.gt.inverse();
  Points moved(src.points.rows(), 3);
  for (std::size_t i = 0; i < perm.size(); ++i)
    moved.row(static_cast<Eigen::Index>(i)) = inv.apply(src.point(static_cast<std::size_t>(perm[i]))).transpose();
  s.source = PointCloud(std::move(moved));
  s.target = std::move(tgt);
  return s;
}

void write_sample(const std::filesystem::path& dir, const RegistrationSample& sample) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_xyz(dir / "source.xyz", sample.source);
  write_xyz(dir / "target.xyz", sample.target);
  nlohmann::ordered_json j;
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(sample.gt.rotation(r, c));
  j["rotation"] = rot;
  j["translation"] = {sample.gt.translation.x(), sample.gt.translation.y(), sample.gt.translation.z()};
  j["regime"] = to_string(sample.regime);
  j["seed"] = sample.seed;
  std::ofstream os(dir / "sample.json");
  if (!os) throw IoError("cannot write " + (dir / "sample.json").string());
  os << std::setprecision(17) << j.dump(2) << '\n';
}

RegistrationSample read_sample(const std::filesystem::path& dir) {
  std::ifstream is(dir / "sample.json");
  if (!is) throw IoError("cannot open " + (dir / "sample.json").string());
  RegistrationSample s;
  try {
    const auto j = nlohmann::json::parse(is);
    const auto rot = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    if (rot.size() != 9 || t.size() != 3) throw ParseError("sample.json: rotation needs 9 values, translation 3");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) s.gt.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
    s.gt.translation = Eigen::Vector3d(t[0], t[1], t[2]);
    s.regime = regime_from_string(j.at("regime").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sample.json: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("sample.json: ") + e.what());
  }
  if (!s.gt.is_valid(1e-6)) throw ParseError("sample.json: rotation is not a proper rotation");
  s.source = read_xyz(dir / "source.xyz");
  s.target = read_xyz(dir / "target.xyz");
  return s;
}

}  // namespace cmig::data
