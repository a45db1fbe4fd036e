#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmig/autodiff/checkpoint.hpp"
#include "cmig/autodiff/value.hpp"

namespace cmig::network {

/// How the correspondence stage turns keypoints into a pose.
enum class MatchVariant {
  kSeparate,          // coordinate and feature matching matrices, summed
  kJoint,             // one head over the concatenated descriptors
  kDirectRegression,  // pooled features -> pose, no correspondences
};

std::string to_string(MatchVariant v);
MatchVariant match_variant_from_string(const std::string& s);

struct ModelConfig {
  std::size_t feature_dim = 64;    // C
  std::size_t attention_dim = 64;  // C_t
  std::vector<std::size_t> edge_widths = {32, 32, 64};
  std::size_t k_nn = 16;
  std::size_t views = 4;
  std::size_t resolution = 32;
  /// Keypoints per cloud; 0 selects ceil(N / 2).
  std::size_t keypoints = 0;
  std::size_t cnn_channels1 = 8;
  std::size_t cnn_channels2 = 16;
  std::size_t head_hidden = 32;
  double leaky_slope = 0.2;
  MatchVariant variant = MatchVariant::kSeparate;

  std::size_t keypoints_for(std::size_t n_points) const;
  void validate() const;
};

/// Named parameter tensors in insertion order.
class ParamStore {
 public:
  ad::Value& add(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> init);
  const ad::Value& get(const std::string& name) const;
  ad::Value& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<ad::Value>& values() { return values_; }
  const std::vector<ad::Value>& values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t element_count() const;

  void zero_grad();
  std::vector<ad::NamedTensor> to_tensors() const;
  /// Copies data from `tensors`; every stored name must be present with a
  /// matching shape.
  void load(const std::vector<ad::NamedTensor>& tensors);

 private:
  std::vector<std::string> names_;
  std::vector<ad::Value> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Configuration plus every learned tensor of the registration network.
struct Model {
  ModelConfig config;
  ParamStore params;

  /// Fresh parameters, He-uniform weights and zero biases, from `seed`.
  static Model create(const ModelConfig& config, std::uint64_t seed);

  /// Parameter snapshot sharing nothing with this model.
  Model clone() const;

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);
};

}  // namespace cmig::network
