#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dmrac/numerics.hpp"

namespace dmrac {

/// One tanh layer: a = tanh(weights * input + bias).
struct DenseLayer {
  Mat weights;  // out x in
  Vec bias;     // out

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

/// Fully connected network x -> Phi(x) -> theta_n^T Phi(x).
///
/// Every hidden layer uses tanh; the output layer is linear and stored as a
/// k x m matrix so that the controller can treat it exactly like the outer
/// adaptive weights W. The last hidden layer width k is the feature dimension.
class FeatureNetwork {
 public:
  FeatureNetwork(std::vector<DenseLayer> inner, Mat output);

  /// Inner weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases,
  /// zero output layer. layer_dims = [n, h_1, ..., k].
  static FeatureNetwork initialize(const std::vector<Eigen::Index>& layer_dims,
                                   Eigen::Index output_dim, Rng& rng);

  Eigen::Index input_dim() const { return inner_.front().in_dim(); }
  Eigen::Index feature_dim() const { return inner_.back().out_dim(); }
  Eigen::Index output_dim() const { return output_.cols(); }
  std::vector<Eigen::Index> layer_dims() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& inner_layers() const { return inner_; }
  const Mat& output_layer() const { return output_; }

  FeatureNetwork with_output_layer(Mat output) const;

  friend bool operator==(const FeatureNetwork& a, const FeatureNetwork& b);

 private:
  std::vector<DenseLayer> inner_;
  Mat output_;  // k x m
};

/// M column-stacked pairs: inputs is n x M, targets is m x M.
struct TrainBatch {
  Mat inputs;
  Mat targets;

  Eigen::Index size() const { return inputs.cols(); }
};

struct SgdConfig {
  double learning_rate = 0.01;
  int epochs = 10;
  int minibatch = 8;
};

/// Same shape as the network parameters.
struct NetworkGradient {
  std::vector<DenseLayer> inner;
  Mat output;

  double squared_norm() const;
};

Vec forward_features(const FeatureNetwork& net, const Vec& x);
Vec forward_output(const FeatureNetwork& net, const Vec& x);

/// (1/M) sum_i ||y_i - f(x_i)||^2
double batch_loss(const FeatureNetwork& net, const TrainBatch& batch);

/// Exact gradient of batch_loss by reverse-mode accumulation.
NetworkGradient batch_gradient(const FeatureNetwork& net, const TrainBatch& batch);

FeatureNetwork apply_gradient(const FeatureNetwork& net, const NetworkGradient& grad,
                              double learning_rate);

FeatureNetwork sgd_step(const FeatureNetwork& net, const TrainBatch& batch,
                        double learning_rate);

/// Replaces the inner layers, keeping the output layer. The replacement must
/// preserve the input and feature dimensions.
FeatureNetwork swap_features(const FeatureNetwork& net, std::vector<DenseLayer> new_inner);

/// FNV-1a over the raw parameter bytes; used to tag published snapshots.
std::uint64_t fingerprint(const FeatureNetwork& net);

// Binary format: "DMRN", u32 version, u32 layer count L (hidden + output),
// u32 dims[L + 1] = [n, h_1, ..., k, m], then per hidden layer an
// out x (in + 1) row-major block with the bias as last column, then the
// k x m output layer row-major. All values little-endian.
inline constexpr std::uint32_t kNetworkFormatVersion = 1;

namespace debug {
/// Test hook: perturbs one entry of every batch_gradient result so that the
/// invariant suite can demonstrate it detects a broken backward pass.
void set_gradient_fault(bool enabled);
bool gradient_fault_enabled();
}  // namespace debug

void save_network(const FeatureNetwork& net, const std::filesystem::path& path);
FeatureNetwork load_network(const std::filesystem::path& path);

}  // namespace dmrac
