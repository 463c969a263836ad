#include "dmrac/deepnet.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>

namespace dmrac {

namespace debug {
namespace {
std::atomic<bool> g_gradient_fault{false};
}  // namespace

void set_gradient_fault(bool enabled) { g_gradient_fault = enabled; }
bool gradient_fault_enabled() { return g_gradient_fault; }
}  // namespace debug

namespace {

void check_finite(const FeatureNetwork& net) {
  for (const DenseLayer& l : net.inner_layers()) {
    if (!all_finite(l.weights) || !all_finite(l.bias)) {
      throw Error(ErrorCode::ValidationError, "network weights must be finite");
    }
  }
  if (!all_finite(net.output_layer())) {
    throw Error(ErrorCode::ValidationError, "network output layer must be finite");
  }
}

void check_batch(const FeatureNetwork& net, const TrainBatch& batch) {
  if (batch.size() == 0) throw Error(ErrorCode::EmptyBatch, "training batch is empty");
  if (batch.inputs.rows() != net.input_dim() || batch.targets.rows() != net.output_dim() ||
      batch.targets.cols() != batch.inputs.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "training batch does not match network shape");
  }
}

// Activations of every hidden layer for column-stacked inputs.
std::vector<Mat> forward_all(const FeatureNetwork& net, const Mat& inputs) {
  std::vector<Mat> acts;
  acts.reserve(net.inner_layers().size() + 1);
  acts.push_back(inputs);
  for (const DenseLayer& l : net.inner_layers()) {
    Mat z = l.weights * acts.back();
    z.colwise() += l.bias;
    acts.push_back(z.array().tanh().matrix());
  }
  return acts;
}

}  // namespace

FeatureNetwork::FeatureNetwork(std::vector<DenseLayer> inner, Mat output)
    : inner_(std::move(inner)), output_(std::move(output)) {
  if (inner_.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "network needs at least one hidden layer");
  }
  for (std::size_t i = 0; i < inner_.size(); ++i) {
    const DenseLayer& l = inner_[i];
    if (l.bias.size() != l.out_dim() || l.in_dim() == 0 || l.out_dim() == 0) {
      throw Error(ErrorCode::DimensionMismatch, "hidden layer bias/weight shape");
    }
    if (i > 0 && l.in_dim() != inner_[i - 1].out_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "consecutive hidden layers do not chain");
    }
  }
  if (output_.rows() != feature_dim() || output_.cols() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "output layer must be k x m");
  }
}

FeatureNetwork FeatureNetwork::initialize(const std::vector<Eigen::Index>& layer_dims,
                                          Eigen::Index output_dim, Rng& rng) {
  if (layer_dims.size() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "layer_dims needs input and feature widths");
  }
  std::vector<DenseLayer> inner;
  for (std::size_t i = 1; i < layer_dims.size(); ++i) {
    const Eigen::Index in = layer_dims[i - 1];
    const Eigen::Index out = layer_dims[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer l{Mat(out, in), Vec::Zero(out)};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = rng.uniform(-bound, bound);
    inner.push_back(std::move(l));
  }
  return FeatureNetwork(std::move(inner), Mat::Zero(layer_dims.back(), output_dim));
}

std::vector<Eigen::Index> FeatureNetwork::layer_dims() const {
  std::vector<Eigen::Index> dims{input_dim()};
  for (const DenseLayer& l : inner_) dims.push_back(l.out_dim());
  return dims;
}

std::size_t FeatureNetwork::parameter_count() const {
  std::size_t count = static_cast<std::size_t>(output_.size());
  for (const DenseLayer& l : inner_) count += l.weights.size() + l.bias.size();
  return count;
}

FeatureNetwork FeatureNetwork::with_output_layer(Mat output) const {
  return FeatureNetwork(inner_, std::move(output));
}

bool operator==(const FeatureNetwork& a, const FeatureNetwork& b) {
  if (a.inner_.size() != b.inner_.size()) return false;
  for (std::size_t i = 0; i < a.inner_.size(); ++i) {
    const DenseLayer& x = a.inner_[i];
    const DenseLayer& y = b.inner_[i];
    if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols() ||
        x.weights != y.weights || x.bias != y.bias) {
      return false;
    }
  }
  return a.output_.rows() == b.output_.rows() && a.output_.cols() == b.output_.cols() &&
         a.output_ == b.output_;
}

double NetworkGradient::squared_norm() const {
  double s = output.squaredNorm();
  for (const DenseLayer& l : inner) s += l.weights.squaredNorm() + l.bias.squaredNorm();
  return s;
}

Vec forward_features(const FeatureNetwork& net, const Vec& x) {
  if (x.size() != net.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "forward_features: input dimension");
  }
  Vec a = x;
  for (const DenseLayer& l : net.inner_layers()) {
    a = (l.weights * a + l.bias).array().tanh().matrix();
  }
  return a;
}

Vec forward_output(const FeatureNetwork& net, const Vec& x) {
  return net.output_layer().transpose() * forward_features(net, x);
}

double batch_loss(const FeatureNetwork& net, const TrainBatch& batch) {
  check_batch(net, batch);
  const std::vector<Mat> acts = forward_all(net, batch.inputs);
  const Mat residual = net.output_layer().transpose() * acts.back() - batch.targets;
  return residual.squaredNorm() / static_cast<double>(batch.size());
}

NetworkGradient batch_gradient(const FeatureNetwork& net, const TrainBatch& batch) {
  check_batch(net, batch);
  const auto& layers = net.inner_layers();
  const std::vector<Mat> acts = forward_all(net, batch.inputs);
  const double scale = 2.0 / static_cast<double>(batch.size());

  // d loss / d prediction, m x M
  const Mat d_out = scale * (net.output_layer().transpose() * acts.back() - batch.targets);

  NetworkGradient grad;
  grad.output = acts.back() * d_out.transpose();
  grad.inner.resize(layers.size());

  Mat d_act = net.output_layer() * d_out;  // k x M
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Mat& a = acts[i + 1];
    const Mat d_pre = d_act.cwiseProduct((1.0 - a.array().square()).matrix());
    grad.inner[i].weights = d_pre * acts[i].transpose();
    grad.inner[i].bias = d_pre.rowwise().sum();
    if (i > 0) d_act = layers[i].weights.transpose() * d_pre;
  }
  if (debug::gradient_fault_enabled() && !grad.inner.empty()) grad.inner.front().weights(0, 0) *= 1.01;
  return grad;
}

FeatureNetwork apply_gradient(const FeatureNetwork& net, const NetworkGradient& grad,
                              double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorCode::ValidationError, "learning rate must be positive");
  }
  std::vector<DenseLayer> inner = net.inner_layers();
  for (std::size_t i = 0; i < inner.size(); ++i) {
    inner[i].weights -= learning_rate * grad.inner[i].weights;
    inner[i].bias -= learning_rate * grad.inner[i].bias;
  }
  return FeatureNetwork(std::move(inner), net.output_layer() - learning_rate * grad.output);
}

FeatureNetwork sgd_step(const FeatureNetwork& net, const TrainBatch& batch,
                        double learning_rate) {
  return apply_gradient(net, batch_gradient(net, batch), learning_rate);
}

FeatureNetwork swap_features(const FeatureNetwork& net, std::vector<DenseLayer> new_inner) {
  if (new_inner.empty() || new_inner.front().in_dim() != net.input_dim() ||
      new_inner.back().out_dim() != net.feature_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "swap_features: replacement must keep input and feature dimensions");
  }
  return FeatureNetwork(std::move(new_inner), net.output_layer());
}

std::uint64_t fingerprint(const FeatureNetwork& net) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const double* data, Eigen::Index count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const DenseLayer& l : net.inner_layers()) {
    mix(l.weights.data(), l.weights.size());
    mix(l.bias.data(), l.bias.size());
  }
  mix(net.output_layer().data(), net.output_layer().size());
  return h;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw Error(ErrorCode::IoError, "network file is truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

void save_network(const FeatureNetwork& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  os.write("DMRN", 4);
  write_le<std::uint32_t>(os, kNetworkFormatVersion);
  const auto dims = net.layer_dims();
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.inner_layers().size() + 1));
  for (Eigen::Index d : dims) write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.output_dim()));
  for (const DenseLayer& l : net.inner_layers()) {
    for (Eigen::Index r = 0; r < l.out_dim(); ++r) {
      for (Eigen::Index c = 0; c < l.in_dim(); ++c) write_le<double>(os, l.weights(r, c));
      write_le<double>(os, l.bias(r));
    }
  }
  const Mat& out = net.output_layer();
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) write_le<double>(os, out(r, c));
  if (!os) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

FeatureNetwork load_network(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open network file '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "DMRN", 4) != 0) {
    throw Error(ErrorCode::IoError, "'" + path.string() + "' is not a DMRN network file");
  }
  const auto version = read_le<std::uint32_t>(is);
  if (version != kNetworkFormatVersion) {
    throw Error(ErrorCode::IoError, "unsupported network format version " + std::to_string(version));
  }
  const auto count = read_le<std::uint32_t>(is);
  if (count < 2 || count > 64) throw Error(ErrorCode::IoError, "implausible layer count");
  std::vector<Eigen::Index> dims(count + 1);
  for (auto& d : dims) {
    d = read_le<std::uint32_t>(is);
    if (d == 0 || d > 100000) throw Error(ErrorCode::IoError, "implausible layer width");
  }
  std::vector<DenseLayer> inner;
  for (std::uint32_t i = 0; i + 1 < count; ++i) {
    DenseLayer l{Mat(dims[i + 1], dims[i]), Vec(dims[i + 1])};
    for (Eigen::Index r = 0; r < l.out_dim(); ++r) {
      for (Eigen::Index c = 0; c < l.in_dim(); ++c) l.weights(r, c) = read_le<double>(is);
      l.bias(r) = read_le<double>(is);
    }
    inner.push_back(std::move(l));
  }
  Mat out(dims[count - 1], dims[count]);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = read_le<double>(is);
  FeatureNetwork net(std::move(inner), std::move(out));
  check_finite(net);
  return net;
}

}  // namespace dmrac
