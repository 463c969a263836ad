#include "dmrac/replay_buffer.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>

namespace dmrac {

namespace {

constexpr double kZeroFeature = 1e-12;
// Relative slack under which two candidate removals count as tied.
constexpr double kTieTolerance = 1e-12;

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity, double zeta_tol)
    : capacity_(capacity), zeta_tol_(zeta_tol) {
  if (capacity == 0) throw Error(ErrorCode::ValidationError, "buffer capacity must be positive");
  if (!(zeta_tol > 0.0)) throw Error(ErrorCode::ValidationError, "zeta_tol must be positive");
}

void ReplayBuffer::erase(std::size_t i) {
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
}

void ReplayBuffer::append(BufferEntry entry) { entries_.push_back(std::move(entry)); }

double kernel_score(const Vec& phi, const ReplayBuffer& buffer) {
  const double norm = phi.norm();
  if (!(norm >= kZeroFeature)) {
    throw Error(ErrorCode::ZeroFeature, "feature vector norm below 1e-12");
  }
  double best = std::numeric_limits<double>::infinity();
  for (const BufferEntry& e : buffer.entries()) {
    if (e.phi.size() != phi.size()) {
      throw Error(ErrorCode::DimensionMismatch, "kernel_score: feature dimension changed");
    }
    best = std::min(best, (phi - e.phi).squaredNorm() / norm);
  }
  return best;
}

bool try_insert(ReplayBuffer& buffer, BufferEntry entry, double zeta_tol) {
  if (!all_finite(entry.x) || !all_finite(entry.phi) || !all_finite(entry.y)) {
    throw Error(ErrorCode::ValidationError, "buffer entry must be finite");
  }
  const double score = kernel_score(entry.phi, buffer);
  if (!(score >= zeta_tol)) {
    buffer.count_rejection();
    return false;
  }
  AdmissionRecord rec{score, buffer.size(), std::nullopt};
  if (buffer.size() >= buffer.capacity()) rec.evicted = evict_svd_max(buffer);
  buffer.append(std::move(entry));
  buffer.record(rec);
  return true;
}

double feature_min_singular_value(const Mat& rows) {
  if (rows.rows() == 0 || rows.cols() == 0) return 0.0;
  const Vec sv = Eigen::BDCSVD<Mat>(rows).singularValues();
  return sv(sv.size() - 1);
}

std::size_t evict_svd_max(ReplayBuffer& buffer) {
  const std::size_t p = buffer.size();
  if (p == 0) throw Error(ErrorCode::EmptyBuffer, "evict_svd_max on an empty buffer");
  if (p == 1) {
    buffer.erase(0);
    return 0;
  }
  const auto& entries = buffer.entries();
  const Eigen::Index k = entries.front().phi.size();
  const auto q = static_cast<Eigen::Index>(p) - 1;

  // Direct enumeration: singular values of each candidate remainder. Working
  // on X itself rather than a Gram matrix keeps near-zero singular values
  // accurate enough for the tie tolerance to be meaningful.
  std::size_t best_index = 0;
  double best = -1.0;
  Mat rest(q, k);
  for (std::size_t i = 0; i < p; ++i) {
    Eigen::Index r = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j != i) rest.row(r++) = entries[j].phi.transpose();
    }
    const double sigma = feature_min_singular_value(rest);
    if (sigma > best + kTieTolerance * std::max(1.0, best)) {
      best = sigma;
      best_index = i;
    }
  }
  buffer.erase(best_index);
  return best_index;
}

TrainBatch sample_minibatch(const ReplayBuffer& buffer, std::size_t m, Rng& rng) {
  const std::size_t p = buffer.size();
  if (m == 0 || p < m) {
    throw Error(ErrorCode::InsufficientData,
                "cannot sample " + std::to_string(m) + " of " + std::to_string(p) + " entries");
  }
  std::vector<std::size_t> idx(p);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.index(p - i);
    std::swap(idx[i], idx[j]);
  }
  const auto& entries = buffer.entries();
  TrainBatch batch{Mat(entries.front().x.size(), static_cast<Eigen::Index>(m)),
                   Mat(entries.front().y.size(), static_cast<Eigen::Index>(m))};
  for (std::size_t i = 0; i < m; ++i) {
    batch.inputs.col(static_cast<Eigen::Index>(i)) = entries[idx[i]].x;
    batch.targets.col(static_cast<Eigen::Index>(i)) = entries[idx[i]].y;
  }
  return batch;
}

TrainBatch as_batch(const ReplayBuffer& buffer) {
  if (buffer.empty()) throw Error(ErrorCode::InsufficientData, "buffer is empty");
  const auto& entries = buffer.entries();
  const auto p = static_cast<Eigen::Index>(entries.size());
  TrainBatch batch{Mat(entries.front().x.size(), p), Mat(entries.front().y.size(), p)};
  for (Eigen::Index i = 0; i < p; ++i) {
    batch.inputs.col(i) = entries[static_cast<std::size_t>(i)].x;
    batch.targets.col(i) = entries[static_cast<std::size_t>(i)].y;
  }
  return batch;
}

void write_buffer_csv(const ReplayBuffer& buffer, std::ostream& os) {
  const auto& entries = buffer.entries();
  const Eigen::Index n = entries.empty() ? 0 : entries.front().x.size();
  const Eigen::Index k = entries.empty() ? 0 : entries.front().phi.size();
  const Eigen::Index m = entries.empty() ? 0 : entries.front().y.size();
  os << "index";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i;
  for (Eigen::Index i = 0; i < k; ++i) os << ",phi" << i;
  for (Eigen::Index i = 0; i < m; ++i) os << ",y" << i;
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t r = 0; r < entries.size(); ++r) {
    os << r;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << entries[r].x(i);
    for (Eigen::Index i = 0; i < k; ++i) os << ',' << entries[r].phi(i);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << entries[r].y(i);
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace dmrac
