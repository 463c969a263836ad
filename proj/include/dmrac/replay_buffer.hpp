#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "dmrac/deepnet.hpp"
#include "dmrac/numerics.hpp"

namespace dmrac {

struct BufferEntry {
  Vec x;    // state snapshot
  Vec phi;  // features at admission time
  Vec y;    // generative estimate of Delta(x) at admission time
};

struct AdmissionRecord {
  double score;
  std::size_t size_before;
  std::optional<std::size_t> evicted;
};

/// Bounded memory of feature-separated samples.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double zeta_tol);

  std::size_t capacity() const { return capacity_; }
  double zeta_tol() const { return zeta_tol_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<BufferEntry>& entries() const { return entries_; }
  const std::vector<AdmissionRecord>& admission_log() const { return log_; }

  std::size_t admitted_count() const { return admitted_; }
  std::size_t rejected_count() const { return rejected_; }

  /// Removes entry i, preserving the order of the rest.
  void erase(std::size_t i);
  void append(BufferEntry entry);
  void record(AdmissionRecord rec) {
    ++admitted_;
    if (keep_log_) log_.push_back(rec);
  }
  void count_rejection() { ++rejected_; }
  void keep_log(bool on) { keep_log_ = on; }
  bool keeps_log() const { return keep_log_; }

 private:
  std::size_t capacity_;
  double zeta_tol_;
  std::vector<BufferEntry> entries_;
  std::vector<AdmissionRecord> log_;
  bool keep_log_ = true;
  std::size_t admitted_ = 0;
  std::size_t rejected_ = 0;
};

/// min_p ||phi - phi_p||^2 / ||phi||, or +inf for an empty buffer.
/// Throws ZeroFeature when ||phi|| < 1e-12.
double kernel_score(const Vec& phi, const ReplayBuffer& buffer);

/// Admits the entry iff kernel_score >= zeta_tol. A full buffer first evicts
/// one stored entry by evict_svd_max, so the size never exceeds capacity.
bool try_insert(ReplayBuffer& buffer, BufferEntry entry, double zeta_tol);
inline bool try_insert(ReplayBuffer& buffer, BufferEntry entry) {
  return try_insert(buffer, std::move(entry), buffer.zeta_tol());
}

/// Smallest of the min(rows, cols) singular values of the matrix whose rows
/// are the stored features. Zero for an empty matrix.
double feature_min_singular_value(const Mat& rows);

/// Removes the entry whose removal leaves the feature matrix with the largest
/// minimum singular value. Ties go to the lowest index.
std::size_t evict_svd_max(ReplayBuffer& buffer);

/// M entries drawn uniformly without replacement.
TrainBatch sample_minibatch(const ReplayBuffer& buffer, std::size_t m, Rng& rng);

/// Every stored (x, y) pair in buffer order.
TrainBatch as_batch(const ReplayBuffer& buffer);

/// Header: index,x0..,phi0..,y0..
void write_buffer_csv(const ReplayBuffer& buffer, std::ostream& os);

}  // namespace dmrac
