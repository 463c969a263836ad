#include "dmrac/numerics.hpp"

namespace dmrac {

Vec gaussian_vector(Rng& rng, double variance, Eigen::Index dim) {
  if (!(variance >= 0.0)) {
    throw Error(ErrorCode::NegativeVariance, "gaussian_vector: variance must be >= 0");
  }
  Vec out(dim);
  if (variance == 0.0) {
    out.setZero();
    return out;
  }
  const double sd = std::sqrt(variance);
  for (Eigen::Index i = 0; i < dim; ++i) out(i) = sd * rng.normal();
  return out;
}

}  // namespace dmrac
