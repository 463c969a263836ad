#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "dmrac/replay_buffer.hpp"
#include "invariants.hpp"

using namespace dmrac;

namespace {

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

BufferEntry entry(const Vec& phi, double tag = 0.0) {
  return BufferEntry{Vec::Constant(1, tag), phi, Vec::Constant(1, tag)};
}

}  // namespace

TEST_CASE("kernel_score examples") {
  ReplayBuffer buf(10, 0.2);
  CHECK(kernel_score(v2(1, 0), buf) == std::numeric_limits<double>::infinity());
  buf.append(entry(v2(0, 1)));
  CHECK(kernel_score(v2(0, 1), buf) == 0.0);
  CHECK(kernel_score(v2(1, 0), buf) == doctest::Approx(2.0));
}

TEST_CASE("kernel_score is order-free and rejects zero features") {
  ReplayBuffer a(10, 0.2), b(10, 0.2);
  const std::vector<Vec> phis = {v2(1, 0), v2(0, 1), v2(1, 1), v2(-1, 2)};
  for (const auto& p : phis) a.append(entry(p));
  for (auto it = phis.rbegin(); it != phis.rend(); ++it) b.append(entry(*it));
  CHECK(kernel_score(v2(0.3, 0.7), a) == kernel_score(v2(0.3, 0.7), b));
  try {
    kernel_score(v2(0, 0), a);
    FAIL("expected ZeroFeature");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroFeature);
  }
}

TEST_CASE("try_insert examples") {
  ReplayBuffer buf(3, 0.2);
  buf.append(entry(v2(0, 1)));
  CHECK(try_insert(buf, entry(v2(1, 0))));
  CHECK(buf.size() == 2);
  CHECK_FALSE(try_insert(buf, entry(v2(1, 0))));
  CHECK(buf.size() == 2);
  CHECK(buf.rejected_count() == 1);

  CHECK(try_insert(buf, entry(v2(1, 1))));
  CHECK(buf.size() == 3);
  CHECK(try_insert(buf, entry(v2(-1, 1))));
  CHECK(buf.size() == 3);
  REQUIRE(buf.admission_log().back().evicted.has_value());
  for (const auto& rec : buf.admission_log()) CHECK(rec.score >= 0.2);
}

TEST_CASE("evict_svd_max examples") {
  ReplayBuffer buf(5, 0.2);
  buf.append(entry(v2(1, 0)));
  buf.append(entry(v2(0, 1)));
  buf.append(entry(v2(1, 0.001)));
  CHECK(evict_svd_max(buf) == 2);
  CHECK(buf.size() == 2);

  ReplayBuffer one(5, 0.2);
  one.append(entry(v2(3, 4)));
  CHECK(evict_svd_max(one) == 0);
  CHECK(one.empty());

  ReplayBuffer none(5, 0.2);
  CHECK_THROWS_AS(evict_svd_max(none), Error);
}

TEST_CASE("evict_svd_max agrees with the enumeration oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = static_cast<int>(2 + rng.index(19));
    const auto k = static_cast<Eigen::Index>(1 + rng.index(6));
    ReplayBuffer buf(50, 0.2);
    std::vector<Vec> phis;
    for (int i = 0; i < p; ++i) {
      Vec phi(k);
      for (Eigen::Index j = 0; j < k; ++j) phi(j) = rng.normal();
      phis.push_back(phi);
      buf.append(entry(phi, i));
    }
    CHECK(evict_svd_max(buf) == check::brute_force_eviction(phis));
  }
}

TEST_CASE("sample_minibatch") {
  ReplayBuffer buf(20, 0.2);
  for (int i = 0; i < 10; ++i) buf.append(entry(v2(i, 1), i));

  Rng rng(1);
  const TrainBatch all = sample_minibatch(buf, 10, rng);
  std::set<double> seen(all.inputs.data(), all.inputs.data() + all.inputs.size());
  CHECK(seen.size() == 10);

  Rng a(5), b(5);
  CHECK(sample_minibatch(buf, 4, a).inputs == sample_minibatch(buf, 4, b).inputs);

  try {
    sample_minibatch(buf, 11, rng);
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientData);
  }
}

TEST_CASE("sample_minibatch draws each entry uniformly") {
  ReplayBuffer buf(20, 0.2);
  for (int i = 0; i < 10; ++i) buf.append(entry(v2(i, 1), i));
  Rng rng(2024);
  const int draws = 100000;
  std::vector<int> counts(10, 0);
  for (int d = 0; d < draws; ++d) {
    ++counts[static_cast<std::size_t>(sample_minibatch(buf, 1, rng).inputs(0, 0))];
  }
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (int c : counts) CHECK(std::abs(c - draws * 0.1) <= 3.0 * sigma);
}

TEST_CASE("write_buffer_csv header and rows") {
  ReplayBuffer buf(5, 0.2);
  buf.append(entry(v2(1, 2), 0.5));
  std::ostringstream os;
  write_buffer_csv(buf, os);
  CHECK(os.str().rfind("index,x0,phi0,phi1,y0\n0,0.5,1,2,0.5\n", 0) == 0);
}
