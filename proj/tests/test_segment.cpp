#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "testutil.hpp"
#include "vsum/segment.hpp"

using namespace vsum;
using testutil::random_matrix;

namespace {

// Kernel and scatter computed with plain loops, independent of ScatterTable.
Matrix gram_by_loops(const Matrix& x) {
  const int n = static_cast<int>(x.rows());
  Matrix K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int c = 0; c < x.cols(); ++c) acc += x(i, c) * x(j, c);
      K(i, j) = acc;
    }
  return K;
}

double scatter_by_loops(const Matrix& K, int a, int b) {
  double diag = 0.0, all = 0.0;
  for (int t = a; t <= b; ++t) {
    diag += K(t, t);
    for (int s = a; s <= b; ++s) all += K(s, t);
  }
  return diag - all / static_cast<double>(b - a + 1);
}

struct OracleBest {
  double obj = std::numeric_limits<double>::infinity();
  int m = 0;
  std::vector<std::array<int, 2>> intervals;
  int n_optimal = 0;  // count of segmentations within 1e-12 of the best
};

// Exhaustive search over all segmentations with up to max_m segments,
// preferring fewer segments on ties, mirroring the stated tie rule.
OracleBest exhaustive_kts(const Matrix& K, int max_m, double w) {
  const int T = static_cast<int>(K.rows());
  OracleBest best;
  std::vector<int> cuts;
  auto consider = [&](const std::vector<int>& cs) {
    const int m = static_cast<int>(cs.size()) + 1;
    double scat = 0.0;
    int start = 0;
    std::vector<std::array<int, 2>> ivs;
    for (int c : cs) {
      scat += scatter_by_loops(K, start, c - 1);
      ivs.push_back({start, c - 1});
      start = c;
    }
    scat += scatter_by_loops(K, start, T - 1);
    ivs.push_back({start, T - 1});
    const double obj = scat + w * segment::kts_penalty(m, T);
    if (obj < best.obj - 1e-12) {
      best.obj = obj;
      best.m = m;
      best.intervals = ivs;
      best.n_optimal = 1;
    } else if (std::abs(obj - best.obj) <= 1e-12) {
      ++best.n_optimal;
    }
  };
  std::function<void(int, int)> rec = [&](int from, int remaining) {
    if (remaining == 0) {
      consider(cuts);
      return;
    }
    for (int c = from; c <= T - 1; ++c) {
      cuts.push_back(c);
      rec(c + 1, remaining - 1);
      cuts.pop_back();
    }
  };
  for (int m = 1; m <= max_m; ++m) rec(1, m - 1);
  return best;
}

}  // namespace

TEST_CASE("linear kernel is the gram matrix") {
  Rng rng(51);
  const Matrix x = random_matrix(rng, 6, 3);
  const Matrix K = segment::kernel_matrix(x);
  const Matrix Kl = gram_by_loops(x);
  CHECK((K - Kl).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(segment::kernel_matrix(Matrix(0, 3)), ShapeError);
}

TEST_CASE("rbf kernel has unit diagonal and values in (0, 1]") {
  Rng rng(52);
  const Matrix x = random_matrix(rng, 6, 3);
  const Matrix K = segment::kernel_matrix_rbf(x, 0.7);
  for (int i = 0; i < 6; ++i) {
    CHECK(K(i, i) == Catch::Approx(1.0));
    for (int j = 0; j < 6; ++j) {
      CHECK(K(i, j) > 0.0);
      CHECK(K(i, j) <= 1.0 + 1e-12);
      CHECK(K(i, j) == Catch::Approx(std::exp(-0.7 * (x.row(i) - x.row(j)).squaredNorm()))
                           .margin(1e-12));
    }
  }
  CHECK_THROWS_AS(segment::kernel_matrix_rbf(x, 0.0), ConfigError);
}

TEST_CASE("scatter table reproduces direct computation on all intervals") {
  Rng rng(53);
  const Matrix x = random_matrix(rng, 9, 3);
  const Matrix K = gram_by_loops(x);
  segment::ScatterTable st(K);
  REQUIRE(st.size() == 9);
  for (int a = 0; a < 9; ++a)
    for (int b = a; b < 9; ++b)
      CHECK(st.scatter(a, b) == Catch::Approx(scatter_by_loops(K, a, b)).margin(1e-9));
  CHECK_THROWS_AS(st.scatter(3, 2), ShapeError);
  CHECK_THROWS_AS(st.scatter(-1, 2), ShapeError);
  CHECK_THROWS_AS(st.scatter(0, 9), ShapeError);
}

TEST_CASE("scatter of identical rows is zero and merging never reduces it") {
  Matrix same(5, 2);
  for (int i = 0; i < 5; ++i) same.row(i) << 1.0, -2.0;
  segment::ScatterTable st0(segment::kernel_matrix(same));
  for (int a = 0; a < 5; ++a)
    for (int b = a; b < 5; ++b) CHECK(std::abs(st0.scatter(a, b)) < 1e-9);

  Rng rng(54);
  for (int it = 0; it < 30; ++it) {
    const int T = static_cast<int>(rng.int_range(2, 10));
    const Matrix x = random_matrix(rng, T, 2);
    segment::ScatterTable st(segment::kernel_matrix(x));
    for (int a = 0; a < T; ++a)
      for (int b = a; b < T; ++b) {
        CHECK(st.scatter(a, b) >= -1e-9);
        for (int c = a; c < b; ++c)
          CHECK(st.scatter(a, b) - st.scatter(a, c) - st.scatter(c + 1, b) >= -1e-9);
      }
  }
}

TEST_CASE("segment count penalty uses natural logarithm") {
  CHECK(segment::kts_penalty(1, 8) == Catch::Approx(std::log(8.0) + 1.0));
  CHECK(segment::kts_penalty(2, 8) == Catch::Approx(2.0 * (std::log(4.0) + 1.0)));
  CHECK(segment::kts_penalty(4, 4) == Catch::Approx(4.0));
}

TEST_CASE("dynamic program matches exhaustive search") {
  Rng rng(55);
  for (int it = 0; it < 100; ++it) {
    const int T = static_cast<int>(rng.int_range(2, 12));
    const int max_m = static_cast<int>(std::min<std::int64_t>(3, T));
    const double w = rng.uniform(0.0, 1.5);
    Matrix x(T, 2);
    // half the instances get clustered rows so boundaries are meaningful
    if (it % 2 == 0) {
      for (int t = 0; t < T; ++t) {
        const int g = t * 3 / T;
        x(t, 0) = g + 0.01 * rng.normal();
        x(t, 1) = -g + 0.01 * rng.normal();
      }
    } else {
      x = random_matrix(rng, T, 2);
    }
    const Matrix K = gram_by_loops(x);
    const auto got = segment::kts_solve(K, max_m, w);
    const auto want = exhaustive_kts(K, max_m, w);
    CAPTURE(it, T, max_m, w);
    CHECK(got.objective == Catch::Approx(want.obj).margin(1e-9));
    CHECK(got.n_segments == want.m);
    if (want.n_optimal == 1) {
      REQUIRE(got.segmentation.intervals.size() == want.intervals.size());
      for (std::size_t i = 0; i < want.intervals.size(); ++i) {
        CHECK(got.segmentation.intervals[i][0] == want.intervals[i][0]);
        CHECK(got.segmentation.intervals[i][1] == want.intervals[i][1]);
      }
    }
  }
}

TEST_CASE("planted boundary is recovered exactly") {
  Matrix x(12, 2);
  for (int t = 0; t < 6; ++t) x.row(t) << 1.0, 0.0;
  for (int t = 6; t < 12; ++t) x.row(t) << 0.0, 1.0;
  const auto r = segment::kts_solve(segment::kernel_matrix(x), 3, 0.1);
  REQUIRE(r.n_segments == 2);
  CHECK(r.segmentation.intervals[0][0] == 0);
  CHECK(r.segmentation.intervals[0][1] == 5);
  CHECK(r.segmentation.intervals[1][0] == 6);
  CHECK(r.segmentation.intervals[1][1] == 11);
}

TEST_CASE("ties prefer fewer segments") {
  Matrix x(8, 2);
  for (int i = 0; i < 8; ++i) x.row(i) << 0.5, 0.5;
  // constant video, zero penalty: every segmentation scores 0
  const auto r = segment::kts_solve(segment::kernel_matrix(x), 3, 0.0);
  CHECK(r.n_segments == 1);
  CHECK(r.segmentation.intervals.size() == 1);
}

TEST_CASE("single segment is forced by max_segments=1") {
  Rng rng(56);
  const Matrix x = random_matrix(rng, 7, 2);
  const auto r = segment::kts_solve(segment::kernel_matrix(x), 1, 1.0);
  CHECK(r.n_segments == 1);
  CHECK(r.segmentation.intervals[0][0] == 0);
  CHECK(r.segmentation.intervals[0][1] == 6);
}

TEST_CASE("kts validates max_segments") {
  Rng rng(57);
  const Matrix K = segment::kernel_matrix(random_matrix(rng, 5, 2));
  CHECK_THROWS_AS(segment::kts_solve(K, 0, 1.0), ConfigError);
  CHECK_THROWS_AS(segment::kts_solve(K, 6, 1.0), ConfigError);
}

TEST_CASE("default segment cap is one per ten sampled frames, rounded up") {
  CHECK(segment::default_max_segments(1) == 1);
  CHECK(segment::default_max_segments(10) == 1);
  CHECK(segment::default_max_segments(11) == 2);
  CHECK(segment::default_max_segments(100) == 10);
  CHECK(segment::default_max_segments(101) == 11);
}

TEST_CASE("sampled intervals map to original frames at pick midpoints") {
  segment::ShotSegmentation seg;
  seg.intervals = {{0, 2}, {3, 4}};
  const std::vector<int> picks = {0, 2, 4, 6, 8};
  const auto out = segment::to_original_frames(seg, picks, 10);
  REQUIRE(out.intervals.size() == 2);
  CHECK(out.intervals[0][0] == 0);
  CHECK(out.intervals[0][1] == 5);  // floor((4 + 6) / 2)
  CHECK(out.intervals[1][0] == 6);
  CHECK(out.intervals[1][1] == 9);

  // single segment spans everything
  segment::ShotSegmentation whole;
  whole.intervals = {{0, 4}};
  const auto all = segment::to_original_frames(whole, picks, 10);
  REQUIRE(all.intervals.size() == 1);
  CHECK(all.intervals[0][0] == 0);
  CHECK(all.intervals[0][1] == 9);

  // odd midpoint floors
  segment::ShotSegmentation odd;
  odd.intervals = {{0, 0}, {1, 2}};
  const std::vector<int> picks2 = {1, 4, 9};
  const auto o = segment::to_original_frames(odd, picks2, 12);
  CHECK(o.intervals[0][1] == 2);  // floor((1 + 4) / 2)
  CHECK(o.intervals[1][0] == 3);
  CHECK(o.intervals[1][1] == 11);
}

TEST_CASE("original-frame mapping validates picks") {
  segment::ShotSegmentation seg;
  seg.intervals = {{0, 1}};
  CHECK_THROWS_AS(segment::to_original_frames(seg, {}, 10), ValidationError);
  CHECK_THROWS_AS(segment::to_original_frames(seg, {0, 12}, 10), ValidationError);
  CHECK_THROWS_AS(segment::to_original_frames(seg, {3, 3}, 10), ValidationError);
}

TEST_CASE("segmentation validation catches structural defects") {
  segment::ShotSegmentation s;
  CHECK_THROWS_AS(s.check(5), ValidationError);  // empty
  s.intervals = {{1, 4}};
  CHECK_THROWS_AS(s.check(5), ValidationError);  // does not start at 0
  s.intervals = {{0, 2}, {4, 4}};
  CHECK_THROWS_AS(s.check(5), ValidationError);  // gap
  s.intervals = {{0, 2}, {2, 4}};
  CHECK_THROWS_AS(s.check(5), ValidationError);  // overlap
  s.intervals = {{0, 3}};
  CHECK_THROWS_AS(s.check(5), ValidationError);  // short
  s.intervals = {{0, 2}, {3, 4}};
  CHECK_NOTHROW(s.check(5));
}

TEST_CASE("mapped intervals stay contiguous for random picks") {
  Rng rng(58);
  for (int it = 0; it < 50; ++it) {
    const int T_s = static_cast<int>(rng.int_range(2, 15));
    std::vector<int> picks(static_cast<std::size_t>(T_s));
    int at = static_cast<int>(rng.int_range(0, 2));
    for (int i = 0; i < T_s; ++i) {
      picks[static_cast<std::size_t>(i)] = at;
      at += static_cast<int>(rng.int_range(1, 4));
    }
    const int n_frames = at + static_cast<int>(rng.int_range(0, 3));

    segment::ShotSegmentation seg;
    int start = 0;
    while (start < T_s) {
      const int len = static_cast<int>(rng.int_range(1, 4));
      const int end = std::min(T_s - 1, start + len - 1);
      seg.intervals.push_back({start, end});
      start = end + 1;
    }
    // check() inside the call enforces cover and adjacency over n_frames
    CHECK_NOTHROW(segment::to_original_frames(seg, picks, n_frames));
  }
}
