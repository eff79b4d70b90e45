#include <cmath>

#include "doctest.h"
#include "tmm/maxvol.hpp"

using namespace tmm;

namespace {

MatrixXd random_matrix(Index rows, Index cols, std::uint64_t seed) {
  MatrixXd m(rows, cols);
  CounterRng rng(seed, RngPurpose::TestPoint, 0);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.next_normal();
  return m;
}

// CUR reconstruction error from a selected cross.
double cur_error(const MatrixXd& m, const MaxvolResult& sel) {
  const Index r = static_cast<Index>(sel.rows.size());
  MatrixXd cols(m.rows(), r), rows(r, m.cols()), cross(r, r);
  for (Index a = 0; a < r; ++a) {
    cols.col(a) = m.col(sel.cols[static_cast<std::size_t>(a)]);
    rows.row(a) = m.row(sel.rows[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < r; ++b)
      cross(a, b) = m(sel.rows[static_cast<std::size_t>(a)],
                      sel.cols[static_cast<std::size_t>(b)]);
  }
  const MatrixXd approx = cols * core_pinv(cross, 1e-12) * rows;
  return (approx - m).norm() / m.norm();
}

}  // namespace

TEST_SUITE("maxvol") {

TEST_CASE("rank-one selection finds the dominant entry") {
  // For a rank-1 matrix u v^T the volume of a 1x1 cross is |u_i v_j|, so the
  // exhaustive optimum is the largest-magnitude entry.
  VectorXd u(40), v(40);
  CounterRng rng(3, RngPurpose::TestPoint, 1);
  for (Index i = 0; i < 40; ++i) {
    u[i] = rng.next_normal();
    v[i] = rng.next_normal();
  }
  u[17] = 9.0;  // unambiguous winner
  v[23] = 8.0;
  const MatrixXd m = u * v.transpose();
  DenseEntrySource src(m);
  MaxvolOptions opts;
  opts.r1 = 1;
  opts.seed = 5;
  const MaxvolResult sel = maxvol_cross(src, opts);
  CHECK(sel.rows == std::vector<Index>{17});
  CHECK(sel.cols == std::vector<Index>{23});
}

TEST_CASE("psd rank-one selection finds the dominant diagonal entry") {
  VectorXd u = random_matrix(30, 1, 9).col(0);
  u[11] = 7.0;
  const MatrixXd m = u * u.transpose();
  DenseEntrySource src(m);
  MaxvolOptions opts;
  opts.r1 = 1;
  opts.psd = true;
  opts.seed = 2;
  const MaxvolResult sel = maxvol_cross(src, opts);
  CHECK(sel.rows == std::vector<Index>{11});
  CHECK(sel.cols == sel.rows);
}

TEST_CASE("exact-rank psd matrices are recovered exactly") {
  const MatrixXd a = random_matrix(60, 5, 21);
  const MatrixXd m = a * a.transpose();  // psd, rank 5
  DenseEntrySource src(m);
  MaxvolOptions opts;
  opts.r1 = 5;
  opts.psd = true;
  opts.seed = 7;
  const MaxvolResult sel = maxvol_cross(src, opts);
  REQUIRE(sel.rows.size() == 5);
  CHECK(sel.rows == sel.cols);
  CHECK(cur_error(m, sel) < 1e-8);
}

TEST_CASE("exact-rank general matrices are recovered exactly") {
  const MatrixXd m =
      random_matrix(70, 4, 33) * random_matrix(4, 55, 34);  // rank 4, rectangular
  DenseEntrySource src(m);
  MaxvolOptions opts;
  opts.r1 = 4;
  opts.seed = 11;
  const MaxvolResult sel = maxvol_cross(src, opts);
  REQUIRE(sel.rows.size() == 4);
  CHECK(cur_error(m, sel) < 1e-8);
}

TEST_CASE("requesting more pivots than the rank still reconstructs exactly") {
  const MatrixXd a = random_matrix(40, 3, 41);
  const MatrixXd m = a * a.transpose();  // rank 3
  DenseEntrySource src(m);
  MaxvolOptions opts;
  opts.r1 = 8;  // over-asking: completion pads with benign pivots
  opts.psd = true;
  opts.seed = 13;
  const MaxvolResult sel = maxvol_cross(src, opts);
  REQUIRE(sel.rows.size() == 8);
  CHECK(cur_error(m, sel) < 1e-8);  // pinv cutoff drops the null directions
}

TEST_CASE("selection is deterministic in the seed") {
  const MatrixXd m = random_matrix(50, 6, 55) * random_matrix(6, 50, 56);
  DenseEntrySource s1(m), s2(m);
  MaxvolOptions opts;
  opts.r1 = 6;
  opts.seed = 17;
  const MaxvolResult a = maxvol_cross(s1, opts);
  const MaxvolResult b = maxvol_cross(s2, opts);
  CHECK(a.rows == b.rows);
  CHECK(a.cols == b.cols);
}

TEST_CASE("tight candidate caps still produce a usable cross") {
  const MatrixXd m = random_matrix(80, 5, 61) * random_matrix(5, 80, 62);
  DenseEntrySource src(m);
  MaxvolOptions opts;
  opts.r1 = 5;
  opts.seed = 3;
  opts.candidate_cap = 12;  // far below the default 512
  const MaxvolResult sel = maxvol_cross(src, opts);
  REQUIRE(sel.rows.size() == 5);
  CHECK(cur_error(m, sel) < 1e-6);
}

TEST_CASE("core pseudoinverse obeys the Moore-Penrose identities") {
  const MatrixXd a = random_matrix(6, 2, 71) * random_matrix(2, 6, 72);  // rank 2
  const MatrixXd p = core_pinv(a, 1e-10);
  CHECK((a * p * a - a).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((p * a * p - p).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(((a * p) - (a * p).transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(((p * a) - (p * a).transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("core pseudoinverse truncates at the relative cutoff") {
  // Diagonal with a tiny trailing value: a cutoff between the two scales must
  // invert only the large one.
  MatrixXd a = MatrixXd::Zero(3, 3);
  a(0, 0) = 2.0;
  a(1, 1) = 1.0;
  a(2, 2) = 1e-9;
  const MatrixXd p = core_pinv(a, 1e-6);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p(2, 2) == 0.0);
}

TEST_CASE("an identically zero cross raises a degeneracy error") {
  CHECK_THROWS_AS(core_pinv(MatrixXd::Zero(4, 4), 1e-10), DegeneracyError);
}

}  // TEST_SUITE
