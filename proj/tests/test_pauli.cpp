#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "covar/pauli.hpp"
#include "covar/rng.hpp"
#include "oracles.hpp"

using namespace covar;

TEST_CASE("string round trip and weight") {
  const PauliString p = PauliString::from_string("XIZY");
  CHECK(p.str() == "XIZY");
  CHECK(p.n_qubits() == 4);
  CHECK(p.weight() == 3);
  CHECK(p.letter(0) == 'X');
  CHECK(p.letter(3) == 'Y');
  CHECK(PauliString::from_string("III").is_identity());
  CHECK(PauliString::from_string("XIZY") == p);
  CHECK(PauliString::from_string("XIZZ") != p);
}

TEST_CASE("single-qubit products") {
  const auto xy = multiply(PauliString::from_string("X"), PauliString::from_string("Y"));
  CHECK(xy.phase == cplx{0, 1});
  CHECK(xy.string.str() == "Z");

  const auto zz = multiply(PauliString::from_string("Z"), PauliString::from_string("Z"));
  CHECK(zz.phase == cplx{1, 0});
  CHECK(zz.string.is_identity());

  const auto two = multiply(PauliString::from_string("XZ"), PauliString::from_string("YZ"));
  CHECK(two.phase == cplx{0, 1});
  CHECK(two.string.str() == "ZI");
}

TEST_CASE("qubit count mismatch is rejected") {
  CHECK_THROWS_AS(multiply(PauliString::from_string("X"), PauliString::from_string("XX")),
                  std::invalid_argument);
  CHECK_THROWS_AS(commutes(PauliString::from_string("X"), PauliString::from_string("XX")),
                  std::invalid_argument);
}

TEST_CASE("commutation structure") {
  CHECK_FALSE(commutes(PauliString::from_string("X"), PauliString::from_string("Z")));
  CHECK(commutes(PauliString::from_string("XX"), PauliString::from_string("ZZ")));
  CHECK_FALSE(commutes(PauliString::from_string("XI"), PauliString::from_string("ZZ")));
}

TEST_CASE("symmetrized products") {
  const auto zz = symmetrized_products(PauliString::from_string("Z"), PauliString::from_string("Z"));
  REQUIRE(zz.anticommutator_half.has_value());
  CHECK_FALSE(zz.commutator_half.has_value());
  CHECK(zz.anticommutator_half->phase == cplx{1, 0});
  CHECK(zz.anticommutator_half->string.is_identity());

  const auto xy = symmetrized_products(PauliString::from_string("X"), PauliString::from_string("Y"));
  REQUIRE(xy.commutator_half.has_value());
  CHECK(xy.commutator_half->phase == cplx{1, 0});
  CHECK(xy.commutator_half->string.str() == "Z");

  const auto xz = symmetrized_products(PauliString::from_string("X"), PauliString::from_string("Z"));
  REQUIRE(xz.commutator_half.has_value());
  CHECK(xz.commutator_half->phase == cplx{-1, 0});
  CHECK(xz.commutator_half->string.str() == "Y");
}

TEST_CASE("algebra agrees with dense matrices on up to 3 qubits") {
  auto rng = make_rng(20240501);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(trial % 3);
    const PauliString a = oracle::random_string(n, n, rng);
    const PauliString b = oracle::random_string(n, n, rng);
    const Eigen::MatrixXcd da = oracle::dense(a), db = oracle::dense(b);

    const PhasedPauli prod = multiply(a, b);
    CHECK((da * db - prod.phase * oracle::dense(prod.string)).norm() == doctest::Approx(0.0));

    const bool comm = commutes(a, b);
    CHECK(((da * db - db * da).norm() < 1e-12) == comm);

    const auto sym = symmetrized_products(a, b);
    if (comm) {
      REQUIRE(sym.anticommutator_half.has_value());
      const auto& p = *sym.anticommutator_half;
      CHECK((0.5 * (da * db + db * da) - p.phase * oracle::dense(p.string)).norm() ==
            doctest::Approx(0.0));
      CHECK(p.phase.imag() == 0.0);
    } else {
      REQUIRE(sym.commutator_half.has_value());
      const auto& q = *sym.commutator_half;
      const cplx half_i{0.0, -0.5};
      CHECK((half_i * (da * db - db * da) - q.phase * oracle::dense(q.string)).norm() ==
            doctest::Approx(0.0));
      CHECK(q.phase.imag() == 0.0);
    }

    // the reversed product shares the string; phases agree iff they commute
    const PhasedPauli rev = multiply(b, a);
    CHECK(rev.string == prod.string);
    CHECK((rev.phase == prod.phase) == comm);
  }
}

TEST_CASE("pool enumeration sizes and order") {
  CHECK(enumerate_pool(2, 2).size() == 15);
  CHECK(enumerate_pool(3, 1).size() == 9);
  CHECK(enumerate_pool(3, 2).size() == 36);

  const OperatorPool pool = enumerate_pool(3, 2);
  const OperatorPool again = enumerate_pool(3, 2);
  CHECK(pool.members == again.members);
  for (const auto& m : pool.members) {
    CHECK(m.weight() >= 1);
    CHECK(m.weight() <= 2);
  }
  CHECK(pool.members.front().str() == "XII");
  CHECK_THROWS_AS(enumerate_pool(3, 4), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_pool(3, 0), std::invalid_argument);
}

TEST_CASE("pool orthonormality under the trace inner product") {
  const OperatorPool pool = enumerate_pool(3, 2);
  const double dim = 8.0;
  for (std::size_t k = 0; k < pool.size(); k += 5)
    for (std::size_t l = 0; l < pool.size(); l += 7) {
      const cplx tr =
          (oracle::dense(pool.members[k]) * oracle::dense(pool.members[l])).trace() / dim;
      if (k == l) {
        CHECK(tr.real() == doctest::Approx(1.0));
      } else {
        CHECK(std::abs(tr) == doctest::Approx(0.0));
      }
    }
}

TEST_CASE("constraint sampling") {
  const OperatorPool pool = enumerate_pool(3, 2);

  auto rng = make_rng(7);
  auto all = sample_constraints(pool, 36, rng);
  CHECK(all.size() == 36);
  std::set<PauliString> unique(all.begin(), all.end());
  CHECK(unique.size() == 36);
  CHECK(all != pool.members);  // order permuted

  auto rng_a = make_rng(123), rng_b = make_rng(123);
  CHECK(sample_constraints(pool, 10, rng_a) == sample_constraints(pool, 10, rng_b));

  CHECK_THROWS_AS(sample_constraints(pool, 37, rng), std::invalid_argument);

  // inclusion frequency approx n_c / pool size, 3 sigma binomial band
  std::map<PauliString, int> counts;
  auto freq_rng = make_rng(99);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i)
    for (const auto& m : sample_constraints(pool, 10, freq_rng)) counts[m] += 1;
  const double p = 10.0 / 36.0;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (const auto& m : pool.members) {
    CHECK(counts[m] > draws * p - 3 * sigma);
    CHECK(counts[m] < draws * p + 3 * sigma);
  }
}
