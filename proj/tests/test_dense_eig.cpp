#include "doctest.h"

#include "sgeig/dense_eig.hpp"
#include "sgeig/errors.hpp"
#include "sgeig/rng.hpp"

#include <cmath>
#include <complex>

using namespace sgeig;
using cd = std::complex<double>;

namespace {

Eigen::MatrixXd random_matrix(int n, RandomStream& rs) {
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = rs.normal();
    return A;
}

EigenPair pair_of(cd lambda) {
    EigenPair p;
    p.lambda = lambda;
    p.v = Eigen::VectorXcd::Unit(2, 0);
    return p;
}

} // namespace

TEST_CASE("diagonal pencil") {
    Eigen::MatrixXd K = Eigen::Vector3d(1, 2, 3).asDiagonal();
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(3, 3);

    const auto top = solve_generalized(K, M, 1);
    REQUIRE(top.size() == 1);
    CHECK(std::abs(top[0].lambda - cd(3, 0)) < 1e-13);
    CHECK(std::abs(std::abs(top[0].v(2)) - 1.0) < 1e-13);
    CHECK(top[0].v.head(2).norm() < 1e-13);

    const auto all = solve_generalized(K, M, 3);
    CHECK(std::abs(all[0].lambda.real() - 3) < 1e-13);
    CHECK(std::abs(all[1].lambda.real() - 2) < 1e-13);
    CHECK(std::abs(all[2].lambda.real() - 1) < 1e-13);
}

TEST_CASE("rotation generator has eigenvalues +-i") {
    Eigen::MatrixXd K(2, 2);
    K << 0, -1, 1, 0;
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(2, 2);

    const auto pairs = solve_generalized(K, M, 2);
    REQUIRE(pairs.size() == 2);
    CHECK(std::abs(pairs[0].lambda - cd(0, 1)) < 1e-14);  // Im >= 0 first
    CHECK(std::abs(pairs[1].lambda - cd(0, -1)) < 1e-14);
    CHECK(std::abs(rightmost(pairs).lambda - cd(0, 1)) < 1e-14);
}

TEST_CASE("random pencil: residuals, conjugate pairs, determinism") {
    RandomStream rs(314, 2);
    const Eigen::MatrixXd K = random_matrix(8, rs);
    Eigen::MatrixXd M = random_matrix(8, rs);
    M += 8.0 * Eigen::MatrixXd::Identity(8, 8); // keep the pencil regular

    const auto pairs = solve_generalized(K, M, 8);
    REQUIRE(pairs.size() == 8);
    for (const auto& p : pairs) {
        CHECK((K * p.v - p.lambda * (M * p.v)).norm() < 1e-10);
        CHECK(std::abs(p.v.norm() - 1.0) < 1e-13);
        if (p.lambda.imag() != 0.0) {
            // conjugated pair is also an eigenpair of the real pencil
            const Eigen::VectorXcd vc = p.v.conjugate();
            CHECK((K * vc - std::conj(p.lambda) * (M * vc)).norm() < 1e-10);
        }
    }
    for (std::size_t i = 0; i + 1 < pairs.size(); ++i)
        CHECK(pairs[i].lambda.real() >= pairs[i + 1].lambda.real());

    const auto again = solve_generalized(K, M, 8);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].lambda.real() == again[i].lambda.real());
        CHECK(pairs[i].lambda.imag() == again[i].lambda.imag());
    }
}

TEST_CASE("infinite eigenvalues are filtered; singular pencil is an error") {
    const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2, 2);
    M(0, 0) = 1.0;

    const auto pairs = solve_generalized(K, M, 1);
    CHECK(std::abs(pairs[0].lambda - cd(1, 0)) < 1e-13);
    try {
        solve_generalized(K, M, 2); // only one finite eigenvalue exists
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Numerical);
    }

    try {
        solve_generalized(K, Eigen::MatrixXd::Zero(2, 2), 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Numerical);
    }
}

TEST_CASE("rightmost selection conventions") {
    CHECK(rightmost({pair_of({-1, 0}), pair_of({-2, 0})}).lambda == cd(-1, 0));

    // conjugate pair: nonnegative imaginary part wins
    CHECK(rightmost({pair_of({0.5, -2.0}), pair_of({0.5, 2.0})}).lambda == cd(0.5, 2.0));

    // Im >= 0 has priority over smaller |Im| ...
    CHECK(rightmost({pair_of({0.5, -0.1}), pair_of({0.5, 0.5})}).lambda == cd(0.5, 0.5));
    // ... and within the nonnegative group, smaller |Im| wins
    CHECK(rightmost({pair_of({0.5, 0.7}), pair_of({0.5, 0.2})}).lambda == cd(0.5, 0.2));

    CHECK_THROWS_AS(rightmost({}), Error);
}

TEST_CASE("eigenvector phase alignment") {
    RandomStream rs(99, 0);
    Eigen::VectorXcd ref(4), v(4);
    for (int i = 0; i < 4; ++i) {
        ref(i) = cd(rs.normal(), rs.normal());
        v(i) = cd(rs.normal(), rs.normal());
    }
    ref /= ref.norm();
    v /= v.norm();

    // identity
    const Eigen::VectorXcd same = align_eigvec(ref, ref);
    CHECK((same - ref).norm() < 1e-14);

    // pure phase removal
    const cd rot = std::polar(1.0, M_PI / 4.0);
    const Eigen::VectorXcd back = align_eigvec(rot * ref, ref);
    CHECK((back - ref).norm() < 1e-14);

    // stationarity of the maximizing angle
    const Eigen::VectorXcd aligned = align_eigvec(v, ref);
    CHECK(std::abs(ref.dot(aligned).imag()) < 1e-12);
    CHECK(ref.dot(aligned).real() >= 0.0);
    CHECK(std::abs(aligned.norm() - 1.0) < 1e-14);

    // orthogonal reference: undefined, unchanged
    Eigen::VectorXcd e0 = Eigen::VectorXcd::Unit(4, 0), e1 = Eigen::VectorXcd::Unit(4, 1);
    bool undefined = false;
    const Eigen::VectorXcd un = align_eigvec(e0, e1, &undefined);
    CHECK(undefined);
    CHECK((un - e0).norm() == 0.0);
}

TEST_CASE("canonical phase") {
    Eigen::VectorXcd v(3);
    v << cd(0.1, 0.2), cd(-0.5, 0.8), cd(0.05, 0.0);
    v /= v.norm();
    const Eigen::VectorXcd c = canonicalize_phase(v);
    int imax = 0;
    c.cwiseAbs().maxCoeff(&imax);
    CHECK(imax == 1);
    CHECK(c(1).real() > 0.0);
    CHECK(std::abs(c(1).imag()) < 1e-15);
    CHECK(std::abs(c.norm() - v.norm()) < 1e-15);
    // idempotent
    CHECK((canonicalize_phase(c) - c).norm() < 1e-15);
}
