#include "gocpd/linalg.hpp"
#include "gocpd/toeplitz.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace gocpd;

namespace {

Eigen::VectorXd rbf_column(Eigen::Index n, double lengthscale, double scale, double noise) {
    Eigen::VectorXd col(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double d = static_cast<double>(k);
        col(k) = scale * scale * std::exp(-0.5 * d * d / (lengthscale * lengthscale));
    }
    col(0) += noise * noise;
    return col;
}

Eigen::MatrixXd toeplitz(const Eigen::VectorXd &col) {
    const auto n = col.size();
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = col(std::abs(i - j));
        }
    }
    return m;
}

} // namespace

TEST_CASE("jittered Cholesky leaves well-conditioned matrices untouched") {
    Eigen::MatrixXd a(3, 3);
    a << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    const JitteredCholesky c = jittered_cholesky(a);
    CHECK(c.jitter == 0.0);
    const Eigen::MatrixXd l = c.llt.matrixL();
    CHECK((l * l.transpose() - a).norm() < 1e-12);
    CHECK(log_determinant(c.llt) == Catch::Approx(std::log(a.determinant())).epsilon(1e-12));
}

TEST_CASE("jittered Cholesky rescues a singular matrix and reports the jitter") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Ones(4, 4);
    const JitteredCholesky c = jittered_cholesky(a);
    CHECK(c.jitter > 0.0);
    CHECK(c.jitter <= kMaxJitter);
}

TEST_CASE("jittered Cholesky gives up on indefinite matrices") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
    a(1, 1) = -1.0;
    CHECK_THROWS_AS(jittered_cholesky(a), NonPositiveDefinite);
}

TEST_CASE("Toeplitz inverse matches a dense LU inverse") {
    for (const Eigen::Index n : {1, 2, 3, 4, 7, 10, 31, 64, 150}) {
        for (const double l : {0.5, 1.0, 5.0}) {
            const Eigen::VectorXd col = rbf_column(n, l, 0.8, 0.1);
            const ToeplitzInverse t = toeplitz_inverse(col);
            const Eigen::MatrixXd dense = toeplitz(col);
            const Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense);
            const Eigen::MatrixXd ref = lu.inverse();
            INFO("n=" << n << " l=" << l);
            CHECK(t.jitter == 0.0);
            CHECK((t.inverse - ref).norm() <= 1e-9 * ref.norm());
            double logdet = 0.0;
            const Eigen::MatrixXd u = lu.matrixLU();
            for (Eigen::Index i = 0; i < n; ++i) {
                logdet += std::log(std::abs(u(i, i)));
            }
            CHECK(t.log_determinant == Catch::Approx(logdet).epsilon(1e-10).margin(1e-10));
        }
    }
}

TEST_CASE("Toeplitz inverse applies jitter to a nearly singular matrix") {
    const Eigen::VectorXd col = rbf_column(40, 30.0, 1.0, 0.0);
    const ToeplitzInverse t = toeplitz_inverse(col);
    CHECK(t.jitter > 0.0);
    CHECK(t.inverse.allFinite());
}
