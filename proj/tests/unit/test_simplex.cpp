#include <doctest.h>

#include <random>

#include "../common/oracles.hpp"
#include "esl/error.hpp"
#include "esl/simplex.hpp"

using namespace esl;

namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    const double scale = std::pow(10.0, U(rng));
    Eigen::VectorXd e(n);
    for (int i = 0; i < n; ++i) e[i] = scale * N(rng);
    return e;
}

Eigen::VectorXd random_simplex_point(std::mt19937_64& rng, int n) {
    std::exponential_distribution<double> E(1.0);
    Eigen::VectorXd s(n);
    for (int i = 0; i < n; ++i) s[i] = E(rng);
    return s / s.sum();
}

}  // namespace

TEST_CASE("points on the simplex are fixed") {
    const auto r = project_simplex(Eigen::Vector2d(0.5, 0.5));
    CHECK(r.weights[0] == doctest::Approx(0.5));
    CHECK(r.weights[1] == doctest::Approx(0.5));
    CHECK(r.cutoff == 2);
}

TEST_CASE("constant input gives uniform weights") {
    for (double c : {-7.0, 0.0, 3.5, 1e6}) {
        const auto r = project_simplex(Eigen::VectorXd::Constant(9, c));
        CHECK(r.cutoff == 9);
        CHECK((r.weights.array() - 1.0 / 9.0).abs().maxCoeff() < 1e-14 * (1.0 + std::abs(c)));
    }
}

TEST_CASE("three-entry example against support enumeration") {
    const Eigen::Vector3d e(0.3, 0.2, -1.0);
    const auto r = project_simplex(e);
    const auto o = oracle::simplex_by_enumeration(e);
    CHECK((r.weights - o.alpha).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.cutoff == o.support);
    CHECK(r.weights[0] == doctest::Approx(0.55));
    CHECK(r.weights[1] == doctest::Approx(0.45));
    CHECK(r.weights[2] == 0.0);
}

TEST_CASE("cut-off integer") {
    CHECK(cutoff_integer(Eigen::Vector3d(1, 0, 0)) == 1);
    CHECK(cutoff_integer(Eigen::VectorXd::Constant(6, 2.0)) == 6);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 10000; ++t) {
        const int n = 1 + static_cast<int>(rng() % 40);
        Eigen::VectorXd e = random_vector(rng, n);
        const auto r = project_simplex(e);
        std::sort(e.data(), e.data() + n, std::greater<>());
        REQUIRE(cutoff_integer(e) == r.cutoff);
        REQUIRE(r.cutoff == static_cast<int>((r.weights.array() > 0.0).count()));
    }
}

TEST_CASE("projection matches the exhaustive oracle on small inputs") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 500; ++t) {
        const int n = 1 + static_cast<int>(rng() % 10);
        const Eigen::VectorXd e = random_vector(rng, n);
        const auto r = project_simplex(e);
        const auto o = oracle::simplex_by_enumeration(e);
        REQUIRE((r.weights - o.alpha).cwiseAbs().maxCoeff() < 1e-10);
        REQUIRE(r.cutoff == o.support);
    }
}

TEST_CASE("minimality against random simplex points") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 10000; ++t) {
        const int n = 1 + static_cast<int>(rng() % 30);
        const Eigen::VectorXd e = random_vector(rng, n);
        const auto r = project_simplex(e);
        const Eigen::VectorXd s = random_simplex_point(rng, n);
        REQUIRE((r.weights - e).norm() <= (s - e).norm() + 1e-12);
    }
}

TEST_CASE("shift invariance and order preservation") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> U(-100.0, 100.0);
    for (int t = 0; t < 2000; ++t) {
        const int n = 2 + static_cast<int>(rng() % 30);
        Eigen::VectorXd e(n);
        for (int i = 0; i < n; ++i) e[i] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        const double c = U(rng);
        const auto a = project_simplex(e), b = project_simplex((e.array() + c).matrix());
        REQUIRE((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-12);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (e[i] >= e[j]) REQUIRE(a.weights[i] >= a.weights[j]);
    }
}

TEST_CASE("ties resolve deterministically") {
    const Eigen::VectorXd e = (Eigen::VectorXd(5) << 1.0, 3.0, 3.0, -4.0, 3.0).finished();
    const auto r = project_simplex(e);
    CHECK(r.cutoff == 3);
    CHECK(r.support == std::vector<int>{1, 2, 4});
    CHECK(r.weights[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("linear cost over the simplex collapses onto a vertex") {
    std::mt19937_64 rng(15);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + static_cast<int>(rng() % 20);
        const Eigen::VectorXd f = random_vector(rng, n).cwiseAbs();
        // sum alpha = 1 makes the l1 term the constant 1, so (f + 1).alpha is
        // minimised at the vertex of the smallest f.
        Eigen::Index k;
        const double vmin = (f.array() + 1.0).minCoeff(&k);
        for (int s = 0; s < 50; ++s) {
            const Eigen::VectorXd a = random_simplex_point(rng, n);
            REQUIRE((f.array() + 1.0).matrix().dot(a) >= vmin - 1e-12);
        }
    }
}

TEST_CASE("non-finite input is rejected") {
    Eigen::Vector3d e(1.0, std::nan(""), 0.0);
    CHECK_THROWS_AS(project_simplex(e), EslError);
    e[1] = std::numeric_limits<double>::infinity();
    try {
        project_simplex(e);
        FAIL("expected an exception");
    } catch (const EslError& err) {
        CHECK(err.code() == ErrorCode::NonFinite);
    }
}
