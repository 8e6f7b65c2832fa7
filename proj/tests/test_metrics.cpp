#include <doctest.h>

#include <cmath>

#include "fsl/acceptance.hpp"
#include "fsl/metrics.hpp"

using namespace fsl;

namespace {

DiscreteMeasure random_measure(Eigen::Index d, Eigen::Index atoms, double box, RngStream& rng) {
    Eigen::MatrixXd a(d, atoms);
    for (Eigen::Index i = 0; i < atoms; ++i)
        for (Eigen::Index j = 0; j < d; ++j) a(j, i) = box * (2.0 * rng.uniform() - 1.0);
    Eigen::VectorXd w(atoms);
    for (Eigen::Index i = 0; i < atoms; ++i) w[i] = 0.05 + rng.uniform();
    return DiscreteMeasure::from_raw_weights(std::move(a), w);
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_CASE("bl_distance_exact on point masses equals the truncated distance") {
    const auto d0 = DiscreteMeasure::dirac1d(0.0);
    CHECK(bl_distance_exact(d0, d0) == doctest::Approx(0.0));
    CHECK(bl_distance_exact(d0, DiscreteMeasure::dirac1d(1.0)) == doctest::Approx(1.0));
    CHECK(bl_distance_exact(d0, DiscreteMeasure::dirac1d(5.0)) == doctest::Approx(2.0));
    CHECK(bl_distance_exact(d0, DiscreteMeasure::dirac1d(0.25)) == doctest::Approx(0.25));
    const auto half = DiscreteMeasure::from_points1d({0, 1}, {0.5, 0.5});
    CHECK(bl_distance_exact(half, d0) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("the 1-d chain recursion agrees with the pair-constraint simplex") {
    RngStream rng(101);
    double worst = 0.0;
    for (int rep = 0; rep < 60; ++rep) {
        const auto mu = random_measure(1, 1 + static_cast<Eigen::Index>(rng.uniform() * 9), 4, rng);
        const auto nu = random_measure(1, 1 + static_cast<Eigen::Index>(rng.uniform() * 9), 4, rng);
        worst = std::max(worst,
                         std::abs(detail::bl_via_chain(mu, nu) - detail::bl_via_simplex(mu, nu)));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("bl_distance_exact agrees with the grid-search oracle in 2d") {
    RngStream rng(102);
    double worst = 0.0;
    for (int rep = 0; rep < 25; ++rep) {
        const auto mu = random_measure(2, 1 + (rep % 2), 3, rng);
        const auto nu = random_measure(2, 2 - (rep % 2), 3, rng);
        worst = std::max(worst, std::abs(bl_distance_exact(mu, nu) - bl_grid_search_oracle(mu, nu)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("bl_distance_exact satisfies the metric axioms") {
    RngStream rng(103);
    for (int rep = 0; rep < 30; ++rep) {
        const Eigen::Index d = (rep % 2) + 1;
        const auto a = random_measure(d, 3, 3, rng);
        const auto b = random_measure(d, 3, 3, rng);
        const auto c = random_measure(d, 3, 3, rng);
        const double ab = bl_distance_exact(a, b);
        const double ba = bl_distance_exact(b, a);
        const double ac = bl_distance_exact(a, c);
        const double cb = bl_distance_exact(c, b);
        CHECK(std::abs(ab - ba) < 1e-12);
        CHECK(ab <= ac + cb + 1e-9);
        CHECK(ab <= 2.0 + 1e-12);
        CHECK(ab <= tv_discrete(a, b) + 1e-9);
    }
}

TEST_CASE("bl_distance_exact enforces the support cap") {
    RngStream rng(104);
    const auto mu = random_measure(1, 30, 3, rng);
    const auto nu = random_measure(1, 30, 3, rng);
    CHECK_THROWS_AS(bl_distance_exact(mu, nu, 40), SupportTooLarge);
    CHECK_NOTHROW(bl_distance_exact(mu, nu, 60));
}

TEST_CASE("partition members match the cos^2 formula") {
    Eigen::VectorXi k(1);
    k << 0;
    CHECK(partition_member_eval(k, 1.0, vec1(0.0)) == doctest::Approx(1.0));
    CHECK(partition_member_eval(k, 1.0, vec1(0.5)) == doctest::Approx(0.5));
    CHECK(partition_member_eval(k, 1.0, vec1(1.5)) == doctest::Approx(0.0));
}

TEST_CASE("partition of unity has the four structural properties") {
    RngStream rng(105);
    for (double alpha : {1.0, 10.0}) {
        const PartitionOfUnity pou(alpha, 2);
        const double lip = pou.lipschitz_bound();
        CHECK(lip == doctest::Approx(alpha * 3.14159265358979323846 / 2 * std::sqrt(2.0)));
        for (int rep = 0; rep < 2000; ++rep) {
            Eigen::VectorXd x(2);
            x << 10 * rng.uniform() - 5, 10 * rng.uniform() - 5;
            double sum = 0.0;
            int active = 0;
            for (const auto& k : pou.active_members(x)) {
                const double v = pou.member(k, x);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                if (v > 0.0) ++active;
                sum += v;
            }
            CHECK(active <= 4);
            CHECK(std::abs(sum - 1.0) <= 1e-10);
        }
    }
}

TEST_CASE("bl_upper_partition matches the worked examples and clips at 2") {
    const auto d0 = DiscreteMeasure::dirac1d(0.0);
    const auto dhalf = DiscreteMeasure::dirac1d(0.5);
    // mu = nu: only the 2 sqrt(d)/alpha term survives.
    CHECK(bl_upper_partition(d0, d0, 4.0) == doctest::Approx(0.5));
    // alpha = 1: 2 + (|1 - 1/2| + |0 - 1/2|) = 3, clipped to 2.
    CHECK(bl_upper_partition(d0, dhalf, 1.0) == doctest::Approx(2.0));
    // alpha = 100: bound saturates at 2 while the exact distance is 0.5.
    CHECK(bl_upper_partition(d0, dhalf, 100.0) == doctest::Approx(2.0));
    CHECK(bl_distance_exact(d0, dhalf) == doctest::Approx(0.5));
}

TEST_CASE("bl_lower_random is a valid lower bound and finds separated atoms") {
    RngStream rng(106);
    const auto d0 = DiscreteMeasure::dirac1d(0.0);
    CHECK(bl_lower_random(d0, d0, 100, rng) == doctest::Approx(0.0));

    const auto d5 = DiscreteMeasure::dirac1d(5.0);
    CHECK(bl_lower_random(d0, d5, 1000, rng) >= 1.9);

    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index d = (rep % 2) + 1;
        const auto mu = random_measure(d, 3, 3, rng);
        const auto nu = random_measure(d, 3, 3, rng);
        CHECK(bl_lower_random(mu, nu, 60, rng) <= bl_distance_exact(mu, nu) + 1e-9);
    }
}

TEST_CASE("tv_discrete matches atoms exactly") {
    const auto d0 = DiscreteMeasure::dirac1d(0.0);
    const auto d1 = DiscreteMeasure::dirac1d(1.0);
    CHECK(tv_discrete(d0, d0) == doctest::Approx(0.0));
    CHECK(tv_discrete(d0, d1) == doctest::Approx(2.0));
    const auto half = DiscreteMeasure::from_points1d({0, 1}, {0.5, 0.5});
    CHECK(tv_discrete(half, d0) == doctest::Approx(1.0));
}

TEST_CASE("tv_convolved matches the Gaussian closed form") {
    const auto d0 = DiscreteMeasure::dirac1d(0.0);
    const auto d1 = DiscreteMeasure::dirac1d(1.0);
    const auto dq = DiscreteMeasure::dirac1d(0.25);
    const GaussianNoise xi = GaussianNoise::standard(1);
    CHECK(tv_convolved(d0, d0, xi) == doctest::Approx(0.0).epsilon(1e-10));
    const double want1 = 2.0 * (2.0 * gauss_cdf(0.5) - 1.0);
    CHECK(std::abs(tv_convolved(d1, d0, xi) - want1) < 1e-6);
    CHECK(std::abs(want1 - 0.76585) < 1e-5);
    const double wantq = 2.0 * (2.0 * gauss_cdf(0.125) - 1.0);
    CHECK(std::abs(tv_convolved(dq, d0, xi) - wantq) < 1e-6);
    CHECK(std::abs(wantq - 0.19899) < 1e-4);
    CHECK_THROWS_AS(tv_convolved(d0, d1, GaussianNoise::scalar(0, 0)), SingularNoise);
}

TEST_CASE("convolution is forward-continuous on the shrinking-gap family") {
    const GaussianNoise xi = GaussianNoise::standard(1);
    const auto d0 = DiscreteMeasure::dirac1d(0.0);
    double prev_bl = 3.0, prev_tv = 3.0;
    for (long n : {1L, 2L, 4L, 8L, 16L}) {
        const auto mun = DiscreteMeasure::dirac1d(1.0 / static_cast<double>(n));
        const double bl = bl_distance_exact(mun, d0);
        const double tv = tv_convolved(mun, d0, xi);
        CHECK(bl < prev_bl);
        CHECK(tv < prev_tv);
        CHECK(tv_discrete(mun, d0) == doctest::Approx(2.0));
        prev_bl = bl;
        prev_tv = tv;
    }
    CHECK(prev_tv < 0.13);  // 2(2 Phi(1/32) - 1) ~ 0.0499
}

TEST_CASE("metric sandwich holds on random pairs") {
    RngStream rng(107);
    const std::vector<double> alphas = {1, 2, 5, 10, 20, 50};
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index d = (rep % 2) + 1;
        const auto mu = random_measure(d, 1 + static_cast<Eigen::Index>(rng.uniform() * 10), 4, rng);
        const auto nu = random_measure(d, 1 + static_cast<Eigen::Index>(rng.uniform() * 10), 4, rng);
        const double exact = bl_distance_exact(mu, nu);
        double upper = 2.0;
        for (double a : alphas) upper = std::min(upper, bl_upper_partition(mu, nu, a));
        const double lower = bl_lower_random(mu, nu, 300, rng);
        CHECK(lower <= exact + 1e-9);
        CHECK(exact <= upper + 1e-9);
    }
}

TEST_CASE("metric_report assembles all fields and serializes") {
    RngStream rng(108);
    const auto mu = DiscreteMeasure::from_points1d({0, 1}, {0.5, 0.5});
    const auto nu = DiscreteMeasure::dirac1d(0.0);
    const MetricReport rep = metric_report(mu, nu, MetricOptions{}, rng);
    REQUIRE(rep.exact_bl.has_value());
    CHECK(*rep.exact_bl == doctest::Approx(0.5));
    CHECK(rep.bl_lower <= *rep.exact_bl + 1e-12);
    CHECK(*rep.exact_bl <= rep.bl_upper + 1e-12);
    CHECK(rep.tv == doctest::Approx(1.0));
    CHECK(MetricReport::csv_header() == "t,bl_exact,bl_upper,bl_lower,tv");
    CHECK(rep.csv_row(2.5).rfind("2.5,0.5", 0) == 0);

    MetricOptions tiny;
    tiny.support_cap = 1;
    RngStream rng2(109);
    const MetricReport capped = metric_report(mu, nu, tiny, rng2);
    CHECK_FALSE(capped.exact_bl.has_value());
    CHECK(capped.csv_row(0.0).rfind("0,,", 0) == 0);
}
