#include <doctest.h>

#include <cmath>

#include "fsl/measures.hpp"

using namespace fsl;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}
}  // namespace

TEST_CASE("normalize matches the worked examples") {
    CHECK(normalize(vec({1, 1, 2})).isApprox(vec({0.25, 0.25, 0.5})));
    CHECK(normalize(vec({5}))[0] == doctest::Approx(1.0));
    const Eigen::VectorXd w = normalize(vec({0, 3}));
    CHECK(w[0] == 0.0);
    CHECK(w[1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(normalize(vec({0, 0})), AllWeightsZero);
    CHECK_THROWS_AS(normalize(vec({-1, 2})), std::invalid_argument);
}

TEST_CASE("normalize is idempotent and scale invariant") {
    RngStream rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd w(5);
        for (int i = 0; i < 5; ++i) w[i] = rng.uniform();
        const double c = 0.01 + 100.0 * rng.uniform();
        const Eigen::VectorXd n1 = normalize(w);
        const Eigen::VectorXd n2 = normalize(c * w);
        const Eigen::VectorXd n3 = normalize(n1);
        CHECK((n1 - n2).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((n1 - n3).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(n1.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("normalize_log subtracts the maximum before exponentiating") {
    const Eigen::VectorXd w = normalize_log(vec({-1000, -1000 + std::log(3.0)}));
    CHECK(w[0] == doctest::Approx(0.25));
    CHECK(w[1] == doctest::Approx(0.75));
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(normalize_log(vec({-inf, -inf})), AllWeightsZero);
}

TEST_CASE("DiscreteMeasure validates its invariants") {
    Eigen::MatrixXd atoms(1, 2);
    atoms << 0, 1;
    CHECK_THROWS_AS(DiscreteMeasure(atoms, vec({0.5, 0.6})), std::invalid_argument);
    CHECK_THROWS_AS(DiscreteMeasure(atoms, vec({-0.1, 1.1})), std::invalid_argument);
    CHECK_THROWS_AS(DiscreteMeasure(atoms, vec({1.0})), std::invalid_argument);
    const DiscreteMeasure ok(atoms, vec({0.5, 0.5}));
    CHECK(ok.size() == 2);
    CHECK(ok.dim() == 1);
}

TEST_CASE("pushforward maps atoms and keeps weights") {
    const auto mu = DiscreteMeasure::from_points1d({0, 1}, {0.5, 0.5});
    const auto doubled = pushforward(mu, [](const Eigen::VectorXd& x) { return 2 * x; });
    CHECK(doubled.atoms()(0, 0) == 0.0);
    CHECK(doubled.atoms()(0, 1) == 2.0);
    CHECK(doubled.weights().isApprox(mu.weights()));

    const auto same = pushforward(mu, [](const Eigen::VectorXd& x) { return x; });
    CHECK(same.atoms().isApprox(mu.atoms()));

    // cos(log x) at {1, e^pi} -> {1, -1}.
    const double e_pi = std::exp(3.14159265358979323846);
    const auto nu = DiscreteMeasure::from_points1d({1.0, e_pi}, {0.5, 0.5});
    const auto mapped = pushforward(nu, [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, std::cos(std::log(x[0])));
    });
    CHECK(mapped.atoms()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mapped.atoms()(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(mapped.weights().sum() == doctest::Approx(1.0).epsilon(1e-15));

    // Coinciding images stay separate atoms.
    const auto squashed = pushforward(mu, [](const Eigen::VectorXd& x) { return 0.0 * x; });
    CHECK(squashed.size() == 2);
}

TEST_CASE("sampling is reproducible and statistically sound") {
    RngStream rng(5);
    const auto delta = DiscreteMeasure::dirac1d(0.0);
    const Eigen::MatrixXd d3 = sample(delta, 3, rng);
    CHECK(d3.cwiseAbs().maxCoeff() == 0.0);

    const GaussianMeasure g(vec({0}), Eigen::MatrixXd::Identity(1, 1));
    RngStream ga(17);
    const Eigen::MatrixXd draws = sample(g, 1000000, ga);
    CHECK(std::abs(draws.row(0).mean()) < 4e-3);  // 3 sigma = 3e-3

    const auto two = DiscreteMeasure::from_points1d({0, 1}, {0.5, 0.5});
    RngStream tw(23);
    const Eigen::MatrixXd picks = sample(two, 100000, tw);
    const double freq1 = picks.row(0).sum() / 100000.0;
    CHECK(std::abs(freq1 - 0.5) < 0.005);  // binomial 3 sigma

    RngStream r1(99), r2(99);
    CHECK(sample(two, 50, r1).isApprox(sample(two, 50, r2)));
}

TEST_CASE("convolved_density matches Gaussian mixture values") {
    const auto d0 = DiscreteMeasure::dirac1d(0.0);
    const GaussianNoise xi = GaussianNoise::standard(1);
    const double inv_sqrt2pi = 0.3989422804014327;
    CHECK(convolved_density(d0, xi, vec({0})) == doctest::Approx(inv_sqrt2pi).epsilon(1e-12));
    CHECK(convolved_density(d0, xi, vec({1})) ==
          doctest::Approx(std::exp(-0.5) * inv_sqrt2pi).epsilon(1e-12));

    // Mixture symmetry: (d_0 + d_2)/2 at y = 1.
    const auto mix = DiscreteMeasure::from_points1d({0, 2}, {0.5, 0.5});
    CHECK(convolved_density(mix, xi, vec({1})) ==
          doctest::Approx(std::exp(-0.5) * inv_sqrt2pi).epsilon(1e-12));
}

TEST_CASE("convolved_density integrates to one over an 8-sigma box") {
    const auto mu = DiscreteMeasure::from_points1d({-1, 0.5, 3}, {0.2, 0.5, 0.3});
    const GaussianNoise xi = GaussianNoise::scalar(0.0, 0.7);
    const double sigma = std::sqrt(0.7);
    const double lo = -1 - 8 * sigma, hi = 3 + 8 * sigma;
    const int n = 4001;
    const double h = (hi - lo) / (n - 1);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * convolved_density(mu, xi, vec({lo + i * h}));
    }
    acc *= h / 3.0;
    CHECK(std::abs(acc - 1.0) < 1e-6);
}

TEST_CASE("convolved_density rejects singular noise") {
    const auto mu = DiscreteMeasure::dirac1d(0.0);
    CHECK_THROWS_AS(convolved_density(mu, GaussianNoise::scalar(0.0, 0.0), vec({0})),
                    SingularNoise);
}

TEST_CASE("reflect negates the mean and is an involution") {
    Eigen::MatrixXd cov(2, 2);
    cov << 2, 0.3, 0.3, 1;
    const GaussianNoise xi(vec({1, -2}), cov);
    const GaussianNoise r = reflect(xi);
    CHECK(r.mean().isApprox(-xi.mean()));
    CHECK(r.covariance().isApprox(xi.covariance()));
    const GaussianNoise rr = reflect(r);
    CHECK(rr.mean().isApprox(xi.mean()));

    const GaussianNoise sym(vec({0, 0}), cov);
    CHECK(reflect(sym).mean().isApprox(sym.mean()));
}

TEST_CASE("GaussianMeasure rejects bad covariances") {
    Eigen::MatrixXd asym(2, 2);
    asym << 1, 0.5, -0.5, 1;
    CHECK_THROWS_AS(GaussianMeasure(vec({0, 0}), asym), std::invalid_argument);
    Eigen::MatrixXd indef(2, 2);
    indef << 1, 2, 2, 1;
    CHECK_THROWS_AS(GaussianMeasure(vec({0, 0}), indef), std::invalid_argument);
    // PSD (rank deficient) is allowed.
    Eigen::MatrixXd psd(2, 2);
    psd << 1, 1, 1, 1;
    CHECK_NOTHROW(GaussianMeasure(vec({0, 0}), psd));
}

TEST_CASE("measure CSV serialization round-trips at full precision") {
    Eigen::MatrixXd atoms(2, 3);
    atoms << 0.1, -2.3456789012345678, 1e-15, 4.5, 0.0, -7.89;
    const DiscreteMeasure mu = DiscreteMeasure::from_raw_weights(atoms, vec({0.2, 0.7, 0.1}));
    const std::string csv = mu.to_csv();
    CHECK(csv.rfind("atom_0,atom_1,weight\n", 0) == 0);
    const DiscreteMeasure back = DiscreteMeasure::from_csv(csv);
    CHECK(back.atoms().isApprox(mu.atoms(), 0.0));
    CHECK(back.weights().isApprox(mu.weights(), 0.0));
}
