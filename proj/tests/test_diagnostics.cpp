#include <doctest.h>

#include <cmath>

#include "fsl/diagnostics.hpp"

using namespace fsl;

namespace {
Eigen::MatrixXd m1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

DiffusionModel model_cos_drift_affine_sin() {
    // b = cos (Lipschitz 1), h(x) = 2x + sin x, no diffusion.
    return DiffusionModel(
        [](const Eigen::VectorXd& x) {
            Eigen::VectorXd y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = std::cos(x[i]);
            return y;
        },
        1.0,
        [](const Eigen::VectorXd& x) { return Eigen::MatrixXd::Zero(x.size(), x.size()); }, 0.0,
        m1(2.0),
        [](const Eigen::VectorXd& x) {
            Eigen::VectorXd y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = std::sin(x[i]);
            return y;
        },
        0.5, m1(1.0));
}
}  // namespace

TEST_CASE("observability rank test on the worked pairs") {
    // d = 1 with C = 1 is always observable.
    const auto r1 = observability_matrix_rank(m1(-3.0), m1(1.0));
    CHECK(r1.rank == 1);
    CHECK(r1.observable);

    Eigen::MatrixXd A(2, 2), C(1, 2);
    A << 0, 1, 0, 0;
    C << 1, 0;
    const auto r2 = observability_matrix_rank(A, C);
    CHECK(r2.rank == 2);
    CHECK(r2.observable);

    const auto r3 = observability_matrix_rank(Eigen::MatrixXd::Zero(2, 2), C);
    CHECK(r3.rank == 1);
    CHECK_FALSE(r3.observable);

    CHECK_THROWS_AS(observability_matrix_rank(A, C, 1.5), std::invalid_argument);
}

TEST_CASE("observability rank is invariant under similarity transforms") {
    RngStream rng(41);
    Eigen::MatrixXd A(3, 3), C(1, 3);
    A << 0, 1, 0, 0, 0, 1, 0.3, -0.2, 0.5;
    C << 1, 0, 0;
    const int base_rank = observability_matrix_rank(A, C).rank;
    int checked = 0;
    while (checked < 20) {
        Eigen::MatrixXd T(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) T(i, j) = 2.0 * rng.uniform() - 1.0;
        if (std::abs(T.determinant()) < 0.1) continue;
        const Eigen::MatrixXd Tinv = T.inverse();
        const auto rep = observability_matrix_rank(T * A * Tinv, C * Tinv, 1e-8);
        CHECK(rep.rank == base_rank);
        ++checked;
    }
}

TEST_CASE("reconstruction matrix rows and rank") {
    const auto single = reconstruction_matrix(m1(0.0), m1(1.0), {1.0});
    CHECK(single.stacked(0, 0) == doctest::Approx(1.0));
    CHECK(single.rank_report.rank == 1);

    Eigen::MatrixXd A(2, 2), C(1, 2);
    A << 0, 1, 0, 0;
    C << 1, 0;
    const auto two = reconstruction_matrix(A, C, {1.0, 2.0});
    CHECK(two.stacked(0, 0) == doctest::Approx(1.0));
    CHECK(two.stacked(0, 1) == doctest::Approx(0.5));
    CHECK(two.stacked(1, 0) == doctest::Approx(2.0));
    CHECK(two.stacked(1, 1) == doctest::Approx(2.0));
    CHECK(two.rank_report.rank == 2);
    // The pseudoinverse is a linear left inverse on the stacked integrals.
    CHECK((two.reconstruction * two.stacked - Eigen::MatrixXd::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() < 1e-10);

    const auto dead = reconstruction_matrix(Eigen::MatrixXd::Zero(2, 2), C, {0.5, 1.0, 2.0});
    CHECK(dead.rank_report.rank == 1);
    for (int i = 0; i < 3; ++i) CHECK(dead.stacked(i, 1) == doctest::Approx(0.0));

    CHECK_THROWS_AS(reconstruction_matrix(A, C, {-1.0}), std::invalid_argument);
}

TEST_CASE("reconstruction rank never exceeds observability rank; generic times reach it") {
    RngStream rng(42);
    int produced = 0;
    while (produced < 20) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.uniform() * 3);  // 2..4
        Eigen::MatrixXd A(d, d), C(1, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            C(0, i) = 2.0 * rng.uniform() - 1.0;
            for (Eigen::Index j = 0; j < d; ++j) A(i, j) = 2.0 * rng.uniform() - 1.0;
        }
        const auto obs_rank = observability_matrix_rank(A, C, 1e-8);
        std::vector<double> times;
        for (int k = 0; k < static_cast<int>(d); ++k) times.push_back(0.3 + 0.4 * k + rng.uniform());
        const auto rec = reconstruction_matrix(A, C, times, 1e-8);
        CHECK(rec.rank_report.rank <= obs_rank.rank);
        if (obs_rank.observable) {
            CHECK(rec.rank_report.rank == static_cast<int>(d));
            ++produced;
        }
    }
}

TEST_CASE("1-d bi-Lipschitz decomposition matches the derivative range") {
    const auto lin = bilipschitz_decompose_1d([](double x) { return 2.0 * x; }, -10, 10, 2001);
    CHECK(lin.C == doctest::Approx(2.0));
    CHECK(lin.eps == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(lin.valid);

    const auto wavy =
        bilipschitz_decompose_1d([](double x) { return 2.0 * x + std::sin(x); }, -10, 10, 4001);
    CHECK(wavy.slope_max == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(wavy.slope_min == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(wavy.C == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(wavy.eps == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(wavy.grid_lip_h0 <= wavy.eps + 1e-12);
    CHECK(wavy.valid);

    const auto flipped = bilipschitz_decompose_1d([](double x) { return -x; }, -5, 5, 1001);
    CHECK(flipped.C == doctest::Approx(-1.0));
    CHECK(flipped.eps == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(flipped.valid);

    CHECK_THROWS_AS(bilipschitz_decompose_1d([](double x) { return std::sin(x); }, -10, 10, 2001),
                    NotMonotone);
    CHECK_THROWS_AS(bilipschitz_decompose_1d([](double x) { return 2.0 * x; }, -1, 1, 10),
                    std::invalid_argument);
}

TEST_CASE("window constants match the displayed formulas") {
    // No nonlinearity, no drift: m = M = 1 for every window.
    const auto trivial = lemma51_constants(0.0, 0.0, 1.0, 1.0, 0.7);
    CHECK(trivial.lower == doctest::Approx(1.0));
    CHECK(trivial.upper == doctest::Approx(1.0));
    CHECK(std::isinf(trivial.eps0));

    // Drift-free: m is constant in the window length.
    for (double eps : {0.01, 0.3, 2.0})
        CHECK(lemma51_constants(0.5, 0.0, 1.0, 1.0, eps).lower == doctest::Approx(0.5));

    // With drift the zero crossing solves 1 - 0.5 e^e - (e/2) e^e = 0.
    const auto sc = lemma51_constants(0.5, 1.0, 1.0, 1.0, 0.1);
    auto lower_formula = [](double e) {
        return 1.0 - 0.5 * std::exp(e) - 0.5 * e * std::exp(e);
    };
    CHECK(lower_formula(sc.eps0 * (1 - 1e-6)) > 0.0);
    CHECK(lower_formula(sc.eps0 * (1 + 1e-6)) < 0.0);

    CHECK_THROWS_AS(lemma51_constants(1.0, 0.0, 1.0, 1.0, 0.1), InvalidModel);
}

TEST_CASE("window lower constant is monotone and has the stated zero-window limit") {
    const double lip_Ch0 = 0.3, lip_b = 0.8, norm_Cinv = 0.6, lip_h = 2.0;
    double prev_m = std::numeric_limits<double>::infinity();
    double prev_M = 0.0;
    for (double eps : {0.05, 0.1, 0.2, 0.4}) {
        const auto sc = lemma51_constants(lip_Ch0, lip_b, norm_Cinv, lip_h, eps);
        CHECK(sc.lower <= prev_m + 1e-12);
        CHECK(sc.upper >= prev_M - 1e-12);
        prev_m = sc.lower;
        prev_M = sc.upper;
    }
    const double limit = (1.0 - lip_Ch0) / norm_Cinv;
    double prev = -1.0;
    for (int k = 1; k <= 6; ++k) {
        const double m = lemma51_constants(lip_Ch0, lip_b, norm_Cinv, lip_h, std::pow(10.0, -k)).lower;
        CHECK(m > prev);  // monotone approach from below
        prev = m;
    }
    CHECK(std::abs(prev - limit) < 1e-5);
}

TEST_CASE("windowed observation map: identity observation gives unit ratios") {
    // b = 0, h = id: H_eps = id, every ratio is exactly one.
    DiffusionModel ident(
        [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()); }, 0.0,
        [](const Eigen::VectorXd& x) { return Eigen::MatrixXd::Zero(x.size(), x.size()); }, 0.0,
        m1(1.0), [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()); }, 0.0,
        m1(1.0));
    RngStream rng(43);
    const auto rep = verify_sandwich(ident, 0.5, 200, Eigen::VectorXd::Constant(1, -5),
                                     Eigen::VectorXd::Constant(1, 5), rng);
    CHECK(rep.worst_low_ratio == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.worst_high_ratio == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("windowed observation map: linear drift gives the closed-form ratio") {
    // b(x) = 0.5 x, h = id: ratio = (e^{lambda eps} - 1)/(lambda eps) for all pairs.
    DiffusionModel lin(
        [](const Eigen::VectorXd& x) { return 0.5 * x; }, 0.5,
        [](const Eigen::VectorXd& x) { return Eigen::MatrixXd::Zero(x.size(), x.size()); }, 0.0,
        m1(1.0), [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()); }, 0.0,
        m1(1.0));
    RngStream rng(44);
    const double eps = 0.2;
    const double want = (std::exp(0.5 * eps) - 1.0) / (0.5 * eps);
    const auto rep = verify_sandwich(lin, eps, 200, Eigen::VectorXd::Constant(1, -3),
                                     Eigen::VectorXd::Constant(1, 3), rng);
    CHECK(rep.worst_low_ratio == doctest::Approx(want).epsilon(1e-8));
    CHECK(rep.worst_high_ratio == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("sandwich verification passes for the nonlinear observation model") {
    const DiffusionModel model = model_cos_drift_affine_sin();
    const auto probe = lemma51_constants(0.5, 1.0, 0.5, 3.0, 0.0);
    RngStream rng(45);
    const auto rep = verify_sandwich(model, probe.eps0 / 2.0, 1000,
                                     Eigen::VectorXd::Constant(1, -8),
                                     Eigen::VectorXd::Constant(1, 8), rng);
    CHECK(rep.worst_low_ratio >= rep.constants.lower);
    CHECK(rep.worst_high_ratio <= rep.constants.upper);
    CHECK_THROWS_AS(verify_sandwich(model, probe.eps0 * 2.0, 10,
                                    Eigen::VectorXd::Constant(1, -8),
                                    Eigen::VectorXd::Constant(1, 8), rng),
                    std::invalid_argument);
}

TEST_CASE("flow deviation: noiseless diffusion never deviates") {
    DiffusionModel noiseless(
        [](const Eigen::VectorXd& x) {
            Eigen::VectorXd y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = std::cos(x[i]);
            return y;
        },
        1.0,
        [](const Eigen::VectorXd& x) { return Eigen::MatrixXd::Zero(x.size(), x.size()); }, 0.0,
        m1(1.0), [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()); }, 0.0,
        m1(1.0));
    RngStream rng(46);
    const auto rep = verify_flow_deviation(noiseless, {0.5, 1.0}, 50,
                                           {Eigen::VectorXd::Zero(1)}, 0.05, rng);
    CHECK(rep.worst_estimate < 1e-4);  // only the flow-vs-stepper error remains
}

TEST_CASE("flow deviation: clipped-linear drift with unit noise stays under the bound") {
    DiffusionModel clipped(
        [](const Eigen::VectorXd& x) {
            Eigen::VectorXd y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = std::clamp(x[i], -3.0, 3.0);
            return y;
        },
        1.0, [](const Eigen::VectorXd& x) { return Eigen::MatrixXd::Identity(x.size(), x.size()); },
        1.0, m1(1.0), [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()); },
        0.0, m1(1.0));
    RngStream rng(47);
    const auto rep = verify_flow_deviation(clipped, {0.5}, 2000, {Eigen::VectorXd::Zero(1)},
                                           0.01, rng);
    CHECK(rep.worst_estimate <= std::exp(0.5) * std::sqrt(0.5));
}

TEST_CASE("unobservable direction leaves the observation law unchanged") {
    // A = 0, C = [1 0]: v = e_2 satisfies int C e^{As} v ds = 0, so priors mu
    // and mu * delta_v generate observation paths with matching moments.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd C(1, 2);
    C << 1, 0;
    const LinearGaussianModel model(A, Eigen::MatrixXd::Identity(2, 2), C, m1(1.0));
    const GaussianMeasure base(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    Eigen::VectorXd shifted_mean(2);
    shifted_mean << 0.0, 7.0;
    const GaussianMeasure shifted(shifted_mean, Eigen::MatrixXd::Identity(2, 2));

    const int n = 20000;
    auto moments = [&](const GaussianMeasure& prior, std::uint64_t salt) {
        double s = 0, q = 0;
        for (int i = 0; i < n; ++i) {
            RngStream rng(salt + static_cast<std::uint64_t>(i));
            const auto sim = simulate_linear_gaussian(model, prior, 1.0, 0.1, rng);
            const double y = sim.second.values(0, 10);
            s += y;
            q += y * y;
        }
        return std::pair<double, double>{s / n, q / n - (s / n) * (s / n)};
    };
    const auto [mean_a, var_a] = moments(base, 100000);
    const auto [mean_b, var_b] = moments(shifted, 900000);
    CHECK(std::abs(mean_a - mean_b) < 3.0 * std::sqrt((var_a + var_b) / n));
    CHECK(std::abs(var_a - var_b) <
          3.0 * std::sqrt(2.0 * (var_a * var_a + var_b * var_b) / n));
}
