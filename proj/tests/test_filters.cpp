#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fsl/filters.hpp"

using namespace fsl;

namespace {
Eigen::MatrixXd m1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }
Eigen::VectorXd v1(double v) { return Eigen::VectorXd::Constant(1, v); }

ObservationPath flat_path(double T, double dt) {
    const auto K = static_cast<Eigen::Index>(std::llround(T / dt));
    Eigen::VectorXd times(K + 1);
    for (Eigen::Index k = 0; k <= K; ++k) times[k] = dt * static_cast<double>(k);
    return ObservationPath(times, Eigen::MatrixXd::Zero(1, K + 1));
}
}  // namespace

TEST_CASE("Kalman-Bucy covariance matches the closed-form Riccati solutions") {
    const ObservationPath path = flat_path(10.0, 1e-3);

    const auto pure_obs = kalman_bucy_run(LinearGaussianModel::scalar(0, 0, 1, 1),
                                          GaussianMeasure(v1(0), m1(2.0)), path);
    double err_a = 0.0;
    for (const auto& s : pure_obs)
        err_a = std::max(err_a, std::abs(s.cov(0, 0) - 2.0 / (1.0 + 2.0 * s.t)));
    CHECK(err_a < 1e-6);

    const auto balanced = kalman_bucy_run(LinearGaussianModel::scalar(0, 1, 1, 1),
                                          GaussianMeasure(v1(0), m1(3.0)), path);
    double err_b = 0.0;
    for (const auto& s : balanced) {
        const double th = std::tanh(s.t);
        err_b = std::max(err_b, std::abs(s.cov(0, 0) - (3.0 + th) / (1.0 + 3.0 * th)));
    }
    CHECK(err_b < 1e-6);
}

TEST_CASE("Kalman-Bucy with no information is pure prediction") {
    const ObservationPath path = flat_path(2.0, 1e-2);
    const auto run = kalman_bucy_run(LinearGaussianModel::scalar(0, 1, 0, 1),
                                     GaussianMeasure(v1(1.5), m1(0.5)), path);
    for (const auto& s : run) {
        CHECK(s.mean[0] == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(s.cov(0, 0) == doctest::Approx(0.5 + s.t).epsilon(1e-10));
    }
}

TEST_CASE("Kalman-Bucy rejects singular observation noise") {
    const ObservationPath path = flat_path(1.0, 0.1);
    CHECK_THROWS_AS(kalman_bucy_run(LinearGaussianModel::scalar(0, 1, 1, 0),
                                    GaussianMeasure(v1(0), m1(1)), path),
                    SingularInnovation);
}

TEST_CASE("particle filter with no information propagates the prior") {
    // C = 0: weights stay uniform, the cloud mean tracks the prior flow.
    const LinearGaussianModel model(m1(-0.4), m1(0.3), m1(0), m1(1));
    RngStream path_rng(21);
    const auto path = simulate_linear_gaussian(model, GaussianMeasure(v1(2.0), m1(0.2)), 1.0,
                                               0.05, path_rng)
                          .second;
    RngStream prng(22);
    double last_mean = 0.0, last_ess = 0.0;
    particle_filter_run(model, GaussianMeasure(v1(2.0), m1(0.2)), path, 20000, prng,
                        [&](const ParticleState& st) {
                            last_mean = st.measure.mean()[0];
                            last_ess = st.ess;
                        });
    CHECK(last_ess == doctest::Approx(20000.0));
    const double want_mean = 2.0 * std::exp(-0.4);
    const double sd = 0.6;  // generous bound on the cloud sd
    CHECK(std::abs(last_mean - want_mean) < 3.0 * sd / std::sqrt(20000.0));
}

TEST_CASE("particle filter tracks the Kalman-Bucy posterior on a linear model") {
    const LinearGaussianModel model = LinearGaussianModel::scalar(-1, 1, 1, 1);
    const GaussianMeasure prior(v1(0), m1(1));
    RngStream rng(23);
    const auto path = simulate_linear_gaussian(model, prior, 1.0, 0.01, rng).second;
    const auto kb = kalman_bucy_run(model, prior, path);
    RngStream prng(24);
    double pf_mean = 0.0, pf_var = 0.0;
    particle_filter_run(model, prior, path, 20000, prng, [&](const ParticleState& st) {
        pf_mean = st.measure.mean()[0];
        pf_var = st.measure.covariance()(0, 0);
    });
    CHECK(std::abs(pf_mean - kb.back().mean[0]) < 0.05);
    CHECK(std::abs(pf_var - kb.back().cov(0, 0)) < 0.05);
}

TEST_CASE("deterministic signal keeps every particle identical with uniform weights") {
    const LinearGaussianModel model(m1(0.2), m1(0), m1(1), m1(1));
    const Prior prior = DiscreteMeasure::dirac1d(1.0);
    RngStream rng(25);
    const auto path = simulate_linear_gaussian(model, prior, 1.0, 0.1, rng).second;
    RngStream prng(26);
    particle_filter_run(model, prior, path, 50, prng, [&](const ParticleState& st) {
        CHECK(st.ess == doctest::Approx(50.0));
        const Eigen::MatrixXd& a = st.measure.atoms();
        CHECK((a.array() - a(0, 0)).abs().maxCoeff() == 0.0);
    });
}

TEST_CASE("exponential-signal grid filter matches the hand Bayes ratio") {
    const Example12Model model(1.0);
    const auto prior = DiscreteMeasure::from_points1d({1.0, 3.0}, {0.5, 0.5});
    RngStream rng(27);
    const auto path = simulate_example12(model, 1.0, 2.0, 0.01, rng);

    // t = 0: prior unchanged.
    const auto at0 = grid_filter_example12(model, prior, path, 0.0);
    CHECK(at0.atoms().isApprox(prior.atoms()));
    CHECK(at0.weights().isApprox(prior.weights(), 1e-12));

    // Point-mass prior: pushed to x e^{lambda t} with weight one.
    const auto single = grid_filter_example12(model, DiscreteMeasure::dirac1d(2.0), path, 1.0);
    CHECK(single.size() == 1);
    CHECK(single.weights()[0] == doctest::Approx(1.0));
    CHECK(single.atoms()(0, 0) == doctest::Approx(2.0 * std::exp(1.0)).epsilon(1e-12));

    // Two-atom posterior odds against an independent evaluation of the same
    // Bayes formula from the same increments.
    const double t = 2.0;
    const auto post = grid_filter_example12(model, prior, path, t);
    double stoch = 0.0;
    for (Eigen::Index k = 0; k < path.steps(); ++k)
        stoch += std::exp(-path.times[k]) * (path.values(0, k + 1) - path.values(0, k));
    const double determ = (1.0 - std::exp(-2.0 * t)) / 2.0;
    const double log_odds_expected =
        (stoch / 1.0 - 0.5 * determ / 1.0) - (stoch / 3.0 - 0.5 * determ / 9.0);
    const double log_odds = std::log(post.weights()[0] / post.weights()[1]);
    CHECK(std::abs(log_odds - log_odds_expected) < 1e-10);
}

TEST_CASE("grid filter pulled back to time zero matches the truncated limit integrand") {
    const Example12Model model(0.8);
    const auto prior = DiscreteMeasure::from_points1d({1.0, 2.0, 5.0}, {0.3, 0.5, 0.2});
    RngStream rng(33);
    const auto path = simulate_example12(model, 2.0, 3.0, 0.01, rng);
    const double t = 3.0;

    const auto post = grid_filter_example12(model, prior, path, t);
    // Pull the atoms back by x -> x e^{-lambda t}: they must be the prior atoms.
    const auto pulled = pushforward(post, [&](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, x[0] * std::exp(-model.lambda * t));
    });
    CHECK((pulled.atoms() - prior.atoms()).cwiseAbs().maxCoeff() < 1e-9);

    // Truncated-horizon integrand: Z and the deterministic integral cut at t.
    double Z_t = 0.0;
    for (Eigen::Index k = 0; k < path.steps(); ++k)
        Z_t += std::exp(-model.lambda * path.times[k]) * path.increment(k)[0];
    const double determ_t = (1.0 - std::exp(-2.0 * model.lambda * t)) / (2.0 * model.lambda);
    Eigen::VectorXd integrand(prior.size());
    for (Eigen::Index i = 0; i < prior.size(); ++i) {
        const double x = prior.atoms()(0, i);
        integrand[i] = prior.weights()[i] * std::exp(Z_t / x - 0.5 * determ_t / (x * x));
    }
    integrand /= integrand.sum();
    CHECK((post.weights() - integrand).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("limit posterior reproduces the closed-form ratio") {
    const auto dirac = DiscreteMeasure::dirac1d(2.0);
    auto f = [](double x) { return std::cos(std::log(x)); };
    CHECK(limit_posterior_example12(dirac, 0.37, 1.0, f) == doctest::Approx(f(2.0)));
    CHECK(limit_posterior_example12(dirac, -5.0, 2.0, [](double) { return 4.25; }) ==
          doctest::Approx(4.25));

    const double e_pi = std::exp(3.14159265358979323846);
    const auto prior = DiscreteMeasure::from_points1d({1.0, e_pi}, {0.5, 0.5});
    // Independent arithmetic: w1 = e^{Z - 1/4}, w2 = e^{Z/e^pi - e^{-2pi}/4},
    // f-values +1 and -1.
    const double Z = 1.0;
    const double w1 = std::exp(Z - 0.25);
    const double w2 = std::exp(Z / e_pi - std::exp(-2 * 3.14159265358979323846) / 4.0);
    const double want = (w1 - w2) / (w1 + w2);
    CHECK(limit_posterior_example12(prior, Z, 1.0, f) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("predictor step: flat likelihood with the identity kernel is a no-op") {
    const auto pi = DiscreteMeasure::from_points1d({0.0, 1.0, 2.0, 3.0},
                                                   {0.25, 0.25, 0.25, 0.25});
    DiscreteChainModel ident([](const Eigen::VectorXd& x, RngStream&) { return x; },
                             [](const Eigen::VectorXd& x) { return x; },
                             GaussianNoise::scalar(0.0, 1.0));
    RngStream rng(28);
    PredictorOptions opts;
    opts.flat_likelihood = true;
    const auto next = predictor_step_discrete(pi, v1(0.0), ident, rng, opts);
    // Uniform weights + systematic resampling selects each atom exactly once.
    std::vector<double> got(next.atoms().data(), next.atoms().data() + next.size());
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<double>{0.0, 1.0, 2.0, 3.0});
}

TEST_CASE("predictor step with exact propagation equals the matrix recursion") {
    Eigen::MatrixXd states(1, 3);
    states << 0.0, 1.0, 2.0;
    Eigen::MatrixXd P(3, 3);
    P << 0.6, 0.3, 0.1, 0.2, 0.5, 0.3, 0.1, 0.4, 0.5;
    DiscreteChainModel model([](const Eigen::VectorXd& x, RngStream&) { return x; },
                             [](const Eigen::VectorXd& x) { return x; },
                             GaussianNoise::scalar(0.0, 0.25));
    model.finite = DiscreteChainModel::FiniteKernel{states, P};

    Eigen::VectorXd w(3);
    w << 0.5, 0.3, 0.2;
    const DiscreteMeasure pi(states, w);
    const Eigen::VectorXd y = v1(0.8);

    RngStream rng(29);
    PredictorOptions opts;
    opts.exact_propagation = true;
    const auto next = predictor_step_discrete(pi, y, model, rng, opts);

    // Independent dense recursion.
    Eigen::VectorXd lik(3);
    for (int i = 0; i < 3; ++i) {
        const double r = y[0] - states(0, i);
        lik[i] = std::exp(-r * r / (2 * 0.25)) / std::sqrt(2 * 3.14159265358979323846 * 0.25);
    }
    Eigen::VectorXd post = w.cwiseProduct(lik);
    post /= post.sum();
    const Eigen::VectorXd want = P.transpose() * post;
    CHECK((next.weights() - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("a nearly noiseless observation concentrates the predictor") {
    Eigen::MatrixXd states(1, 3);
    states << 0.0, 1.0, 2.0;
    DiscreteChainModel model([](const Eigen::VectorXd& x, RngStream&) { return x; },
                             [](const Eigen::VectorXd& x) { return x; },
                             GaussianNoise::scalar(0.0, 1e-6));
    model.finite = DiscreteChainModel::FiniteKernel{states, Eigen::MatrixXd::Identity(3, 3)};
    Eigen::VectorXd w(3);
    w << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    RngStream rng(30);
    PredictorOptions opts;
    opts.exact_propagation = true;
    const auto next =
        predictor_step_discrete(DiscreteMeasure(states, w), v1(1.002), model, rng, opts);
    CHECK(next.weights()[1] > 0.999);
}

TEST_CASE("predictor step reports a dead likelihood") {
    const auto pi = DiscreteMeasure::from_points1d({0.0, 1.0}, {0.5, 0.5});
    DiscreteChainModel model([](const Eigen::VectorXd& x, RngStream&) { return x; },
                             [](const Eigen::VectorXd& x) { return x; },
                             GaussianNoise::scalar(0.0, 1.0));
    RngStream rng(31);
    CHECK_NOTHROW(predictor_step_discrete(pi, v1(0.0), model, rng));
    // An observation beyond every atom's representable log-density kills the
    // whole cloud at once.
    CHECK_THROWS_AS(predictor_step_discrete(pi, v1(1e200), model, rng), AllWeightsZero);
}

TEST_CASE("finite HMM forward recursion against literal enumeration") {
    Eigen::MatrixXd T(2, 2), E(2, 2);
    T << 0.7, 0.3, 0.2, 0.8;
    E << 0.9, 0.1, 0.3, 0.7;
    const FiniteHMM hmm(T, E);
    Eigen::VectorXd prior(2);
    prior << 0.6, 0.4;

    // Uniform emission: posterior is the prior pushed through transitions.
    Eigen::MatrixXd Eu(2, 2);
    Eu << 0.5, 0.5, 0.5, 0.5;
    const FiniteHMM blind(T, Eu);
    const auto blind_run = finite_hmm_forward(blind, prior, {0, 1, 0});
    Eigen::VectorXd pushed = prior;
    for (int n = 1; n < 4; ++n) {
        pushed = T.transpose() * pushed;
        CHECK((blind_run[n] - pushed).cwiseAbs().maxCoeff() < 1e-14);
    }

    // Identity emission: the observation reveals the state.
    Eigen::MatrixXd Eid = Eigen::MatrixXd::Identity(2, 2);
    const FiniteHMM sharp(T, Eid);
    const auto sharp_run = finite_hmm_forward(sharp, prior, {1, 0});
    CHECK(sharp_run[1][1] == doctest::Approx(1.0));
    CHECK(sharp_run[2][0] == doctest::Approx(1.0));

    // Exhaustive path enumeration of P(X_n = i, Y_{1..n} = y).
    const std::vector<int> obs = {0, 1, 1};
    const auto run = finite_hmm_forward(hmm, prior, obs);
    for (int i = 0; i < 2; ++i) {
        double joint = 0.0;
        // Sum over all state paths x_0, x_1, x_2, x_3 with x_3 = i.
        for (int x0 = 0; x0 < 2; ++x0)
            for (int x1 = 0; x1 < 2; ++x1)
                for (int x2 = 0; x2 < 2; ++x2)
                    for (int x3 = 0; x3 < 2; ++x3) {
                        if (x3 != i) continue;
                        joint += prior[x0] * T(x0, x1) * E(x1, obs[0]) * T(x1, x2) *
                                 E(x2, obs[1]) * T(x2, x3) * E(x3, obs[2]);
                    }
        double norm = 0.0;
        for (int x0 = 0; x0 < 2; ++x0)
            for (int x1 = 0; x1 < 2; ++x1)
                for (int x2 = 0; x2 < 2; ++x2)
                    for (int x3 = 0; x3 < 2; ++x3)
                        norm += prior[x0] * T(x0, x1) * E(x1, obs[0]) * T(x1, x2) *
                                E(x2, obs[1]) * T(x2, x3) * E(x3, obs[2]);
        CHECK(run[3][i] == doctest::Approx(joint / norm).epsilon(1e-12));
    }

    // Zero-probability observation.
    Eigen::MatrixXd Ezero(2, 2);
    Ezero << 1.0, 0.0, 1.0, 0.0;
    const FiniteHMM impossible(T, Ezero);
    CHECK_THROWS_AS(finite_hmm_forward(impossible, prior, {1}), ZeroLikelihood);
}

TEST_CASE("systematic resampling is unbiased and a function of one uniform") {
    Eigen::VectorXd w(3);
    w << 0.5, 0.3, 0.2;
    const std::vector<Eigen::Index> once = systematic_resample(w, 0.25);
    CHECK(once == systematic_resample(w, 0.25));

    RngStream rng(32);
    const int draws = 10000;
    Eigen::Vector3d freq_sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d freq_sq = Eigen::Vector3d::Zero();
    for (int rep = 0; rep < draws; ++rep) {
        const auto idx = systematic_resample(w, rng.uniform());
        Eigen::Vector3d count = Eigen::Vector3d::Zero();
        for (Eigen::Index i : idx) count[i] += 1.0;
        count /= static_cast<double>(idx.size());
        freq_sum += count;
        freq_sq += count.cwiseProduct(count);
    }
    for (int i = 0; i < 3; ++i) {
        const double mean = freq_sum[i] / draws;
        const double var = freq_sq[i] / draws - mean * mean;
        CHECK(std::abs(mean - w[i]) <= 3.0 * std::sqrt(std::max(var, 1e-12) / draws) + 1e-9);
    }

    // Resampling to a different size.
    const auto idx5 = systematic_resample(w, 0.5, 5);
    CHECK(idx5.size() == 5);
}

TEST_CASE("effective sample size brackets") {
    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(10, 0.1);
    CHECK(effective_sample_size(uniform) == doctest::Approx(10.0));
    Eigen::VectorXd onehot = Eigen::VectorXd::Zero(10);
    onehot[3] = 1.0;
    CHECK(effective_sample_size(onehot) == doctest::Approx(1.0));
}
