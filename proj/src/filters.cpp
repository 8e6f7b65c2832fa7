#include "fsl/filters.hpp"

#include <cmath>

#include "fsl/errors.hpp"

namespace fsl {

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw SingularInnovation(std::string(what) + ": DD^T is singular");
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

Eigen::MatrixXd sample_prior_particles(const Prior& prior, Eigen::Index n, RngStream& rng) {
    if (const auto* g = std::get_if<GaussianMeasure>(&prior)) return sample(*g, n, rng);
    return sample(std::get<DiscreteMeasure>(prior), n, rng);
}

/// Shared bootstrap-filter engine. `propagate` advances the whole cloud one
/// observation step in place; `observe` maps the cloud to h-values (q x N).
template <class Propagate, class Observe>
void pf_engine(Propagate&& propagate, Observe&& observe, const Eigen::MatrixXd& DDt,
               const Prior& prior, const ObservationPath& path, Eigen::Index n, RngStream& rng,
               const ParticleCallback& cb, const ParticleOptions& opts) {
    if (n < 2) throw std::invalid_argument("particle_filter_run: need at least 2 particles");
    const Eigen::MatrixXd Rinv = inverse_spd(DDt, "particle_filter_run");

    Eigen::MatrixXd particles = sample_prior_particles(prior, n, rng);
    Eigen::VectorXd logw = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

    auto emit = [&](double t) {
        ParticleState st{DiscreteMeasure(particles, w), logw, effective_sample_size(w), t};
        cb(st);
    };
    emit(0.0);

    for (Eigen::Index k = 0; k < path.steps(); ++k) {
        const double dt = path.dt(k);
        const Eigen::VectorXd dy = path.increment(k);

        // Girsanov log-weight increment at the left endpoint.
        const Eigen::MatrixXd H = observe(particles);  // q x N
        const Eigen::VectorXd r_dy = Rinv * dy;
        logw += H.transpose() * r_dy -
                (0.5 * dt) * (H.array() * (Rinv * H).array()).colwise().sum().matrix().transpose();

        try {
            w = normalize_log(logw);
        } catch (const AllWeightsZero&) {
            throw AllWeightsZero("particle_filter_run: degenerate likelihood at step " +
                                 std::to_string(k));
        }

        if (effective_sample_size(w) < opts.resample_fraction * static_cast<double>(n)) {
            const std::vector<Eigen::Index> idx = systematic_resample(w, rng.uniform());
            Eigen::MatrixXd resampled(particles.rows(), n);
            for (Eigen::Index i = 0; i < n; ++i) resampled.col(i) = particles.col(idx[static_cast<std::size_t>(i)]);
            particles = std::move(resampled);
            logw.setZero();
            w.setConstant(1.0 / static_cast<double>(n));
        }

        propagate(particles);
        emit(path.times[k + 1]);
    }
}

}  // namespace

std::vector<KalmanState> kalman_bucy_run(const LinearGaussianModel& model,
                                         const GaussianMeasure& prior,
                                         const ObservationPath& path) {
    if (prior.dim() != model.state_dim())
        throw std::invalid_argument("kalman_bucy_run: prior dimension mismatch");
    if (path.obs_dim() != model.obs_dim())
        throw std::invalid_argument("kalman_bucy_run: path dimension mismatch");
    const Eigen::MatrixXd Rinv = inverse_spd(model.observation_noise_cov(), "kalman_bucy_run");
    const Eigen::MatrixXd BBt = model.B * model.B.transpose();

    Eigen::VectorXd m = prior.mean();
    Eigen::MatrixXd P = prior.covariance();

    std::vector<KalmanState> out;
    out.reserve(static_cast<std::size_t>(path.steps()) + 1);
    out.push_back({m, P, 0.0});

    for (Eigen::Index k = 0; k < path.steps(); ++k) {
        const double dt = path.dt(k);
        const Eigen::VectorXd ydot = path.increment(k) / dt;

        auto deriv = [&](const Eigen::VectorXd& mm, const Eigen::MatrixXd& PP,
                         Eigen::VectorXd& dm, Eigen::MatrixXd& dP) {
            const Eigen::MatrixXd gain = PP * model.C.transpose() * Rinv;
            dm = model.A * mm + gain * (ydot - model.C * mm);
            dP = model.A * PP + PP * model.A.transpose() + BBt - gain * model.C * PP;
        };

        Eigen::VectorXd k1m, k2m, k3m, k4m;
        Eigen::MatrixXd k1p, k2p, k3p, k4p;
        deriv(m, P, k1m, k1p);
        deriv(m + 0.5 * dt * k1m, P + 0.5 * dt * k1p, k2m, k2p);
        deriv(m + 0.5 * dt * k2m, P + 0.5 * dt * k2p, k3m, k3p);
        deriv(m + dt * k3m, P + dt * k3p, k4m, k4p);
        m += (dt / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
        P += (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        P = 0.5 * (P + P.transpose());

        out.push_back({m, P, path.times[k + 1]});
    }
    return out;
}

void particle_filter_run(const LinearGaussianModel& model, const Prior& prior,
                         const ObservationPath& path, Eigen::Index n_particles, RngStream& rng,
                         const ParticleCallback& cb, const ParticleOptions& opts) {
    const double dt = path.dt(0);
    for (Eigen::Index k = 0; k < path.steps(); ++k)
        if (std::abs(path.dt(k) - dt) > 1e-12)
            throw std::invalid_argument("particle_filter_run: grid must be uniform");
    const auto [phi, Q] = discretize_lti(model.A, model.B, dt);
    const Eigen::MatrixXd L = psd_sqrt(Q);
    const Eigen::Index d = model.state_dim();

    auto propagate = [&, phi = phi, L = L](Eigen::MatrixXd& particles) {
        Eigen::MatrixXd noise(d, particles.cols());
        for (Eigen::Index j = 0; j < particles.cols(); ++j) noise.col(j) = rng.gauss_vector(d);
        particles = phi * particles + L * noise;
    };
    auto observe = [&](const Eigen::MatrixXd& particles) -> Eigen::MatrixXd {
        return model.C * particles;
    };
    pf_engine(propagate, observe, model.observation_noise_cov(), prior, path, n_particles, rng,
              cb, opts);
}

void particle_filter_run(const DiffusionModel& model, const Prior& prior,
                         const ObservationPath& path, Eigen::Index n_particles, RngStream& rng,
                         const ParticleCallback& cb, const ParticleOptions& opts) {
    const Eigen::Index q = model.state_dim();
    Eigen::Index step_index = 0;
    auto propagate_step = [&](Eigen::MatrixXd& particles) {
        const double dt = path.dt(step_index);
        const double sqrt_dt = std::sqrt(dt);
        for (Eigen::Index j = 0; j < particles.cols(); ++j) {
            const Eigen::VectorXd x = particles.col(j);
            const Eigen::MatrixXd s = model.sigma(x);
            particles.col(j) = x + model.b(x) * dt + s * (sqrt_dt * rng.gauss_vector(s.cols()));
        }
        if (!particles.allFinite())
            throw NonFiniteState("particle_filter_run: non-finite particle at step " +
                                 std::to_string(step_index));
        ++step_index;
    };
    auto observe = [&](const Eigen::MatrixXd& particles) -> Eigen::MatrixXd {
        Eigen::MatrixXd H(q, particles.cols());
        for (Eigen::Index j = 0; j < particles.cols(); ++j) H.col(j) = model.h(particles.col(j));
        return H;
    };
    pf_engine(propagate_step, observe, model.D * model.D.transpose(), prior, path, n_particles,
              rng, cb, opts);
}

DiscreteMeasure grid_filter_example12(const Example12Model& model, const DiscreteMeasure& prior,
                                      const ObservationPath& path, double t) {
    if (prior.dim() != 1)
        throw std::invalid_argument("grid_filter_example12: prior must be one-dimensional");
    if (prior.atoms().row(0).minCoeff() < 1.0)
        throw std::invalid_argument("grid_filter_example12: prior must be supported on [1, inf)");

    // Locate t on the grid.
    Eigen::Index kt = -1;
    for (Eigen::Index k = 0; k < path.times.size(); ++k)
        if (std::abs(path.times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
            kt = k;
            break;
        }
    if (kt < 0) throw std::invalid_argument("grid_filter_example12: t is not a grid time");

    const double lambda = model.lambda;
    double stoch = 0.0;  // int_0^t e^{-lambda s} dY_s, left-endpoint sum
    for (Eigen::Index k = 0; k < kt; ++k)
        stoch += std::exp(-lambda * path.times[k]) * path.increment(k)[0];
    const double determ = (1.0 - std::exp(-2.0 * lambda * t)) / (2.0 * lambda);

    Eigen::VectorXd logw(prior.size());
    for (Eigen::Index i = 0; i < prior.size(); ++i) {
        const double x = prior.atoms()(0, i);
        logw[i] = std::log(prior.weights()[i]) + stoch / x - 0.5 * determ / (x * x);
    }
    const double growth = std::exp(lambda * t);
    Eigen::MatrixXd atoms = prior.atoms() * growth;
    return DiscreteMeasure::from_log_weights(std::move(atoms), logw);
}

double limit_posterior_example12(const DiscreteMeasure& prior, double Z, double lambda,
                                 const std::function<double(double)>& f) {
    if (prior.dim() != 1)
        throw std::invalid_argument("limit_posterior_example12: prior must be one-dimensional");
    if (prior.atoms().row(0).minCoeff() < 1.0)
        throw std::invalid_argument("limit_posterior_example12: prior must be supported on [1, inf)");
    Eigen::VectorXd expo(prior.size());
    for (Eigen::Index i = 0; i < prior.size(); ++i) {
        const double x = prior.atoms()(0, i);
        expo[i] = Z / x - 1.0 / (4.0 * lambda * x * x);
    }
    const double shift = expo.maxCoeff();
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < prior.size(); ++i) {
        const double w = prior.weights()[i] * std::exp(expo[i] - shift);
        num += w * f(prior.atoms()(0, i));
        den += w;
    }
    if (!(den > 0.0)) throw AllWeightsZero("limit_posterior_example12: degenerate Bayes ratio");
    return num / den;
}

DiscreteMeasure predictor_step_discrete(const DiscreteMeasure& pi, const Eigen::VectorXd& y,
                                        const DiscreteChainModel& model, RngStream& rng,
                                        const PredictorOptions& opts) {
    Eigen::VectorXd w;
    if (opts.flat_likelihood) {
        w = pi.weights();
    } else {
        GaussianDensity dens(model.xi);
        Eigen::VectorXd logw(pi.size());
        for (Eigen::Index i = 0; i < pi.size(); ++i) {
            const double lw = std::log(pi.weights()[i]);
            logw[i] = lw + dens.log_density(y - model.h(pi.atom(i)));
        }
        try {
            w = normalize_log(logw);
        } catch (const AllWeightsZero&) {
            throw AllWeightsZero("predictor_step_discrete: observation killed every atom");
        }
    }

    if (opts.exact_propagation) {
        if (!model.finite)
            throw std::invalid_argument("predictor_step_discrete: exact propagation needs a finite kernel");
        const auto& fk = *model.finite;
        if (pi.size() != fk.states.cols())
            throw std::invalid_argument("predictor_step_discrete: atom set does not match kernel states");
        Eigen::VectorXd pushed = fk.transition.transpose() * w;
        return DiscreteMeasure(fk.states, std::move(pushed));
    }

    const Eigen::Index n_out = opts.resample_to > 0 ? opts.resample_to : pi.size();
    const std::vector<Eigen::Index> idx = systematic_resample(w, rng.uniform(), n_out);
    Eigen::MatrixXd atoms(pi.dim(), n_out);
    for (Eigen::Index i = 0; i < n_out; ++i)
        atoms.col(i) = model.kernel(pi.atom(idx[static_cast<std::size_t>(i)]), rng);
    return DiscreteMeasure(std::move(atoms),
                           Eigen::VectorXd::Constant(n_out, 1.0 / static_cast<double>(n_out)));
}

std::vector<Eigen::VectorXd> finite_hmm_forward(const FiniteHMM& model,
                                                const Eigen::VectorXd& prior,
                                                const std::vector<int>& observations) {
    if (prior.size() != model.states())
        throw std::invalid_argument("finite_hmm_forward: prior size mismatch");
    if (prior.minCoeff() < 0.0 || std::abs(prior.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("finite_hmm_forward: prior is not a probability row");

    std::vector<Eigen::VectorXd> out;
    out.reserve(observations.size() + 1);
    Eigen::VectorXd cur = prior;
    out.push_back(cur);
    for (std::size_t n = 0; n < observations.size(); ++n) {
        const int y = observations[n];
        if (y < 0 || y >= model.symbols())
            throw std::invalid_argument("finite_hmm_forward: symbol out of range");
        Eigen::VectorXd pred = model.transition.transpose() * cur;
        Eigen::VectorXd post = pred.cwiseProduct(model.emission.col(y));
        const double norm = post.sum();
        if (!(norm > 0.0))
            throw ZeroLikelihood("finite_hmm_forward: zero-probability observation at step " +
                                 std::to_string(n));
        cur = post / norm;
        out.push_back(cur);
    }
    return out;
}

std::vector<Eigen::Index> systematic_resample(const Eigen::VectorXd& weights, double u,
                                              Eigen::Index n_out) {
    if (!(u >= 0.0 && u < 1.0))
        throw std::invalid_argument("systematic_resample: u must be in [0,1)");
    const Eigen::Index n_in = weights.size();
    const Eigen::Index n = n_out > 0 ? n_out : n_in;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    double cum = weights[0];
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pos = (static_cast<double>(i) + u) / static_cast<double>(n);
        while (pos > cum && j + 1 < n_in) {
            ++j;
            cum += weights[j];
        }
        idx[static_cast<std::size_t>(i)] = j;
    }
    return idx;
}

double effective_sample_size(const Eigen::VectorXd& weights) {
    return 1.0 / weights.squaredNorm();
}

}  // namespace fsl
